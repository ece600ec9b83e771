"""HTTP surface for a loaded engine: /retrieve, /healthz, /stats."""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .engine import Engine
from .errors import AdIntentError, InvalidInputError, RetrievalError


class RetrieveRequest(BaseModel):
    query: str
    top_k: int | None = None


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="adintent", docs_url=None, redoc_url=None)

    @app.post("/retrieve")
    def retrieve(req: RetrieveRequest):
        try:
            result = engine.retrieve(req.query, req.top_k)
        except InvalidInputError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        except RetrievalError as exc:
            return JSONResponse(
                status_code=500, content={"error": str(exc), "stage": exc.stage}
            )
        except AdIntentError as exc:
            return JSONResponse(
                status_code=500, content={"error": str(exc), "stage": "unknown"}
            )
        return result.to_dict()

    @app.get("/healthz")
    def healthz():
        return engine.health()

    @app.get("/stats")
    def stats():
        return engine.stats()

    return app


def serve(engine: Engine, bind_address: str = "127.0.0.1:8000") -> None:
    """Run the service until interrupted (blocking)."""
    import uvicorn

    host, _, port = bind_address.rpartition(":")
    uvicorn.run(create_app(engine), host=host or "127.0.0.1", port=int(port))
