"""End-to-end retrieval pipeline: cache, constrained decode, index lookup.

All shared state lives in a single immutable snapshot object that a request
reads exactly once, so one retrieval never mixes trie, index, and cache
versions. Snapshot updates are atomic reference swaps by a single writer.
"""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path

from .cache import CacheSnapshot, cache_get, load_cache, normalize_query
from .decoder import OFFLINE_PROFILE, ONLINE_PROFILE, DecodeParams, constrained_beam_search
from .errors import ConfigurationError, DecodeError, InvalidInputError, RetrievalError
from .index import AdHit, InvertedIndex, load_index, lookup
from .scorer import Scorer, load_scorer
from .trie import CiTrie, load_ci_set
from .vocab import Vocabulary, load_vocab

LATENCY_WINDOW = 10_000


@dataclass(frozen=True)
class EngineConfig:
    """Paths plus decode profiles and serving knobs.

    ``latency_budget_ms`` is observability-only unless
    ``enforce_latency_budget`` is set, in which case a decode that overruns
    the budget returns its best-effort partial result (and is therefore no
    longer deterministic; leave it off anywhere reproducibility matters).
    """

    vocab_path: str | None = None
    ci_set_path: str | None = None
    scorer_path: str | None = None
    index_path: str | None = None
    cache_path: str | None = None
    tokenization: str = "unicode-word"
    online: DecodeParams = ONLINE_PROFILE
    offline: DecodeParams = OFFLINE_PROFILE
    top_k: int = 100
    latency_budget_ms: float = 60.0
    enforce_latency_budget: bool = False
    aggregation: str = "max"
    assign_cap: int = 30

    def __post_init__(self):
        if self.latency_budget_ms <= 0:
            raise ConfigurationError("latency_budget_ms must be > 0")
        if self.top_k < 1:
            raise ConfigurationError("top_k must be >= 1")
        if self.aggregation not in ("max", "sum"):
            raise ConfigurationError(f"unknown aggregation mode {self.aggregation!r}")


def _params_from_dict(d: dict) -> DecodeParams:
    return DecodeParams(
        beam_size=int(d.get("beam_size", 50)),
        max_len=int(d.get("max_len", 4)),
        temperature=float(d.get("temperature", 0.7)),
        truncation_margin=(
            None if d.get("truncation_margin") is None else float(d["truncation_margin"])
        ),
        length_normalize=bool(d.get("length_normalize", False)),
    )


def load_config(path: str | Path) -> EngineConfig:
    """Read the engine configuration file (JSON)."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} not found")
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    paths = raw.get("paths", {})

    def _abs(key: str) -> str | None:
        value = paths.get(key)
        if value is None:
            return None
        p = Path(value)
        return str(p if p.is_absolute() else path.parent / p)

    kwargs = {}
    if "online" in raw:
        kwargs["online"] = _params_from_dict(raw["online"])
    if "offline" in raw:
        kwargs["offline"] = _params_from_dict(raw["offline"])
    for key in ("top_k", "latency_budget_ms", "enforce_latency_budget", "aggregation",
                "assign_cap", "tokenization"):
        if key in raw:
            kwargs[key] = raw[key]
    return EngineConfig(
        vocab_path=_abs("vocab"),
        ci_set_path=_abs("ci_set"),
        scorer_path=_abs("scorer"),
        index_path=_abs("index"),
        cache_path=_abs("cache"),
        **kwargs,
    )


@dataclass(frozen=True)
class RetrievalResult:
    query: str
    cis: tuple[tuple[str, int, float], ...]  # (text, ci_id, score), ranked
    ads: tuple[AdHit, ...]
    cache_hit: bool
    latency_ms: float
    index_version: int
    trie_version: str

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "cis": [
                {"text": text, "ci_id": ci_id, "score": score}
                for text, ci_id, score in self.cis
            ],
            "ads": [
                {"ad_id": h.ad_id, "score": h.score, "matched_ci_count": h.matched_ci_count}
                for h in self.ads
            ],
            "cache_hit": self.cache_hit,
            "latency_ms": self.latency_ms,
            "index_version": self.index_version,
            "trie_version": self.trie_version,
        }

    def content_key(self) -> str:
        """Canonical JSON of everything except the wall-clock measurement."""
        d = self.to_dict()
        d.pop("latency_ms")
        return json.dumps(d, sort_keys=True)


@dataclass(frozen=True)
class _Snapshot:
    vocab: Vocabulary
    trie: CiTrie
    scorer: Scorer
    index: InvertedIndex
    cache: CacheSnapshot | None


class Engine:
    """Retrieval runtime over immutable snapshots.

    Reads are lock-free; ``swap_index`` / ``swap_cache`` install a new
    snapshot atomically and never disturb in-flight requests.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        trie: CiTrie,
        scorer: Scorer,
        index: InvertedIndex,
        cache: CacheSnapshot | None = None,
        config: EngineConfig | None = None,
    ):
        config = config or EngineConfig()
        if index.trie_version != trie.version:
            raise ConfigurationError(
                f"index built for trie {index.trie_version}, engine has {trie.version}"
            )
        if cache is not None and cache.trie_version != trie.version:
            raise ConfigurationError(
                f"cache warmed for trie {cache.trie_version}, engine has {trie.version}"
            )
        self.config = config
        self._snap = _Snapshot(vocab=vocab, trie=trie, scorer=scorer, index=index, cache=cache)
        self._swap_lock = threading.Lock()
        self._latency_lock = threading.Lock()
        self._latencies: deque[float] = deque(maxlen=LATENCY_WINDOW)

    @classmethod
    def from_config(cls, config: EngineConfig) -> "Engine":
        missing = [
            name
            for name, value in (
                ("vocab", config.vocab_path),
                ("ci_set", config.ci_set_path),
                ("scorer", config.scorer_path),
                ("index", config.index_path),
            )
            if value is None
        ]
        if missing:
            raise ConfigurationError(f"config is missing paths: {', '.join(missing)}")
        vocab = load_vocab(config.vocab_path, scheme=config.tokenization)
        trie = load_ci_set(config.ci_set_path, vocab)
        scorer = load_scorer(config.scorer_path, vocab)
        index = load_index(config.index_path)
        cache = None
        if config.cache_path and Path(config.cache_path).exists():
            cache = load_cache(config.cache_path)
        return cls(vocab, trie, scorer, index, cache, config)

    # -- snapshot management -------------------------------------------------

    @property
    def snapshot(self) -> _Snapshot:
        return self._snap

    def swap_index(self, index: InvertedIndex) -> None:
        with self._swap_lock:
            snap = self._snap
            if index.trie_version != snap.trie.version:
                raise ConfigurationError("new index was built for a different trie")
            self._snap = replace(snap, index=index)

    def swap_cache(self, cache: CacheSnapshot | None) -> None:
        with self._swap_lock:
            snap = self._snap
            if cache is not None and cache.trie_version != snap.trie.version:
                raise ConfigurationError("new cache was warmed for a different trie")
            self._snap = replace(snap, cache=cache)

    # -- retrieval -------------------------------------------------------------

    def retrieve(self, query: str, top_k: int | None = None) -> RetrievalResult:
        """Cache lookup first; on miss, online-profile constrained decode."""
        start = time.perf_counter()
        snap = self._snap
        cfg = self.config
        if top_k is None:
            top_k = cfg.top_k
        if top_k < 1:
            raise InvalidInputError("top_k must be >= 1")
        norm = normalize_query(query)
        if not norm:
            raise InvalidInputError("query is empty")

        cache_hit = False
        decoded: tuple[tuple[int, float], ...] | list[tuple[int, float]]
        if snap.cache is not None:
            entry = cache_get(snap.cache, norm)
            if entry is not None:
                decoded = entry
                cache_hit = True
        if not cache_hit:
            deadline = None
            if cfg.enforce_latency_budget:
                deadline = time.monotonic() + cfg.latency_budget_ms / 1000.0
            try:
                decoded = constrained_beam_search(
                    snap.scorer, snap.trie, norm, cfg.online, deadline=deadline
                )
            except DecodeError as exc:
                raise RetrievalError("decode", str(exc)) from exc

        try:
            hits = lookup(snap.index, decoded, top_k, cfg.aggregation)
        except Exception as exc:
            raise RetrievalError("index-lookup", str(exc)) from exc

        latency_ms = (time.perf_counter() - start) * 1000.0
        with self._latency_lock:
            self._latencies.append(latency_ms)
        return RetrievalResult(
            query=norm,
            cis=tuple((snap.trie.ci_text(ci), ci, score) for ci, score in decoded),
            ads=tuple(hits),
            cache_hit=cache_hit,
            latency_ms=latency_ms,
            index_version=snap.index.version,
            trie_version=snap.trie.version,
        )

    # -- observability ---------------------------------------------------------

    def latency_percentiles(self) -> dict:
        with self._latency_lock:
            samples = sorted(self._latencies)
        if not samples:
            return {"count": 0, "p50": None, "p95": None, "p99": None}

        def pct(p: float) -> float:
            i = min(len(samples) - 1, int(p / 100.0 * len(samples)))
            return samples[i]

        return {
            "count": len(samples),
            "p50": pct(50),
            "p95": pct(95),
            "p99": pct(99),
            "budget_ms": self.config.latency_budget_ms,
        }

    def stats(self) -> dict:
        snap = self._snap
        cache_stats = snap.cache.stats.snapshot() if snap.cache is not None else None
        return {"cache": cache_stats, "latency_ms": self.latency_percentiles()}

    def health(self) -> dict:
        snap = self._snap
        return {
            "status": "ok",
            "trie_version": snap.trie.version,
            "index_version": snap.index.version,
            "ci_count": snap.trie.ci_count,
            "ad_count": snap.index.ad_count,
            "cache_entries": len(snap.cache) if snap.cache is not None else 0,
        }
