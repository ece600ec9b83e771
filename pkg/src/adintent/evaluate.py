"""Retrieval quality metrics and the dataset-driven evaluation harness.

Hit ratio at K is the fraction of a query's relevant ads found in the top-K
generated list. Average precision follows the position-indicator form: for
each relevant ad at position p, count the relevant ads ranked strictly
before it, add one, and divide by p; a relevant ad missing from the
generated list contributes zero (the position-infinity convention, which
lowers MAP and is stated prominently because of that). Coverage is the
fraction of requests that retrieved at least one ad.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .engine import Engine, RetrievalResult
from .errors import AdIntentError, ConfigurationError, InvalidInputError, UndefinedMetricError

logger = logging.getLogger(__name__)

DEFAULT_KS = (50, 100, 500)
DEFAULT_DEPTH = 500


@dataclass(frozen=True)
class EvalRecord:
    """Ground truth and the ranked list generated for one query."""

    query: str
    ground_truth: frozenset[str]
    generated: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.generated)) != len(self.generated):
            raise InvalidInputError(
                f"generated list for {self.query!r} contains duplicate ads"
            )


def hit_ratio_at_k(record: EvalRecord, k: int) -> float:
    if k < 1:
        raise InvalidInputError("K must be >= 1")
    if not record.ground_truth:
        raise UndefinedMetricError(f"empty ground truth for query {record.query!r}")
    hits = sum(1 for ad in record.generated[:k] if ad in record.ground_truth)
    return hits / len(record.ground_truth)


def average_precision(record: EvalRecord) -> float:
    if not record.ground_truth:
        raise UndefinedMetricError(f"empty ground truth for query {record.query!r}")
    position = {ad: p for p, ad in enumerate(record.generated, start=1)}
    gt_positions = [position[ad] for ad in record.ground_truth if ad in position]
    total = 0.0
    for p in gt_positions:
        ranked_before = sum(1 for q in gt_positions if q < p)
        total += (ranked_before + 1) / p
    return total / len(record.ground_truth)


def mean_average_precision(records: Sequence[EvalRecord]) -> float:
    if not records:
        raise UndefinedMetricError("no records to average")
    return sum(average_precision(r) for r in records) / len(records)


def ad_coverage_rate(results: Sequence[RetrievalResult]) -> float:
    if not results:
        raise UndefinedMetricError("no retrieval results")
    covered = sum(1 for r in results if len(r.ads) > 0)
    return covered / len(results)


@dataclass(frozen=True)
class EvalReport:
    """Aggregated metrics; latencies are kept out of the persisted JSON."""

    hr: dict[int, float]
    mean_ap: float
    acr: float
    per_query_ap: tuple[tuple[str, float], ...]
    pv: int
    adpv: int
    failures: int
    depth: int
    latencies_ms: tuple[float, ...] = ()


def run_eval(
    engine: Engine,
    dataset: Sequence[tuple[str, frozenset[str]]],
    ks: Sequence[int] = DEFAULT_KS,
    depth: int = DEFAULT_DEPTH,
) -> EvalReport:
    """Retrieve each dataset query at ``depth`` and aggregate all metrics.

    Hit ratios are averaged over queries. A query whose retrieval raises is
    excluded from every metric and counted under ``failures``.
    """
    if not dataset:
        raise ConfigurationError("evaluation dataset is empty")
    records: list[EvalRecord] = []
    results: list[RetrievalResult] = []
    failures = 0
    for query, ground_truth in dataset:
        try:
            result = engine.retrieve(query, top_k=depth)
        except AdIntentError as exc:
            logger.warning("eval: retrieval failed for %r: %s", query, exc)
            failures += 1
            continue
        results.append(result)
        records.append(
            EvalRecord(
                query=query,
                ground_truth=frozenset(ground_truth),
                generated=tuple(hit.ad_id for hit in result.ads),
            )
        )
    if not records:
        raise ConfigurationError("every evaluation query failed")
    hr = {
        k: sum(hit_ratio_at_k(r, k) for r in records) / len(records) for k in ks
    }
    return EvalReport(
        hr=hr,
        mean_ap=mean_average_precision(records),
        acr=ad_coverage_rate(results),
        per_query_ap=tuple((r.query, average_precision(r)) for r in records),
        pv=len(results),
        adpv=sum(1 for r in results if r.ads),
        failures=failures,
        depth=depth,
        latencies_ms=tuple(r.latency_ms for r in results),
    )


def load_eval_dataset(path: str | Path) -> list[tuple[str, frozenset[str]]]:
    """Read `{"query", "relevant_ad_ids": [...]}` lines."""
    dataset: list[tuple[str, frozenset[str]]] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            relevant = frozenset(rec["relevant_ad_ids"])
            if not relevant:
                raise InvalidInputError(
                    f"query {rec['query']!r} has no relevant ads; HR/AP undefined"
                )
            dataset.append((rec["query"], relevant))
    if not dataset:
        raise ConfigurationError(f"{path}: evaluation dataset is empty")
    return dataset
