"""Versioned inverted index from intention ids to ads.

Snapshots are immutable: add/remove return a new index whose version is one
higher, so readers holding an old snapshot are never disturbed. Postings and
the reverse ad map are exact transposes at every version. In production the
writer batches updates on a fixed cadence; in library mode updates apply
synchronously.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .decoder import DecodeParams, constrained_beam_search
from .errors import (
    AssignmentError,
    ConfigurationError,
    DecodeError,
    IdempotencyError,
    IndexBuildError,
    InvalidInputError,
)
from .scorer import Scorer
from .trie import CiTrie


@dataclass(frozen=True)
class Ad:
    """One advertisement; ``materials`` is free text used for assignment."""

    ad_id: str
    title: str
    landing_page: str = ""
    materials: str = ""

    def __post_init__(self):
        if not self.ad_id:
            raise InvalidInputError("ad_id must be non-empty")

    def context(self) -> str:
        """Decoding context for intention assignment: title plus materials."""
        return f"{self.title} {self.materials}".strip()


@dataclass(frozen=True)
class AdHit:
    ad_id: str
    score: float
    matched_ci_count: int


@dataclass(frozen=True)
class InvertedIndex:
    """One immutable version of the intention -> ads mapping."""

    postings: dict[int, frozenset[str]]
    ad_to_cis: dict[str, frozenset[int]]
    version: int
    trie_version: str
    ci_count: int

    def ads_for(self, ci_id: int) -> frozenset[str]:
        return self.postings.get(ci_id, frozenset())

    @property
    def ad_count(self) -> int:
        return len(self.ad_to_cis)


def _validate_cis(cis: Sequence[int], ci_count: int, ad_id: str) -> frozenset[int]:
    out = frozenset(int(c) for c in cis)
    for ci in out:
        if not 0 <= ci < ci_count:
            raise IndexBuildError(f"ad {ad_id!r} references invalid intention id {ci}")
    return out


def build_index(
    assignments: Iterable[tuple[str, Sequence[int]]],
    trie_version: str,
    ci_count: int,
) -> InvertedIndex:
    """Build version 1 of the index from per-ad intention assignments."""
    postings: dict[int, set[str]] = {}
    ad_to_cis: dict[str, frozenset[int]] = {}
    for ad_id, cis in assignments:
        if ad_id in ad_to_cis:
            raise IndexBuildError(f"duplicate ad {ad_id!r} in assignments")
        ci_set = _validate_cis(cis, ci_count, ad_id)
        ad_to_cis[ad_id] = ci_set
        for ci in ci_set:
            postings.setdefault(ci, set()).add(ad_id)
    return InvertedIndex(
        postings={ci: frozenset(ads) for ci, ads in postings.items()},
        ad_to_cis=ad_to_cis,
        version=1,
        trie_version=trie_version,
        ci_count=ci_count,
    )


def add_ad(index: InvertedIndex, ad_id: str, cis: Sequence[int]) -> InvertedIndex:
    """Return a new version with *ad_id* retrievable through every listed id."""
    if ad_id in index.ad_to_cis:
        raise IdempotencyError(f"ad {ad_id!r} already indexed")
    ci_set = _validate_cis(cis, index.ci_count, ad_id)
    postings = dict(index.postings)
    for ci in ci_set:
        postings[ci] = postings.get(ci, frozenset()) | {ad_id}
    ad_to_cis = dict(index.ad_to_cis)
    ad_to_cis[ad_id] = ci_set
    return InvertedIndex(
        postings=postings,
        ad_to_cis=ad_to_cis,
        version=index.version + 1,
        trie_version=index.trie_version,
        ci_count=index.ci_count,
    )


def remove_ad(index: InvertedIndex, ad_id: str) -> InvertedIndex:
    """Return a new version with *ad_id* absent from all postings."""
    ci_set = index.ad_to_cis.get(ad_id)
    if ci_set is None:
        raise IdempotencyError(f"ad {ad_id!r} not indexed")
    postings = dict(index.postings)
    for ci in ci_set:
        remaining = postings[ci] - {ad_id}
        if remaining:
            postings[ci] = remaining
        else:
            del postings[ci]
    ad_to_cis = dict(index.ad_to_cis)
    del ad_to_cis[ad_id]
    return InvertedIndex(
        postings=postings,
        ad_to_cis=ad_to_cis,
        version=index.version + 1,
        trie_version=index.trie_version,
        ci_count=index.ci_count,
    )


def lookup(
    index: InvertedIndex,
    decoded: Sequence[tuple[int, float]],
    top_k: int,
    aggregation: str = "max",
) -> list[AdHit]:
    """Resolve decoded intentions to ranked ads.

    Each ad's score aggregates its matched intention scores (``max`` or
    ``sum``); ties break by matched count descending, then ad id ascending.
    """
    if top_k < 1:
        raise InvalidInputError("top_k must be >= 1")
    if aggregation not in ("max", "sum"):
        raise ConfigurationError(f"unknown aggregation mode {aggregation!r}")
    scores: dict[str, float] = {}
    counts: dict[str, int] = {}
    for ci_id, score in decoded:
        for ad_id in index.postings.get(ci_id, ()):
            if ad_id in scores:
                if aggregation == "max":
                    scores[ad_id] = max(scores[ad_id], score)
                else:
                    scores[ad_id] += score
                counts[ad_id] += 1
            else:
                scores[ad_id] = score
                counts[ad_id] = 1
    hits = [
        AdHit(ad_id=ad_id, score=scores[ad_id], matched_ci_count=counts[ad_id])
        for ad_id in scores
    ]
    hits.sort(key=lambda h: (-h.score, -h.matched_ci_count, h.ad_id))
    return hits[:top_k]


def assign_cis_to_ad(
    ad: Ad,
    scorer: Scorer,
    trie: CiTrie,
    params: DecodeParams,
    cap: int = 30,
) -> list[int]:
    """Assign the top-``cap`` decoded intentions to a (typically new) ad."""
    if cap < 1:
        raise ConfigurationError("assignment cap must be >= 1")
    try:
        decoded = constrained_beam_search(scorer, trie, ad.context(), params)
    except DecodeError as exc:
        raise AssignmentError(ad.ad_id, str(exc)) from exc
    if not decoded:
        raise AssignmentError(
            ad.ad_id, f"no intention decodable within max_len={params.max_len}"
        )
    return [ci_id for ci_id, _ in decoded[:cap]]


def load_ads(path: str | Path) -> list[Ad]:
    """Read ads from line-delimited JSON records."""
    ads = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            ads.append(
                Ad(
                    ad_id=rec["ad_id"],
                    title=rec.get("title", ""),
                    landing_page=rec.get("landing_page") or "",
                    materials=rec.get("materials") or "",
                )
            )
    return ads


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Persist postings as line-delimited JSON plus a sidecar manifest."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for ci_id in sorted(index.postings):
            rec = {"ci_id": ci_id, "ad_ids": sorted(index.postings[ci_id])}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    manifest = {
        "trie_version": index.trie_version,
        "version": index.version,
        "ci_count": index.ci_count,
    }
    with open(manifest_path(path), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def manifest_path(path: str | Path) -> Path:
    return Path(str(path) + ".manifest.json")


def load_index(path: str | Path) -> InvertedIndex:
    path = Path(path)
    try:
        with open(manifest_path(path), encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"missing index manifest for {path}") from exc
    postings: dict[int, frozenset[str]] = {}
    ad_to_cis: dict[str, set[int]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            ci_id = int(rec["ci_id"])
            ads = frozenset(rec["ad_ids"])
            postings[ci_id] = ads
            for ad_id in ads:
                ad_to_cis.setdefault(ad_id, set()).add(ci_id)
    return InvertedIndex(
        postings=postings,
        ad_to_cis={a: frozenset(c) for a, c in ad_to_cis.items()},
        version=int(manifest["version"]),
        trie_version=manifest["trie_version"],
        ci_count=int(manifest["ci_count"]),
    )
