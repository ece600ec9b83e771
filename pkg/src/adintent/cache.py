"""Offline-warmed exact-match cache of decoded intentions for head queries.

Search traffic is heavily long-tailed: a small set of head queries carries
most of the volume, so their intentions are decoded ahead of time with the
wide offline profile and served from an immutable snapshot. Between warms
the snapshot is static; there is no eviction.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from .decoder import OFFLINE_PROFILE, DecodeParams, constrained_beam_search
from .errors import ConfigurationError, DecodeError
from .scorer import Scorer
from .trie import CiTrie

logger = logging.getLogger(__name__)

CiList = tuple[tuple[int, float], ...]


def normalize_query(text: str) -> str:
    """Lowercase, trim, and collapse internal whitespace (idempotent)."""
    return " ".join(text.lower().split())


@dataclass
class CacheStats:
    """Hit accounting; counters only ever grow and hits + misses = lookups."""

    lookups: int = 0
    hits: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record(self, hit: bool) -> None:
        with self._lock:
            self.lookups += 1
            if hit:
                self.hits += 1

    @property
    def hit_rate(self) -> float:
        return self.hits / self.lookups if self.lookups else 0.0

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "lookups": self.lookups,
                "hits": self.hits,
                "hit_rate": self.hits / self.lookups if self.lookups else 0.0,
            }


@dataclass(frozen=True)
class CacheSnapshot:
    """Immutable warmed entries plus mutable hit counters."""

    entries: dict[str, CiList]
    built_with: str
    trie_version: str
    built_at: str
    skipped: tuple[str, ...] = ()
    stats: CacheStats = field(default_factory=CacheStats, compare=False)

    def __len__(self) -> int:
        return len(self.entries)


def warm_cache(
    head_queries: Iterable[tuple[str, float]],
    scorer: Scorer,
    trie: CiTrie,
    offline_params: DecodeParams = OFFLINE_PROFILE,
    profile_tag: str = "offline",
    min_freq: float = 0.0,
    built_at: str | None = None,
) -> CacheSnapshot:
    """Decode every head query with the offline profile and freeze the result.

    Queries are deduplicated by normalized form; queries below ``min_freq``
    are left out of the head set. A query whose decode fails is skipped and
    reported while warming continues. ``built_at`` is injectable so warms
    can be reproduced bit-for-bit.
    """
    entries: dict[str, CiList] = {}
    skipped: list[str] = []
    n_seen = 0
    for query, freq in head_queries:
        n_seen += 1
        if freq < min_freq:
            continue
        norm = normalize_query(query)
        if not norm or norm in entries:
            continue
        try:
            decoded = constrained_beam_search(scorer, trie, norm, offline_params)
        except DecodeError as exc:
            logger.warning("cache warm skipped query %r: %s", norm, exc)
            skipped.append(norm)
            continue
        entries[norm] = tuple(decoded)
    if n_seen == 0:
        raise ConfigurationError("head query list is empty")
    return CacheSnapshot(
        entries=entries,
        built_with=profile_tag,
        trie_version=trie.version,
        built_at=built_at or datetime.now(timezone.utc).isoformat(),
        skipped=tuple(skipped),
    )


def cache_get(cache: CacheSnapshot, query: str) -> CiList | None:
    """Exact-match lookup on the normalized query; updates hit counters."""
    entry = cache.entries.get(normalize_query(query))
    cache.stats.record(entry is not None)
    return entry


def save_cache(cache: CacheSnapshot, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for query in sorted(cache.entries):
            rec = {
                "query": query,
                "cis": [{"ci_id": ci, "score": score} for ci, score in cache.entries[query]],
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    manifest = {
        "profile": cache.built_with,
        "trie_version": cache.trie_version,
        "built_at": cache.built_at,
        "entries": len(cache.entries),
        "skipped": list(cache.skipped),
    }
    with open(manifest_path(path), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def manifest_path(path: str | Path) -> Path:
    return Path(str(path) + ".manifest.json")


def load_cache(path: str | Path) -> CacheSnapshot:
    path = Path(path)
    try:
        with open(manifest_path(path), encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"missing cache manifest for {path}") from exc
    entries: dict[str, CiList] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            entries[rec["query"]] = tuple(
                (int(c["ci_id"]), float(c["score"])) for c in rec["cis"]
            )
    return CacheSnapshot(
        entries=entries,
        built_with=manifest["profile"],
        trie_version=manifest["trie_version"],
        built_at=manifest["built_at"],
        skipped=tuple(manifest.get("skipped", ())),
    )
