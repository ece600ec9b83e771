from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from adintent.cache import CacheSnapshot, warm_cache
from adintent.decoder import OFFLINE_PROFILE
from adintent.engine import Engine
from adintent.index import Ad, InvertedIndex, assign_cis_to_ad, build_index
from adintent.scorer import NgramScorer, fit_ngram_scorer
from adintent.trie import CiTrie, load_ci_set
from adintent.vocab import Vocabulary, build_vocab, tokenize

FIXTURE_DIR = Path(__file__).parent / "fixtures" / "data"
GOLDEN_DIR = Path(__file__).parent / "goldens"

PINNED_BUILT_AT = "2026-01-01T00:00:00+00:00"


@dataclass(frozen=True)
class FixtureWorld:
    """The committed synthetic corpus, built once per test session."""

    vocab: Vocabulary
    trie: CiTrie
    scorer: NgramScorer
    index: InvertedIndex
    cache: CacheSnapshot
    ads: list[Ad]
    pairs: list[tuple[str, tuple[int, ...]]]
    head: list[tuple[str, float]]
    dataset: list[tuple[str, frozenset[str]]]


def _read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


@pytest.fixture(scope="session")
def fixture_world() -> FixtureWorld:
    texts = [r["text"] for r in _read_jsonl(FIXTURE_DIR / "raw_cis.jsonl")]
    vocab = build_vocab(texts)
    trie = load_ci_set(FIXTURE_DIR / "raw_cis.jsonl", vocab)
    pairs = [
        (r["context"], tokenize(r["ci"], vocab))
        for r in _read_jsonl(FIXTURE_DIR / "pairs.jsonl")
    ]
    scorer = fit_ngram_scorer(pairs, order=2, smoothing_alpha=0.1, vocab=vocab)
    ads = [
        Ad(
            ad_id=r["ad_id"],
            title=r["title"],
            landing_page=r.get("landing_page", ""),
            materials=r.get("materials", ""),
        )
        for r in _read_jsonl(FIXTURE_DIR / "ads.jsonl")
    ]
    assignments = [
        (ad.ad_id, assign_cis_to_ad(ad, scorer, trie, OFFLINE_PROFILE, cap=30))
        for ad in ads
    ]
    index = build_index(assignments, trie.version, trie.ci_count)
    head = [
        (r["query"], float(r["freq"]))
        for r in _read_jsonl(FIXTURE_DIR / "head_queries.jsonl")
    ]
    cache = warm_cache(head, scorer, trie, OFFLINE_PROFILE, built_at=PINNED_BUILT_AT)
    dataset = [
        (r["query"], frozenset(r["relevant_ad_ids"]))
        for r in _read_jsonl(FIXTURE_DIR / "eval.jsonl")
    ]
    return FixtureWorld(
        vocab=vocab,
        trie=trie,
        scorer=scorer,
        index=index,
        cache=cache,
        ads=ads,
        pairs=pairs,
        head=head,
        dataset=dataset,
    )


@pytest.fixture()
def fixture_engine(fixture_world: FixtureWorld) -> Engine:
    # Same warmed entries, fresh hit counters and latency window per test.
    cache = CacheSnapshot(
        entries=fixture_world.cache.entries,
        built_with=fixture_world.cache.built_with,
        trie_version=fixture_world.cache.trie_version,
        built_at=fixture_world.cache.built_at,
        skipped=fixture_world.cache.skipped,
    )
    return Engine(
        fixture_world.vocab,
        fixture_world.trie,
        fixture_world.scorer,
        fixture_world.index,
        cache,
    )
