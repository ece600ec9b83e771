from __future__ import annotations

import json

import numpy as np
import pytest

from adintent.errors import ConfigurationError, InvalidInputError, InvalidPrefixError
from adintent.trie import build_trie, load_ci_set, save_ci_set
from adintent.vocab import END_ID, UNK_ID, build_vocab, tokenize

from helpers import random_world, trie_prefixes


@pytest.fixture()
def vocab():
    return build_vocab(["buy flowers", "buy roses", "flower shop"])


def _pairs(vocab, *texts):
    return [(t, tokenize(t, vocab)) for t in texts]


def test_duplicates_collapse(vocab):
    trie = build_trie(_pairs(vocab, "buy flowers", "buy flowers"))
    assert trie.ci_count == 1


def test_prefix_of_another_ci(vocab):
    trie = build_trie(_pairs(vocab, "buy", "buy flowers"))
    assert trie.ci_count == 2
    buy = tokenize("buy", vocab)
    allowed = trie.allowed_next(buy)
    assert END_ID in allowed  # "buy" is itself an intention
    assert vocab.token_to_id["flowers"] in allowed  # and has a child


def test_allowed_next_cases(vocab):
    trie = build_trie(_pairs(vocab, "buy flowers", "buy roses"))
    assert trie.allowed_next(tokenize("buy", vocab)) == {
        vocab.token_to_id["flowers"],
        vocab.token_to_id["roses"],
    }
    assert trie.allowed_next(()) == {vocab.token_to_id["buy"]}
    with pytest.raises(InvalidPrefixError):
        trie.allowed_next((vocab.token_to_id["shop"],))


def test_resolve_cases(vocab):
    trie = build_trie(_pairs(vocab, "buy flowers", "buy roses"))
    ci = trie.resolve(tokenize("buy flowers", vocab))
    assert ci is not None and trie.ci_text(ci) == "buy flowers"
    assert trie.resolve(tokenize("buy", vocab)) is None  # strict prefix
    assert trie.resolve((UNK_ID,)) is None


def test_build_rejects_bad_input(vocab):
    with pytest.raises(ConfigurationError):
        build_trie([])
    with pytest.raises(InvalidInputError):
        build_trie([("x", ())])
    with pytest.raises(InvalidInputError):
        build_trie([("x", (UNK_ID,))])


def test_ci_ids_lexicographic_and_round_trip(vocab):
    trie = build_trie(_pairs(vocab, "flower shop", "buy flowers", "buy roses"))
    seqs = [trie.ci_seq(i) for i in range(trie.ci_count)]
    assert seqs == sorted(seqs)
    for ci_id, seq, _ in trie.items():
        assert trie.resolve(seq) == ci_id


def test_ci_count_matches_set_dedup_oracle():
    from helpers import WORDS, random_ci_texts

    rng = np.random.default_rng(3)
    texts = random_ci_texts(rng, 10_000, max_tokens=4)
    vocab = build_vocab(WORDS)
    trie = build_trie([(t, tokenize(t, vocab)) for t in texts])
    # Independent oracle: hash-set dedup over the raw corpus's sequences.
    assert trie.ci_count == len({tokenize(t, vocab) for t in texts})
    # And against a tiny sample with known duplicates:
    t2 = build_trie([(t, tokenize(t, vocab)) for t in ["buy me"] * 5 + ["cheap deals"] * 3])
    assert t2.ci_count == 2


def test_allowed_next_matches_linear_scan_oracle():
    rng = np.random.default_rng(17)
    vocab, trie = random_world(rng, 300, max_tokens=4)
    all_seqs = [seq for _, seq, _ in trie.items()]
    prefixes = trie_prefixes(trie)
    picks = rng.integers(0, len(prefixes), size=1000)
    for i in picks:
        prefix = prefixes[int(i)]
        # Oracle: linear scan over every stored intention.
        expected = set()
        for seq in all_seqs:
            if seq[: len(prefix)] == prefix:
                if len(seq) == len(prefix):
                    expected.add(END_ID)
                else:
                    expected.add(seq[len(prefix)])
        assert trie.allowed_next(prefix) == expected


def test_resolve_matches_linear_scan_oracle():
    rng = np.random.default_rng(19)
    vocab, trie = random_world(rng, 300, max_tokens=4)
    seq_to_id = {seq: ci for ci, seq, _ in trie.items()}
    prefixes = trie_prefixes(trie)
    for _ in range(1000):
        if rng.random() < 0.7:
            probe = prefixes[int(rng.integers(0, len(prefixes)))]
        else:  # off-trie probe
            probe = tuple(int(x) for x in rng.integers(2, vocab.size, size=3))
        assert trie.resolve(probe) == seq_to_id.get(probe)


def test_closure_random_walks_land_on_stored_cis():
    rng = np.random.default_rng(29)
    vocab, trie = random_world(rng, 200, max_tokens=4)
    for _ in range(500):
        prefix = ()
        while True:
            allowed = sorted(trie.allowed_next(prefix))
            pick = allowed[int(rng.integers(len(allowed)))]
            if pick == END_ID:
                break
            prefix = prefix + (pick,)
        assert trie.resolve(prefix) is not None


def test_allowed_next_cost_independent_of_ci_count():
    rng = np.random.default_rng(41)
    import time

    vocab_small, small = random_world(rng, 50, max_tokens=3)
    vocab_big, big = random_world(rng, 5000, max_tokens=3)

    def probe_cost(trie):
        start = time.perf_counter()
        for _ in range(2000):
            trie.allowed_next(())
        return time.perf_counter() - start

    # Root fanout is bounded by the word pool, so cost stays flat (10x slack).
    assert probe_cost(big) < probe_cost(small) * 10 + 0.05


def test_load_ci_set_normalizes_and_records_aliases(tmp_path, vocab):
    path = tmp_path / "cis.jsonl"
    rows = ["Buy  FLOWERS ", "buy flowers", "flower shop"]
    path.write_text("".join(json.dumps({"text": t}) + "\n" for t in rows))
    trie = load_ci_set(path, vocab)
    assert trie.ci_count == 2
    assert trie.aliases == {"buy flowers": ("Buy  FLOWERS ", "buy flowers")}
    texts = {trie.ci_text(i) for i in range(trie.ci_count)}
    assert texts == {"buy flowers", "flower shop"}


def test_load_ci_set_min_support(tmp_path, vocab):
    path = tmp_path / "cis.jsonl"
    rows = ["buy flowers", "buy flowers", "flower shop"]
    path.write_text("".join(json.dumps({"text": t}) + "\n" for t in rows))
    trie = load_ci_set(path, vocab, min_support=2)
    assert trie.ci_count == 1
    assert trie.ci_text(0) == "buy flowers"


def test_load_ci_set_explicit_ids(tmp_path, vocab):
    path = tmp_path / "cis.jsonl"
    rows = [
        {"ci_id": 1, "text": "buy flowers"},
        {"ci_id": 0, "text": "flower shop"},
    ]
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    trie = load_ci_set(path, vocab)
    assert trie.ci_text(1) == "buy flowers"
    assert trie.ci_text(0) == "flower shop"
    # Sparse or mixed ids are rejected.
    path.write_text(
        json.dumps({"ci_id": 2, "text": "buy flowers"})
        + "\n"
        + json.dumps({"ci_id": 0, "text": "flower shop"})
        + "\n"
    )
    with pytest.raises(ConfigurationError):
        load_ci_set(path, vocab)
    path.write_text(
        json.dumps({"ci_id": 0, "text": "buy flowers"})
        + "\n"
        + json.dumps({"text": "flower shop"})
        + "\n"
    )
    with pytest.raises(ConfigurationError):
        load_ci_set(path, vocab)


def test_save_ci_set_round_trip(tmp_path, vocab):
    trie = build_trie(_pairs(vocab, "buy flowers", "flower shop"))
    path = tmp_path / "canonical.jsonl"
    save_ci_set(trie, path)
    reloaded = load_ci_set(path, vocab)
    assert reloaded.version == trie.version
    assert [reloaded.ci_text(i) for i in range(reloaded.ci_count)] == [
        trie.ci_text(i) for i in range(trie.ci_count)
    ]


def test_version_is_content_fingerprint(vocab):
    a = build_trie(_pairs(vocab, "buy flowers", "flower shop"))
    b = build_trie(_pairs(vocab, "flower shop", "buy flowers"))
    c = build_trie(_pairs(vocab, "buy roses", "flower shop"))
    assert a.version == b.version
    assert a.version != c.version
