"""Shared test utilities: random worlds, oracle implementations.

Every oracle here is deliberately independent of the production code path
it checks: enumeration instead of search, linear scans instead of trie
walks, literal formulas instead of incremental accounting.
"""

from __future__ import annotations

import numpy as np

from adintent.decoder import DecodeParams, temper
from adintent.scorer import TableScorer, as_log_distribution
from adintent.trie import CiTrie, build_trie
from adintent.vocab import END_ID, TokenSeq, Vocabulary, build_vocab, tokenize

WORDS = [
    "buy", "cheap", "best", "order", "fresh", "local", "online", "today",
    "flowers", "shoes", "pizza", "hotel", "coffee", "laptop", "yoga", "phone",
    "delivery", "deals", "shop", "near", "me", "sale", "service", "plan",
]


def random_ci_texts(rng: np.random.Generator, n: int, max_tokens: int = 4) -> list[str]:
    texts = []
    for _ in range(n):
        k = int(rng.integers(1, max_tokens + 1))
        texts.append(" ".join(rng.choice(WORDS, size=k)))
    return texts


def random_world(
    rng: np.random.Generator, n_cis: int, max_tokens: int = 4
) -> tuple[Vocabulary, CiTrie]:
    """Random vocabulary + trie; duplicates collapse so ci_count <= n_cis."""
    texts = random_ci_texts(rng, n_cis, max_tokens)
    vocab = build_vocab(WORDS)
    trie = build_trie([(t, tokenize(t, vocab)) for t in texts])
    return vocab, trie


def trie_prefixes(trie: CiTrie) -> list[TokenSeq]:
    """Every path in the trie, the empty prefix included."""
    out: list[TokenSeq] = []

    def walk(node: int, prefix: TokenSeq) -> None:
        out.append(prefix)
        for tok in sorted(trie._children[node]):
            walk(trie._children[node][tok], prefix + (tok,))

    walk(0, ())
    return out


def random_table_scorer(
    rng: np.random.Generator,
    vocab: Vocabulary,
    trie: CiTrie,
    contexts: list[str],
    spread: float = 2.0,
) -> TableScorer:
    """Distinct random distribution for every (context, trie prefix)."""
    table = {}
    for prefix in trie_prefixes(trie):
        for ctx in contexts:
            table[(ctx, prefix)] = as_log_distribution(
                rng.standard_normal(vocab.size) * spread
            )
    default = as_log_distribution(rng.standard_normal(vocab.size) * spread)
    return TableScorer(vocab.size, table=table, default=default)


def adversarial_table_scorer(
    rng: np.random.Generator, vocab: Vocabulary, trie: CiTrie, contexts: list[str]
) -> TableScorer:
    """Scorer whose unconstrained argmax is never a legal continuation."""
    table = {}
    for prefix in trie_prefixes(trie):
        allowed = trie.allowed_next(prefix)
        illegal = [t for t in range(vocab.size) if t not in allowed]
        logits = rng.standard_normal(vocab.size)
        logits[illegal[int(rng.integers(len(illegal)))]] = 25.0
        for ctx in contexts:
            table[(ctx, prefix)] = as_log_distribution(logits)
    return TableScorer(vocab.size, table=table)


def enumerate_decode(
    scorer, trie: CiTrie, context: str, params: DecodeParams
) -> list[tuple[int, float]]:
    """Exhaustively score every stored intention and sort like the decoder."""
    out = []
    for ci_id, seq, _ in trie.items():
        if len(seq) > params.max_len:
            continue
        cum = 0.0
        for t, tok in enumerate(seq):
            step = temper(scorer.next_logprobs(context, seq[:t]), params.temperature)
            cum += float(step[tok])
        step = temper(scorer.next_logprobs(context, seq), params.temperature)
        cum += float(step[END_ID])
        score = cum / len(seq) if params.length_normalize else cum
        out.append((ci_id, score))
    out.sort(key=lambda pair: (-pair[1], pair[0]))
    return out[: params.beam_size]


def classic_average_precision(generated: list[str], relevant: set[str]) -> float:
    """Textbook AP: precision at each relevant hit, averaged over |relevant|."""
    hits = 0
    total = 0.0
    for i, ad in enumerate(generated, start=1):
        if ad in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)
