"""Pluggable next-token scorers conditioned on a query or ad context.

A scorer returns a proper log-distribution over the whole vocabulary
(END and UNK included) for every (context, prefix) pair. The reference
implementation is a count-based n-gram model with add-alpha smoothing,
conditioned on a bucket built from the context's token set and backing
off to an unconditional n-gram, then to uniform. Temperature is applied
by the decoder, never here.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Protocol, runtime_checkable

import numpy as np

from .errors import ConfigurationError, InvalidInputError
from .vocab import END_ID, UNK_ID, TokenSeq, Vocabulary

ContextKey = tuple[int, ...]
Gram = tuple[int, ...]

SCORER_FORMAT = "adintent-ngram-counts"
SCORER_FORMAT_VERSION = 1


@runtime_checkable
class Scorer(Protocol):
    """Behavioral contract for next-token log-probability suppliers."""

    vocab_size: int

    def next_logprobs(self, context: str, prefix: TokenSeq) -> np.ndarray:
        """Return log P(token | context, prefix) over all vocabulary ids."""
        ...


def as_log_distribution(logits: np.ndarray) -> np.ndarray:
    """Normalize arbitrary logits into a log-distribution (log-softmax)."""
    v = np.asarray(logits, dtype=np.float64)
    m = v.max()
    out = v - (m + np.log(np.exp(v - m).sum()))
    out.flags.writeable = False
    return out


def _check_distribution(vec: np.ndarray, size: int) -> None:
    if vec.shape != (size,):
        raise ConfigurationError(f"distribution has shape {vec.shape}, expected ({size},)")
    if np.any(vec > 1e-12):
        raise ConfigurationError("log-probabilities must be <= 0")
    if abs(float(np.exp(vec).sum()) - 1.0) > 1e-9:
        raise ConfigurationError("distribution does not exp-sum to 1")


class TableScorer:
    """Explicit (context, prefix) -> distribution map; a deterministic oracle.

    Missing keys fall back to ``default`` (uniform when not given). Stored
    vectors are validated against the scorer contract on construction.
    """

    def __init__(
        self,
        vocab_size: int,
        table: dict[tuple[str, TokenSeq], np.ndarray] | None = None,
        default: np.ndarray | None = None,
    ):
        if vocab_size < 1:
            raise ConfigurationError("vocab_size must be >= 1")
        self.vocab_size = vocab_size
        if default is None:
            default = np.full(vocab_size, -np.log(vocab_size))
        default = np.asarray(default, dtype=np.float64)
        _check_distribution(default, vocab_size)
        default.flags.writeable = False
        self._default = default
        self._table: dict[tuple[str, TokenSeq], np.ndarray] = {}
        for key, vec in (table or {}).items():
            vec = np.asarray(vec, dtype=np.float64)
            _check_distribution(vec, vocab_size)
            vec.flags.writeable = False
            self._table[key] = vec

    def next_logprobs(self, context: str, prefix: TokenSeq) -> np.ndarray:
        return self._table.get((context, tuple(prefix)), self._default)


class NgramScorer:
    """Count-based scorer with add-alpha smoothing and backoff.

    ``order`` is the Markov order: predictions condition on the last
    ``order`` generated tokens, and shorter histories near the sequence
    start stay distinct states (so an order-1 model still tells "first
    token" apart from "after token a"). Contexts are bucketed by their
    sorted unique token-id set, which keeps scoring query-dependent while
    staying trainable from click pairs. Fitted instances are immutable;
    the per-key distribution cache is a benign-race memo shared by
    concurrent readers.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        order: int,
        alpha: float,
        contextual: dict[tuple[ContextKey, Gram], dict[int, int]],
        unconditional: dict[Gram, dict[int, int]],
    ):
        if order < 1:
            raise ConfigurationError("n-gram order must be >= 1")
        if alpha <= 0:
            raise ConfigurationError("smoothing alpha must be > 0")
        self.vocab = vocab
        self.vocab_size = vocab.size
        self.order = order
        self.alpha = alpha
        self.contextual = contextual
        self.unconditional = unconditional
        self._dist_cache: dict[tuple, np.ndarray] = {}
        self._uniform = np.full(self.vocab_size, -np.log(self.vocab_size))
        self._uniform.flags.writeable = False

    def context_key(self, context: str) -> ContextKey:
        return tuple(sorted(set(self.vocab.token_ids(context))))

    def _smoothed(self, cache_key: tuple, counts: dict[int, int]) -> np.ndarray:
        vec = self._dist_cache.get(cache_key)
        if vec is None:
            total = sum(counts.values())
            log_denom = np.log(total + self.alpha * self.vocab_size)
            vec = np.full(self.vocab_size, np.log(self.alpha) - log_denom)
            for tok, c in counts.items():
                vec[tok] = np.log(c + self.alpha) - log_denom
            vec.flags.writeable = False
            self._dist_cache[cache_key] = vec
        return vec

    def _gram(self, prefix: TokenSeq) -> Gram:
        if len(prefix) <= self.order:
            return tuple(prefix)
        return tuple(prefix[-self.order:])

    def next_logprobs(self, context: str, prefix: TokenSeq) -> np.ndarray:
        gram = self._gram(tuple(prefix))
        ctx = self.context_key(context)
        counts = self.contextual.get((ctx, gram))
        if counts is not None:
            return self._smoothed(("c", ctx, gram), counts)
        counts = self.unconditional.get(gram)
        if counts is not None:
            return self._smoothed(("u", gram), counts)
        return self._uniform


def fit_ngram_scorer(
    pairs: Iterable[tuple[str, TokenSeq]],
    order: int,
    smoothing_alpha: float,
    vocab: Vocabulary,
) -> NgramScorer:
    """Fit the count-based scorer on (context, intention sequence) pairs.

    Each sequence implicitly ends with END. With alpha -> 0 the smoothed
    model converges to the maximum-likelihood fit of the per-step
    log-likelihood over the training pairs.
    """
    contextual: dict[tuple[ContextKey, Gram], dict[int, int]] = {}
    unconditional: dict[Gram, dict[int, int]] = {}
    scorer = NgramScorer(vocab, order, smoothing_alpha, contextual, unconditional)
    n_pairs = 0
    for context, seq in pairs:
        n_pairs += 1
        seq = tuple(seq)
        if not seq:
            raise InvalidInputError("training sequence is empty")
        if any(t in (END_ID, UNK_ID) for t in seq):
            raise InvalidInputError(f"training sequence {seq} contains reserved ids")
        if any(not 0 <= t < vocab.size for t in seq):
            raise InvalidInputError(f"training sequence {seq} outside vocabulary")
        ctx = scorer.context_key(context)
        for t, nxt in enumerate(seq + (END_ID,)):
            gram = scorer._gram(seq[:t])
            for table in (
                contextual.setdefault((ctx, gram), {}),
                unconditional.setdefault(gram, {}),
            ):
                table[nxt] = table.get(nxt, 0) + 1
    if n_pairs == 0:
        raise ConfigurationError("no training pairs supplied")
    return scorer


def sequence_logprob(scorer: Scorer, context: str, seq: TokenSeq) -> float:
    """Sum of per-step log-probabilities along *seq*, END term included."""
    seq = tuple(seq)
    if not seq:
        raise InvalidInputError("sequence is empty")
    total = 0.0
    for t, tok in enumerate(seq):
        total += float(scorer.next_logprobs(context, seq[:t])[tok])
    total += float(scorer.next_logprobs(context, seq)[END_ID])
    return total


def save_scorer(scorer: NgramScorer, path: str | Path) -> None:
    """Dump fitted counts as line-delimited JSON (header line first)."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "format": SCORER_FORMAT,
            "version": SCORER_FORMAT_VERSION,
            "order": scorer.order,
            "alpha": scorer.alpha,
            "vocab_size": scorer.vocab_size,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for (ctx, gram), counts in sorted(scorer.contextual.items()):
            rec = {
                "ctx": list(ctx),
                "gram": list(gram),
                "counts": sorted(counts.items()),
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        for gram, counts in sorted(scorer.unconditional.items()):
            rec = {"gram": list(gram), "counts": sorted(counts.items())}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_scorer(path: str | Path, vocab: Vocabulary) -> NgramScorer:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != SCORER_FORMAT:
            raise ConfigurationError(f"{path}: not a scorer count dump")
        if header.get("vocab_size") != vocab.size:
            raise ConfigurationError(
                f"{path}: scorer was fitted on a vocabulary of size "
                f"{header.get('vocab_size')}, got {vocab.size}"
            )
        contextual: dict[tuple[ContextKey, Gram], dict[int, int]] = {}
        unconditional: dict[Gram, dict[int, int]] = {}
        for line in fh:
            rec = json.loads(line)
            counts = {int(tok): int(c) for tok, c in rec["counts"]}
            gram = tuple(rec["gram"])
            if "ctx" in rec:
                contextual[(tuple(rec["ctx"]), gram)] = counts
            else:
                unconditional[gram] = counts
    return NgramScorer(vocab, header["order"], header["alpha"], contextual, unconditional)
