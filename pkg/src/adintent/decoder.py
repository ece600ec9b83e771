"""Trie-constrained top-b decoding with temperature and per-step truncation.

The search explores hypotheses best-first: because every tempered per-step
log-probability is <= 0, cumulative scores can only fall along a path, so
hypotheses pop off the frontier in globally non-increasing score order and
the first b completed intentions are exactly the top b by tempered sequence
log-probability. This gives the same full-width result as per-depth beam
pruning while also guaranteeing that growing the beam only ever extends the
returned set. Boundary ties are explored exhaustively so that the id
tie-break is exact.

Decoding is a pure function of (scorer, trie, context, params); any number
of decodes may run concurrently over shared immutable snapshots.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DecodeError
from .scorer import Scorer
from .trie import CiTrie
from .vocab import END_ID, TokenSeq


@dataclass(frozen=True)
class DecodeParams:
    """Decoder settings; ``truncation_margin=None`` disables truncation."""

    beam_size: int = 50
    max_len: int = 4
    temperature: float = 0.7
    truncation_margin: float | None = 2.0
    length_normalize: bool = False

    def __post_init__(self):
        if self.beam_size < 1:
            raise ConfigurationError("beam_size must be >= 1")
        if self.max_len < 1:
            raise ConfigurationError("max_len must be >= 1")
        if self.temperature <= 0:
            raise ConfigurationError("temperature must be > 0")
        if self.truncation_margin is not None and self.truncation_margin < 0:
            raise ConfigurationError("truncation_margin must be >= 0")


# Settings mirroring the production profiles: a wide, slower decode for the
# offline cache warmer and a tight one for live traffic.
OFFLINE_PROFILE = DecodeParams(
    beam_size=256, max_len=6, temperature=0.8, truncation_margin=2.0
)
ONLINE_PROFILE = DecodeParams(
    beam_size=50, max_len=4, temperature=0.7, truncation_margin=2.0
)


@dataclass(frozen=True)
class Hypothesis:
    """A decoded path: token prefix plus its accumulated tempered score.

    ``finished`` means END was consumed at a terminal node, in which case
    ``ci_id`` is the intention the prefix resolves to.
    """

    prefix: TokenSeq
    cum_logprob: float
    finished: bool = False
    ci_id: int | None = None


def temper(logprobs: np.ndarray, temperature: float) -> np.ndarray:
    """Divide log-probabilities by *temperature* and renormalize.

    Preserves the per-step argmax for every positive temperature.
    """
    if temperature <= 0:
        raise ConfigurationError("temperature must be > 0")
    v = np.asarray(logprobs, dtype=np.float64) / temperature
    m = v.max()
    return v - (m + math.log(float(np.exp(v - m).sum())))


def apply_truncation(
    step_candidates: list[tuple[int, float]], margin: float | None
) -> list[tuple[int, float]]:
    """Drop candidates scoring more than *margin* below the step's best.

    The per-step argmax always survives; ``margin=None`` (or infinity) is
    the identity.
    """
    if not step_candidates:
        raise ConfigurationError("no step candidates to truncate")
    if margin is None or math.isinf(margin):
        return list(step_candidates)
    bound = max(lp for _, lp in step_candidates) - margin
    return [(tok, lp) for tok, lp in step_candidates if lp >= bound]


def decode_hypotheses(
    scorer: Scorer,
    trie: CiTrie,
    context: str,
    params: DecodeParams,
    deadline: float | None = None,
) -> list[Hypothesis]:
    """Best-first constrained search; returns finished hypotheses.

    Hypotheses come back in emission order (non-increasing cumulative
    score); final ranking and the beam cut happen in
    ``constrained_beam_search``. ``deadline`` is an optional
    ``time.monotonic()`` cutoff; on expiry the hypotheses finished so far
    are returned (used only when latency enforcement is switched on).
    """
    if trie.ci_count < 1:
        raise ConfigurationError("cannot decode against an empty trie")
    b = params.beam_size
    max_len = params.max_len
    tau = params.temperature
    margin = params.truncation_margin
    if margin is not None and math.isinf(margin):
        margin = None

    # Heap entries: (-score, insertion order, finished, ci_id, node, prefix).
    # The counter makes pop order total and therefore deterministic.
    heap: list[tuple[float, int, bool, int, int, TokenSeq]] = []
    counter = 0
    finished: list[Hypothesis] = []

    if trie.node_min_len(0) <= max_len:
        heap.append((0.0, counter, False, -1, 0, ()))
        counter += 1

    while heap:
        if len(finished) >= b and -heap[0][0] < finished[b - 1].cum_logprob:
            break
        if deadline is not None and time.monotonic() > deadline:
            break
        neg_score, _, is_finished, ci_id, node, prefix = heapq.heappop(heap)
        if is_finished:
            finished.append(
                Hypothesis(prefix=prefix, cum_logprob=-neg_score, finished=True,
                           ci_id=ci_id)
            )
            continue

        try:
            step = temper(scorer.next_logprobs(context, prefix), tau)
        except Exception as exc:
            raise DecodeError(
                f"scorer failed for context {context!r} at prefix {prefix}: {exc}"
            ) from exc
        cum = -neg_score

        toks, childs, min_lens = trie.node_expansion(node)
        terminal = trie.node_terminal(node)
        depth = len(prefix)
        if depth < max_len and toks.size:
            viable = min_lens <= max_len
            toks, childs = toks[viable], childs[viable]
        else:
            toks = childs = toks[:0]

        lps = step[toks]
        best = lps.max() if lps.size else -math.inf
        end_lp = None
        if terminal != -1:
            end_lp = float(step[END_ID])
            best = max(best, end_lp)
        if margin is not None:
            bound = best - margin
        else:
            bound = -math.inf

        if end_lp is not None and end_lp >= bound:
            heapq.heappush(heap, (-(cum + end_lp), counter, True, terminal, node, prefix))
            counter += 1
        if toks.size:
            keep = lps >= bound if margin is not None else slice(None)
            for tok, child, lp in zip(toks[keep], childs[keep], lps[keep]):
                heapq.heappush(
                    heap,
                    (-(cum + float(lp)), counter, False, -1, int(child), prefix + (int(tok),)),
                )
                counter += 1
    return finished


def constrained_beam_search(
    scorer: Scorer,
    trie: CiTrie,
    context: str,
    params: DecodeParams,
    deadline: float | None = None,
) -> list[tuple[int, float]]:
    """Decode the top-b intentions for *context*, constrained to the trie.

    Returns (intention id, score) pairs sorted by score descending, ties by
    id ascending. Scores are tempered cumulative log-probabilities, divided
    by token length when ``params.length_normalize`` is set (candidate
    selection still uses the cumulative score). Intentions longer than
    ``params.max_len`` tokens are unreachable.
    """
    hyps = decode_hypotheses(scorer, trie, context, params, deadline=deadline)
    if params.length_normalize:
        scored = [(h.cum_logprob / len(h.prefix), h.ci_id) for h in hyps]
    else:
        scored = [(h.cum_logprob, h.ci_id) for h in hyps]
    scored.sort(key=lambda item: (-item[0], item[1]))
    return [(ci, score) for score, ci in scored[: params.beam_size]]
