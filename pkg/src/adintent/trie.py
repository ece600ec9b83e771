"""Prefix trie over the tokenized intention set.

The trie is the sole authority on which token continuations are legal
during constrained decoding and on intention membership. It is immutable
after build; refreshing the set means building a new trie and swapping
snapshots atomically.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import ConfigurationError, InvalidInputError, InvalidPrefixError
from .vocab import END_ID, UNK_ID, TokenSeq, Vocabulary, detokenize, tokenize

NO_CI = -1


class CiTrie:
    """Immutable token-id trie; terminal nodes carry a dense intention id."""

    def __init__(self, cis: list[tuple[str, TokenSeq]], explicit_ids: list[int] | None = None):
        """Build from (text, token sequence) pairs.

        Sequences that tokenize identically collapse to one intention; the
        surviving raw texts are recorded in ``aliases``. Ids are assigned in
        lexicographic token-sequence order unless ``explicit_ids`` pins them.
        """
        if not cis:
            raise ConfigurationError("intention set is empty")
        seq_to_texts: dict[TokenSeq, set[str]] = {}
        seq_to_id: dict[TokenSeq, int] = {}
        for i, (text, seq) in enumerate(cis):
            seq = tuple(seq)
            if not seq:
                raise InvalidInputError(f"intention {text!r} has an empty token sequence")
            if any(t in (END_ID, UNK_ID) for t in seq):
                raise InvalidInputError(f"intention {text!r} contains reserved token ids")
            seq_to_texts.setdefault(seq, set()).add(text)
            if explicit_ids is not None:
                given = explicit_ids[i]
                if seq in seq_to_id and seq_to_id[seq] != given:
                    raise ConfigurationError(
                        f"intention {text!r} maps to conflicting ids "
                        f"{seq_to_id[seq]} and {given}"
                    )
                seq_to_id[seq] = given

        ordered = sorted(seq_to_texts)
        if explicit_ids is not None:
            ids = sorted(seq_to_id.values())
            if ids != list(range(len(ordered))):
                raise ConfigurationError(
                    "explicit intention ids must be dense in [0, n) and unique"
                )
        else:
            seq_to_id = {seq: i for i, seq in enumerate(ordered)}

        n = len(ordered)
        self.ci_count = n
        self._seqs: list[TokenSeq] = [()] * n
        self._texts: list[str] = [""] * n
        self.aliases: dict[str, tuple[str, ...]] = {}
        self.max_depth = 0

        self._children: list[dict[int, int]] = [{}]
        self._terminal: list[int] = [NO_CI]
        # Shortest complete intention reachable through each node; lets the
        # decoder skip subtrees that cannot finish within the length budget.
        self._min_len: list[int] = [0]
        self._expansion_cache: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

        for seq in ordered:
            ci_id = seq_to_id[seq]
            texts = sorted(seq_to_texts[seq])
            canonical = texts[0]
            self._seqs[ci_id] = seq
            self._texts[ci_id] = canonical
            if len(texts) > 1:
                self.aliases[canonical] = tuple(texts)
            self.max_depth = max(self.max_depth, len(seq))
            self._insert(seq, ci_id)

        self._min_len[0] = min(len(s) for s in ordered)
        self.version = self._fingerprint()

    def _insert(self, seq: TokenSeq, ci_id: int) -> None:
        node = 0
        for depth, tok in enumerate(seq, start=1):
            nxt = self._children[node].get(tok)
            if nxt is None:
                nxt = len(self._children)
                self._children[node][tok] = nxt
                self._children.append({})
                self._terminal.append(NO_CI)
                self._min_len.append(len(seq))
            else:
                self._min_len[nxt] = min(self._min_len[nxt], len(seq))
            node = nxt
        self._terminal[node] = ci_id

    def _fingerprint(self) -> str:
        h = hashlib.sha256()
        for ci_id in range(self.ci_count):
            h.update(f"{ci_id}\t{self._texts[ci_id]}\n".encode("utf-8"))
        return h.hexdigest()[:16]

    # -- navigation ---------------------------------------------------------

    def _walk(self, prefix: TokenSeq) -> int | None:
        node = 0
        for tok in prefix:
            node = self._children[node].get(tok)
            if node is None:
                return None
        return node

    def allowed_next(self, prefix: TokenSeq) -> set[int]:
        """Legal continuations of *prefix*: child tokens, plus END if terminal."""
        node = self._walk(tuple(prefix))
        if node is None:
            raise InvalidPrefixError(f"prefix {tuple(prefix)} is not a path in the trie")
        allowed = set(self._children[node])
        if self._terminal[node] != NO_CI:
            allowed.add(END_ID)
        return allowed

    def resolve(self, seq: TokenSeq) -> int | None:
        """Intention id for *seq*, or None when it is not a stored intention."""
        node = self._walk(tuple(seq))
        if node is None or self._terminal[node] == NO_CI:
            return None
        return self._terminal[node]

    def contains(self, seq: TokenSeq) -> bool:
        return self.resolve(seq) is not None

    def ci_text(self, ci_id: int) -> str:
        return self._texts[ci_id]

    def ci_seq(self, ci_id: int) -> TokenSeq:
        return self._seqs[ci_id]

    def items(self) -> Iterator[tuple[int, TokenSeq, str]]:
        for ci_id in range(self.ci_count):
            yield ci_id, self._seqs[ci_id], self._texts[ci_id]

    # -- decoder internals --------------------------------------------------

    def node_expansion(self, node: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Child (token ids, node ids, subtree min lengths), token-sorted.

        Arrays are built lazily and memoized; a duplicated build under
        concurrent first access is benign.
        """
        cached = self._expansion_cache.get(node)
        if cached is None:
            pairs = sorted(self._children[node].items())
            toks = np.array([t for t, _ in pairs], dtype=np.int64)
            childs = np.array([c for _, c in pairs], dtype=np.int64)
            min_lens = np.array([self._min_len[c] for _, c in pairs], dtype=np.int64)
            cached = (toks, childs, min_lens)
            self._expansion_cache[node] = cached
        return cached

    def node_terminal(self, node: int) -> int:
        return self._terminal[node]

    def node_min_len(self, node: int) -> int:
        return self._min_len[node]


def build_trie(cis: Iterable[tuple[str, TokenSeq]]) -> CiTrie:
    """Build an immutable trie; ids assigned lexicographically by token ids."""
    return CiTrie(list(cis))


def load_ci_set(
    path: str | Path,
    vocab: Vocabulary,
    min_support: int = 1,
) -> CiTrie:
    """Load a line-delimited intention set and build its trie.

    Records are ``{"ci_id": <int, optional>, "text": <str>}``. When any
    record carries an explicit id, all must, and the ids are honored;
    otherwise assignment follows the lexicographic rule. ``min_support``
    drops intentions whose token sequence occurs on fewer input lines.
    """
    entries: list[tuple[str, str, TokenSeq]] = []  # (raw, normalized, seq)
    ids: list[int] = []
    with_ids = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            seq = tokenize(rec["text"], vocab)
            entries.append((rec["text"], detokenize(seq, vocab), seq))
            if "ci_id" in rec and rec["ci_id"] is not None:
                with_ids += 1
                ids.append(int(rec["ci_id"]))
    if not entries:
        raise ConfigurationError(f"{path}: intention set file is empty")
    if with_ids and with_ids != len(entries):
        raise ConfigurationError(f"{path}: either all records carry ci_id or none")
    if min_support > 1:
        if with_ids:
            raise ConfigurationError("min_support filtering requires unassigned ids")
        support: dict[TokenSeq, int] = {}
        for _, _, seq in entries:
            support[seq] = support.get(seq, 0) + 1
        entries = [e for e in entries if support[e[2]] >= min_support]
        if not entries:
            raise ConfigurationError(f"no intention meets min_support={min_support}")
    trie = CiTrie(
        [(norm, seq) for _, norm, seq in entries],
        explicit_ids=ids if with_ids else None,
    )
    # Raw inputs that collapsed onto one normalized intention are kept as an
    # alias table so the count change versus the raw input stays auditable.
    raw_variants: dict[str, set[str]] = {}
    for raw, norm, _ in entries:
        raw_variants.setdefault(norm, set()).add(raw)
    trie.aliases = {
        norm: tuple(sorted(raws))
        for norm, raws in raw_variants.items()
        if len(raws) > 1 or next(iter(raws)) != norm
    }
    return trie


def save_ci_set(trie: CiTrie, path: str | Path) -> None:
    """Write the canonical intention set with assigned ids."""
    with open(path, "w", encoding="utf-8") as fh:
        for ci_id, _, text in trie.items():
            fh.write(json.dumps({"ci_id": ci_id, "text": text}, sort_keys=True) + "\n")
