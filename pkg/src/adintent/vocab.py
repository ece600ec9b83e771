"""Deterministic word-level tokenization of intention texts and queries.

A vocabulary maps surface tokens to dense integer ids. Two ids are reserved
and never carry a surface token: ``END_ID`` terminates decoded sequences and
``UNK_ID`` stands in for out-of-vocabulary words. Real tokens start at id 2
and are assigned in sorted token order, so a vocabulary is a pure function of
its corpus as a multiset.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigurationError, InvalidInputError

END_ID = 0
UNK_ID = 1
END_TOKEN = "<END>"
UNK_TOKEN = "<UNK>"

# Token sequences are plain tuples of ids; END is never stored inside one.
TokenSeq = tuple[int, ...]

_WORD_RE = re.compile(r"\w+", re.UNICODE)

TOKENIZATION_SCHEMES = ("unicode-word", "whitespace")


def split_tokens(text: str, scheme: str = "unicode-word") -> list[str]:
    """Lowercase *text* and split it into surface tokens.

    ``unicode-word`` extracts word-character runs (punctuation dropped);
    ``whitespace`` splits on whitespace and keeps everything else verbatim.
    Returns an empty list when nothing survives normalization.
    """
    if scheme == "unicode-word":
        return _WORD_RE.findall(text.lower())
    if scheme == "whitespace":
        return text.lower().split()
    raise ConfigurationError(f"unknown tokenization scheme {scheme!r}")


@dataclass(frozen=True)
class Vocabulary:
    """Immutable token <-> id bijection with the two reserved ids."""

    token_to_id: dict[str, int]
    id_to_token: tuple[str, ...]
    scheme: str = "unicode-word"
    end_id: int = END_ID
    unk_id: int = UNK_ID

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def token_ids(self, text: str) -> TokenSeq:
        """Lenient lookup: unknown words map to UNK, empty text to ()."""
        return tuple(
            self.token_to_id.get(tok, self.unk_id)
            for tok in split_tokens(text, self.scheme)
        )


def build_vocab(corpus: Iterable[str], scheme: str = "unicode-word") -> Vocabulary:
    """Build a vocabulary from intention texts.

    Ids are assigned in sorted token order after the two reserved slots, so
    the result does not depend on corpus order.
    """
    if scheme not in TOKENIZATION_SCHEMES:
        raise ConfigurationError(f"unknown tokenization scheme {scheme!r}")
    tokens: set[str] = set()
    n_texts = 0
    for text in corpus:
        n_texts += 1
        tokens.update(split_tokens(text, scheme))
    if n_texts == 0:
        raise ConfigurationError("vocabulary corpus is empty")
    if not tokens:
        raise ConfigurationError("corpus contains no tokens after normalization")
    id_to_token = (END_TOKEN, UNK_TOKEN, *sorted(tokens))
    token_to_id = {tok: i for i, tok in enumerate(id_to_token[2:], start=2)}
    return Vocabulary(token_to_id=token_to_id, id_to_token=id_to_token, scheme=scheme)


def tokenize(text: str, vocab: Vocabulary) -> TokenSeq:
    """Map text to token ids; unknown words become UNK_ID.

    Raises InvalidInputError when nothing survives normalization.
    """
    ids = vocab.token_ids(text)
    if not ids:
        raise InvalidInputError(f"text {text!r} is empty after normalization")
    return ids


def detokenize(seq: Sequence[int], vocab: Vocabulary) -> str:
    """Join token ids back into normalized text (single-space separated)."""
    out = []
    for tid in seq:
        if tid in (vocab.end_id, vocab.unk_id):
            raise InvalidInputError(f"reserved id {tid} cannot be detokenized")
        if not 0 <= tid < vocab.size:
            raise InvalidInputError(f"token id {tid} outside vocabulary")
        out.append(vocab.id_to_token[tid])
    return " ".join(out)


def save_vocab(vocab: Vocabulary, path: str | Path) -> None:
    """Write one token per line; line number equals id, reserved ids first."""
    with open(path, "w", encoding="utf-8") as fh:
        for tok in vocab.id_to_token:
            fh.write(tok + "\n")


def load_vocab(path: str | Path, scheme: str = "unicode-word") -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if len(lines) < 2 or lines[0] != END_TOKEN or lines[1] != UNK_TOKEN:
        raise ConfigurationError(
            f"{path}: vocabulary file must start with {END_TOKEN} and {UNK_TOKEN}"
        )
    id_to_token = tuple(lines)
    token_to_id = {tok: i for i, tok in enumerate(id_to_token[2:], start=2)}
    if len(token_to_id) != len(id_to_token) - 2:
        raise ConfigurationError(f"{path}: duplicate tokens in vocabulary file")
    return Vocabulary(token_to_id=token_to_id, id_to_token=id_to_token, scheme=scheme)
