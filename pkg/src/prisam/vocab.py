"""Vocabularies and whitespace-separated (de)tokenization.

A token is a plain ``int`` indexing into a :class:`Vocabulary`. Surfaces are
whole symbols (a compiler flag, a single letter); whitespace is purely a
separator and never part of a surface, so tokenize/detokenize round-trip
exactly.
"""

from __future__ import annotations

import os
from typing import Iterable, Sequence

from .errors import PrisamError


class VocabularyError(PrisamError):
    """Malformed vocabulary definition or file."""


class UnknownSymbol(PrisamError):
    def __init__(self, word: str):
        super().__init__(f"unknown symbol {word!r}")
        self.word = word


class InvalidTokenId(PrisamError):
    def __init__(self, token_id, size: int):
        super().__init__(f"token id {token_id!r} out of range for vocabulary of size {size}")
        self.token_id = token_id


_EOS_HEADER = "eos="


class Vocabulary:
    """Immutable mapping between token ids and surface strings.

    Surfaces are pairwise distinct, non-empty and contain no whitespace.
    Exactly one token is the end-of-sequence marker; by default the last one.
    """

    __slots__ = ("surfaces", "eos_id", "_ids")

    def __init__(self, surfaces: Iterable[str], eos_id: int | None = None):
        surfaces = tuple(surfaces)
        if not surfaces:
            raise VocabularyError("vocabulary needs at least one surface")
        seen = set()
        for s in surfaces:
            if not isinstance(s, str) or not s:
                raise VocabularyError(f"empty or non-string surface: {s!r}")
            if any(c.isspace() for c in s):
                raise VocabularyError(f"surface contains whitespace: {s!r}")
            if s in seen:
                raise VocabularyError(f"duplicate surface: {s!r}")
            seen.add(s)
        if eos_id is None:
            eos_id = len(surfaces) - 1
        if not 0 <= eos_id < len(surfaces):
            raise VocabularyError(f"eos_id {eos_id} out of range")
        self.surfaces = surfaces
        self.eos_id = eos_id
        self._ids = {s: i for i, s in enumerate(surfaces)}

    def __len__(self) -> int:
        return len(self.surfaces)

    def __contains__(self, surface: str) -> bool:
        return surface in self._ids

    def __eq__(self, other) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.surfaces == other.surfaces and self.eos_id == other.eos_id

    def __repr__(self) -> str:
        return f"Vocabulary({len(self.surfaces)} surfaces, eos={self.eos_id})"

    @property
    def eos_surface(self) -> str:
        return self.surfaces[self.eos_id]

    def surface(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.surfaces):
            raise InvalidTokenId(token_id, len(self.surfaces))
        return self.surfaces[token_id]

    def id_of(self, surface: str) -> int:
        try:
            return self._ids[surface]
        except KeyError:
            raise UnknownSymbol(surface) from None

    def non_eos_ids(self) -> tuple[int, ...]:
        return tuple(i for i in range(len(self.surfaces)) if i != self.eos_id)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Vocabulary":
        """Read one surface per line. An optional first line ``eos=<index>``
        overrides the default of using the last line as EOS."""
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        eos_id = None
        if lines and lines[0].startswith(_EOS_HEADER):
            value = lines[0][len(_EOS_HEADER):]
            try:
                eos_id = int(value)
            except ValueError:
                raise VocabularyError(f"bad eos header: {lines[0]!r}") from None
            lines = lines[1:]
        return cls(lines, eos_id=eos_id)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if self.eos_id != len(self.surfaces) - 1:
                fh.write(f"{_EOS_HEADER}{self.eos_id}\n")
            for s in self.surfaces:
                fh.write(s + "\n")


def tokenize(text: str, vocab: Vocabulary) -> list[int]:
    """Split on whitespace and map every word to its token id.

    Raises UnknownSymbol on the first word that is not in the vocabulary.
    """
    return [vocab.id_of(word) for word in text.split()]


def detokenize(tokens: Sequence[int], vocab: Vocabulary) -> str:
    """Join surfaces with single spaces, omitting EOS tokens."""
    parts = []
    for t in tokens:
        s = vocab.surface(t)
        if t != vocab.eos_id:
            parts.append(s)
    return " ".join(parts)
