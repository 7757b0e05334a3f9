"""Next-token sequence models.

A model maps a prefix of token ids to a probability vector over the whole
vocabulary (probabilities, not logits). Models are deterministic: the same
prefix always yields the same vector. Termination is enforced centrally so
no model can run past its length budget: once a prefix holds
``max_length - 1`` tokens the distribution is a point mass on EOS.

Two desk-scale backends are provided. :class:`TableModel` serves hand-built
fixtures from an explicit prefix table. :class:`NGramModel` is an order-n
model with additive smoothing, trained from a corpus of EOS-terminated
token sequences.
"""

from __future__ import annotations

import os
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import PrisamError
from .vocab import Vocabulary, tokenize

SUM_TOLERANCE = 1e-9


class ModelError(PrisamError):
    """Bad model definition or training input."""


class PrefixTooLong(PrisamError):
    def __init__(self, length: int, max_length: int):
        super().__init__(f"prefix of length {length} not below max_length {max_length}")


class PrefixContainsEos(PrisamError):
    def __init__(self):
        super().__init__("prefix contains the EOS token")


class EmptyCorpus(ModelError):
    pass


class BadOrder(ModelError):
    pass


def _frozen(vec: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(vec, dtype=np.float64)
    arr.flags.writeable = False
    return arr


def _check_distribution(vec: np.ndarray, size: int, where: str) -> np.ndarray:
    arr = np.ascontiguousarray(vec, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != size:
        raise ModelError(f"{where}: expected a vector of length {size}")
    if np.any(arr < 0.0) or not np.all(np.isfinite(arr)):
        raise ModelError(f"{where}: probabilities must be finite and non-negative")
    if abs(float(arr.sum()) - 1.0) > SUM_TOLERANCE:
        raise ModelError(f"{where}: probabilities sum to {float(arr.sum())!r}, not 1")
    return _frozen(arr)


class SequenceModel:
    """Deterministic next-token distribution over a fixed vocabulary.

    Subclasses implement :meth:`_distribution` for prefixes strictly shorter
    than ``max_length - 1``. The public entry point validates the prefix and
    applies forced termination, so every subclass inherits the guarantees:

    * vectors have length ``len(vocab)``, entries in [0, 1], sum within
      1e-9 of 1, and are read-only;
    * a prefix of length ``max_length - 1`` gets the one-hot EOS vector;
    * longer prefixes, or prefixes already containing EOS, are errors.
    """

    def __init__(self, vocab: Vocabulary, max_length: int):
        if max_length < 1:
            raise ModelError(f"max_length must be >= 1, got {max_length}")
        self.vocab = vocab
        self.max_length = max_length
        forced = np.zeros(len(vocab), dtype=np.float64)
        forced[vocab.eos_id] = 1.0
        self._forced_eos = _frozen(forced)

    def next_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        prefix = tuple(prefix)
        if len(prefix) >= self.max_length:
            raise PrefixTooLong(len(prefix), self.max_length)
        if self.vocab.eos_id in prefix:
            raise PrefixContainsEos()
        if len(prefix) == self.max_length - 1:
            return self._forced_eos
        return self._distribution(prefix)

    def _distribution(self, prefix: tuple[int, ...]) -> np.ndarray:
        raise NotImplementedError


class TableModel(SequenceModel):
    """Model backed by an explicit prefix -> probability-vector table.

    Unlisted prefixes fall back to the default vector, so tiny fixtures
    stay tiny. Every vector is validated once at construction.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        max_length: int,
        table: Mapping[tuple[int, ...], Sequence[float]],
        default: Sequence[float] | None = None,
    ):
        super().__init__(vocab, max_length)
        size = len(vocab)
        self.table = {
            tuple(prefix): _check_distribution(vec, size, f"table[{tuple(prefix)}]")
            for prefix, vec in table.items()
        }
        if default is None:
            default = np.full(size, 1.0 / size)
        self.default = _check_distribution(default, size, "default")

    def _distribution(self, prefix: tuple[int, ...]) -> np.ndarray:
        return self.table.get(prefix, self.default)


class NGramModel(SequenceModel):
    """Additively smoothed n-gram model.

    The context for a prediction is the last ``order - 1`` tokens of the
    prefix (fewer near the start of a sequence). Each context maps to

        P(token | context) = (count + alpha) / (total + alpha * V)

    where ``total`` sums the context's counts over the vocabulary. Unseen
    contexts therefore yield the uniform vector. With ``alpha > 0`` every
    probability is strictly positive.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        max_length: int,
        order: int,
        alpha: float,
        counts: Mapping[tuple[int, ...], Mapping[int, int]],
    ):
        super().__init__(vocab, max_length)
        if order < 1:
            raise BadOrder(f"order must be >= 1, got {order}")
        if not alpha > 0.0:
            raise BadOrder(f"alpha must be > 0, got {alpha}")
        self.order = order
        self.alpha = float(alpha)
        size = len(vocab)
        self.counts: dict[tuple[int, ...], dict[int, int]] = {}
        self._vectors: dict[tuple[int, ...], np.ndarray] = {}
        for context, row in counts.items():
            context = tuple(context)
            if len(context) > order - 1:
                raise BadOrder(f"context {context} longer than order - 1 = {order - 1}")
            row = {int(t): int(c) for t, c in row.items()}
            for t, c in row.items():
                if not 0 <= t < size:
                    raise ModelError(f"count for token {t} outside vocabulary")
                if c < 0:
                    raise ModelError(f"negative count for token {t}")
            self.counts[context] = row
            vec = np.full(size, self.alpha, dtype=np.float64)
            for t, c in row.items():
                vec[t] += c
            self._vectors[context] = _frozen(vec / vec.sum())
        self._uniform = _frozen(np.full(size, 1.0 / size))

    def context_of(self, prefix: Sequence[int]) -> tuple[int, ...]:
        if self.order == 1:
            return ()
        return tuple(prefix[-(self.order - 1):])

    def _distribution(self, prefix: tuple[int, ...]) -> np.ndarray:
        return self._vectors.get(self.context_of(prefix), self._uniform)


def train_ngram(
    corpus: Iterable[Sequence[int]],
    order: int,
    alpha: float,
    vocab: Vocabulary,
    max_length: int,
) -> NGramModel:
    """Count n-gram transitions in a corpus of EOS-terminated sequences.

    Each sequence must end with EOS and contain EOS nowhere else. The
    transition into EOS is counted like any other, so trained models know
    where sequences tend to stop.
    """
    if order < 1:
        raise BadOrder(f"order must be >= 1, got {order}")
    if not alpha > 0.0:
        raise BadOrder(f"alpha must be > 0, got {alpha}")
    counts: dict[tuple[int, ...], dict[int, int]] = {}
    n_seqs = 0
    for seq in corpus:
        seq = list(seq)
        n_seqs += 1
        if not seq or seq[-1] != vocab.eos_id:
            raise ModelError("corpus sequence does not end with EOS")
        if vocab.eos_id in seq[:-1]:
            raise ModelError("corpus sequence contains EOS before the end")
        for i, token in enumerate(seq):
            context = tuple(seq[max(0, i - (order - 1)):i]) if order > 1 else ()
            row = counts.setdefault(context, {})
            row[token] = row.get(token, 0) + 1
    if n_seqs == 0:
        raise EmptyCorpus("no sequences to train on")
    return NGramModel(vocab, max_length, order, alpha, counts)


# ---------------------------------------------------------------------------
# file formats

_NGRAM_MAGIC = "ngram"


def save_ngram(model: NGramModel, path: str | os.PathLike) -> None:
    """Write counts as TSV: a header line, then context/token/count rows.

    Contexts are space-joined surfaces (empty string for the empty context),
    so the file stays human-readable at desk scale.
    """
    vocab = model.vocab
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"{_NGRAM_MAGIC}\torder={model.order}\talpha={model.alpha!r}"
            f"\tvocab={' '.join(vocab.surfaces)}\teos={vocab.eos_id}\n"
        )
        for context in sorted(model.counts):
            row = model.counts[context]
            ctx = " ".join(vocab.surfaces[t] for t in context)
            for token in sorted(row):
                fh.write(f"{ctx}\t{vocab.surfaces[token]}\t{row[token]}\n")


def load_ngram(path: str | os.PathLike, max_length: int) -> NGramModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ModelError(f"{path}: empty model file")
    fields = lines[0].split("\t")
    if not fields or fields[0] != _NGRAM_MAGIC:
        raise ModelError(f"{path}: not an ngram model file")
    header = {}
    for field in fields[1:]:
        key, _, value = field.partition("=")
        header[key] = value
    try:
        order = int(header["order"])
        alpha = float(header["alpha"])
        vocab = Vocabulary(header["vocab"].split(" "), eos_id=int(header["eos"]))
    except (KeyError, ValueError) as exc:
        raise ModelError(f"{path}: bad header: {exc}") from None
    counts: dict[tuple[int, ...], dict[int, int]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ModelError(f"{path}:{lineno}: expected context<TAB>token<TAB>count")
        ctx_text, token_text, count_text = parts
        try:
            context = tuple(tokenize(ctx_text, vocab))
            token = vocab.id_of(token_text)
            count = int(count_text)
        except PrisamError:
            raise
        except ValueError:
            raise ModelError(f"{path}:{lineno}: bad count {count_text!r}") from None
        counts.setdefault(context, {})[token] = count
    return NGramModel(vocab, max_length, order, alpha, counts)


def load_corpus(path: str | os.PathLike, vocab: Vocabulary) -> list[list[int]]:
    """Read one whitespace-separated sequence per line, appending EOS to
    each. Blank lines are skipped."""
    sequences = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            words = line.split()
            if not words:
                continue
            sequences.append([vocab.id_of(w) for w in words] + [vocab.eos_id])
    return sequences


def save_corpus(sequences: Iterable[Sequence[int]], path: str | os.PathLike, vocab: Vocabulary) -> None:
    """One sequence per line as surfaces, EOS omitted."""
    with open(path, "w", encoding="utf-8") as fh:
        for seq in sequences:
            fh.write(" ".join(vocab.surfaces[t] for t in seq if t != vocab.eos_id) + "\n")
