"""Shared test utilities: deterministic random fixtures and a call-counting
model wrapper used by the inference-accounting properties."""

from __future__ import annotations

import string

from prisam import TableModel, Vocabulary
from prisam.rng import RngStream


def random_table_model(seed: int, size: int = 3, max_length: int = 4,
                       vocab: Vocabulary | None = None) -> TableModel:
    """Fully random table model: every reachable prefix gets its own
    strictly positive distribution, so ties are rare but possible through
    rounding. Deterministic in the seed. A supplied vocab must keep EOS as
    its last token."""
    rng = RngStream(seed)
    if vocab is None:
        letters = list(string.ascii_uppercase[: size - 1])
        vocab = Vocabulary(letters + ["<eos>"])
    else:
        assert vocab.eos_id == len(vocab) - 1
        size = len(vocab)
    table = {}

    def fill(prefix):
        if len(prefix) >= max_length - 1:
            return
        draws = [rng.uniform() + 1e-3 for _ in range(size)]
        total = sum(draws)
        table[prefix] = [d / total for d in draws]
        for t in range(size - 1):
            fill(prefix + (t,))

    fill(())
    return TableModel(vocab, max_length, table)


def peaked_table_model(seed: int, size: int = 3, max_length: int = 4, sharpness: float = 8.0) -> TableModel:
    """Like random_table_model but with one dominant token per position."""
    rng = RngStream(seed)
    letters = list(string.ascii_uppercase[: size - 1])
    vocab = Vocabulary(letters + ["<eos>"])
    table = {}

    def fill(prefix):
        if len(prefix) >= max_length - 1:
            return
        draws = [rng.uniform() + 1e-3 for _ in range(size)]
        draws[rng.randint(size)] *= sharpness
        total = sum(draws)
        table[prefix] = [d / total for d in draws]
        for t in range(size - 1):
            fill(prefix + (t,))

    fill(())
    return TableModel(vocab, max_length, table)


class CountingModel:
    """Wraps a model and records every prefix it is asked about."""

    def __init__(self, inner):
        self.inner = inner
        self.calls: list[tuple[int, ...]] = []

    @property
    def vocab(self):
        return self.inner.vocab

    @property
    def max_length(self):
        return self.inner.max_length

    def next_distribution(self, prefix):
        self.calls.append(tuple(prefix))
        return self.inner.next_distribution(prefix)


def assert_matches_reference(model, config) -> None:
    """Fast sampler and reference transcription must agree exactly."""
    from prisam import priority_sample
    from prisam.oracle import reference_priority_sample

    fast = priority_sample(model, config)
    slow = reference_priority_sample(model, config)
    assert [r.tokens for r in fast] == [r.tokens for r in slow]
    assert [r.branch_score for r in fast] == [r.branch_score for r in slow]
    assert [r.order for r in fast] == [r.order for r in slow]
    assert [r.new_inferences for r in fast] == [r.new_inferences for r in slow]
    assert fast.exhausted == slow.exhausted


def random_regex(rng: RngStream, alphabet: str, depth: int = 3) -> str:
    """Random pattern using only syntax shared with the stdlib dialect, so
    outputs can be cross-checked with re.fullmatch."""
    kind = rng.randint(8 if depth > 0 else 3)
    if kind == 0:
        return alphabet[rng.randint(len(alphabet))]
    if kind == 1:  # short literal run
        return "".join(alphabet[rng.randint(len(alphabet))] for _ in range(1 + rng.randint(2)))
    if kind == 2:  # character class, sometimes negated
        k = 1 + rng.randint(min(3, len(alphabet)))
        chars = sorted({alphabet[rng.randint(len(alphabet))] for _ in range(k)})
        neg = "^" if rng.randint(4) == 0 and len(chars) < len(alphabet) else ""
        return f"[{neg}{''.join(chars)}]"
    if kind == 3:
        return "."
    if kind == 4:
        return f"({random_regex(rng, alphabet, depth - 1)}|{random_regex(rng, alphabet, depth - 1)})"
    if kind == 5:
        op = "*+?"[rng.randint(3)]
        return f"({random_regex(rng, alphabet, depth - 1)}){op}"
    return random_regex(rng, alphabet, depth - 1) + random_regex(rng, alphabet, depth - 1)


def random_small_vocab(rng: RngStream, alphabet: str, count: int = 3) -> Vocabulary:
    """Distinct 1-2 character surfaces over the alphabet, EOS last."""
    surfaces: list[str] = []
    guard = 0
    while len(surfaces) < count and guard < 200:
        guard += 1
        n = 1 + rng.randint(2)
        s = "".join(alphabet[rng.randint(len(alphabet))] for _ in range(n))
        if s not in surfaces:
            surfaces.append(s)
    return Vocabulary(surfaces + ["<eos>"])
