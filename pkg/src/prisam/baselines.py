"""Baseline decoders the priority sampler is compared against.

All of them honor the same guide masks and length budget as the core
sampler so comparisons are apples to apples. Stochastic baselines draw
from an explicit seeded stream; duplicates across samples are permitted
and expected.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import _kernels
from .guide import Guide
from .models import SequenceModel
from .rng import RngStream
from .sampler import (
    NoAllowedToken,
    SampleRecord,
    SampleSet,
    SamplerError,
    choose_best_tokens,
)
from .vocab import Vocabulary

GREEDY_TEMPERATURE = 1e-6  # below this, temperature draws route to greedy


@dataclass(frozen=True)
class NucleusConfig:
    top_p: float = 0.95
    temperature: float = 1.0
    seed: int = 0
    num_samples: int = 1

    def __post_init__(self):
        if not 0.0 < self.top_p <= 1.0:
            raise SamplerError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.temperature < 0.0:
            raise SamplerError(f"temperature must be >= 0, got {self.temperature}")
        if self.num_samples < 1:
            raise SamplerError(f"num_samples must be >= 1, got {self.num_samples}")


def _walk(model: SequenceModel, guide: Guide | None, pick) -> tuple[list[int], int]:
    """Shared decode loop: ``pick(dist, state, remaining)`` chooses a token."""
    eos = model.vocab.eos_id
    tokens: list[int] = []
    state = guide.index.start if guide is not None else -1
    calls = 0
    while True:
        dist = model.next_distribution(tokens)
        calls += 1
        token = pick(dist, state, model.max_length - len(tokens))
        tokens.append(token)
        if token == eos:
            return tokens, calls
        if guide is not None:
            state = guide.index.step(state, token)


def greedy_decode(model: SequenceModel, guide: Guide | None = None) -> SampleRecord:
    """Deterministic argmax decode; ties go to the lowest token id.

    Identical, token for token, to the first record of the priority
    sampler under the same guide.
    """

    def pick(dist, state, remaining):
        best = choose_best_tokens(dist, 1, guide=guide, state=state if guide else None,
                                  remaining=remaining if guide else None)
        return best[0][1]

    tokens, calls = _walk(model, guide, pick)
    return SampleRecord(tuple(tokens), 1.0, 0, calls, regex_valid=True)


def _mask_for(guide: Guide | None, state: int, remaining: int):
    if guide is None:
        return None
    mask = guide.index.mask_for(state, remaining)
    if not mask.any():
        raise NoAllowedToken(f"guide state {state} allows nothing within the budget")
    return mask


def nucleus_sample(
    model: SequenceModel,
    config: NucleusConfig,
    guide: Guide | None = None,
) -> SampleSet:
    """Temperature plus top-p sampling, ``num_samples`` independent decodes.

    Each step tempers the allowed probabilities with exponent 1/temperature,
    renormalizes, keeps the smallest high-probability set reaching
    ``top_p``, and draws from it. Temperatures below 1e-6 short-circuit to
    the greedy decode (no randomness, no draws consumed).
    """
    if config.temperature < GREEDY_TEMPERATURE:
        base = greedy_decode(model, guide)
        records = [
            SampleRecord(base.tokens, base.branch_score, i, base.new_inferences, base.regex_valid)
            for i in range(config.num_samples)
        ]
        return SampleSet(records, exhausted=False)

    rng = RngStream(config.seed)
    inv_tau = 1.0 / config.temperature

    def pick(dist, state, remaining):
        mask = _mask_for(guide, state, remaining)
        token = _kernels.nucleus_pick(dist, mask, inv_tau, config.top_p, rng.uniform())
        if token < 0:
            raise NoAllowedToken("all allowed tokens have zero probability")
        return token

    records = []
    for i in range(config.num_samples):
        tokens, calls = _walk(model, guide, pick)
        records.append(SampleRecord(tuple(tokens), 1.0, i, calls, regex_valid=True))
    return SampleSet(records, exhausted=False)


def topk_sample(
    model: SequenceModel,
    k: int,
    temperature: float = 1.0,
    seed: int = 0,
    num_samples: int = 1,
    guide: Guide | None = None,
) -> SampleSet:
    """Top-k sampling: cut to the k most probable allowed tokens by raw
    probability, then temper, renormalize and draw."""
    if k < 1:
        raise SamplerError(f"k must be >= 1, got {k}")
    if temperature < 0.0:
        raise SamplerError(f"temperature must be >= 0, got {temperature}")
    if num_samples < 1:
        raise SamplerError(f"num_samples must be >= 1, got {num_samples}")
    if temperature < GREEDY_TEMPERATURE:
        base = greedy_decode(model, guide)
        records = [
            SampleRecord(base.tokens, base.branch_score, i, base.new_inferences, base.regex_valid)
            for i in range(num_samples)
        ]
        return SampleSet(records, exhausted=False)

    rng = RngStream(seed)
    inv_tau = 1.0 / temperature

    def pick(dist, state, remaining):
        mask = _mask_for(guide, state, remaining)
        token = _kernels.topk_pick(dist, mask, k, inv_tau, rng.uniform())
        if token < 0:
            raise NoAllowedToken("all allowed tokens have zero probability")
        return token

    records = []
    for i in range(num_samples):
        tokens, calls = _walk(model, guide, pick)
        records.append(SampleRecord(tuple(tokens), 1.0, i, calls, regex_valid=True))
    return SampleSet(records, exhausted=False)


def random_flag_sample(
    vocab: Vocabulary,
    max_flags: int,
    seed: int = 0,
    num_samples: int = 1,
) -> SampleSet:
    """Model-free baseline: uniform length in [1, max_flags], uniform
    non-EOS tokens, EOS appended. Needs no inference at all."""
    if max_flags < 1:
        raise SamplerError(f"max_flags must be >= 1, got {max_flags}")
    if num_samples < 1:
        raise SamplerError(f"num_samples must be >= 1, got {num_samples}")
    rng = RngStream(seed)
    choices = vocab.non_eos_ids()
    if not choices:
        raise SamplerError("vocabulary has no non-EOS tokens to sample")
    records = []
    for i in range(num_samples):
        length = 1 + rng.randint(max_flags)
        tokens = tuple(choices[rng.randint(len(choices))] for _ in range(length))
        records.append(SampleRecord(tokens + (vocab.eos_id,), 1.0, i, 0, regex_valid=True))
    return SampleSet(records, exhausted=False)
