"""Brute-force reference implementations for verification.

Everything here trades speed for obviousness and shares no selection,
queue, or scoring code with the production sampler: candidate ranking is
done with bare max-scans over lists, the queue is a plain list searched
linearly, and replayed prefixes are re-inferred from scratch instead of
being skipped. Differential tests pit these against the fast path on
fleets of tiny models. Intended for tests and audits, not production use.
"""

from __future__ import annotations

import math

from .errors import PrisamError
from .models import SequenceModel
from .sampler import Metric, SampleRecord, SampleSet, SamplerConfig


class TooLarge(PrisamError):
    """The model's sequence space exceeds the enumeration budget."""


def enumerate_all_sequences(model: SequenceModel, limit: int = 1_000_000) -> dict[tuple[int, ...], float]:
    """Exhaustively map every EOS-terminated sequence with positive
    probability to its exact probability (product of step probabilities).

    Raises TooLarge once more than ``limit`` sequences or model calls
    would be needed. For any well-formed model the values sum to 1 up to
    float accumulation error.
    """
    eos = model.vocab.eos_id
    out: dict[tuple[int, ...], float] = {}
    work = 0

    def walk(prefix: tuple[int, ...], prob: float):
        nonlocal work
        work += 1
        if work > limit or len(out) > limit:
            raise TooLarge(f"more than {limit} sequences or model calls")
        dist = model.next_distribution(prefix)
        for token in range(len(model.vocab)):
            p = float(dist[token])
            if p == 0.0:
                continue
            if token == eos:
                out[prefix + (token,)] = prob * p
            else:
                walk(prefix + (token,), prob * p)

    walk((), 1.0)
    return out


def _rank_allowed(dist, allowed: list[int], k: int) -> list[tuple[float, int]]:
    """Top-k by probability (ties: lower id) using repeated max-scans."""
    remaining = list(allowed)
    ranked: list[tuple[float, int]] = []
    while remaining and len(ranked) < k:
        best = remaining[0]
        for t in remaining[1:]:
            if float(dist[t]) > float(dist[best]):
                best = t
        ranked.append((float(dist[best]), best))
        remaining.remove(best)
    return ranked


def _geo(probs: list[float]) -> float:
    for p in probs:
        if p <= 0.0:
            return 0.0
    total = 0.0
    for p in probs:
        total += math.log(p)
    return math.exp(total / len(probs))


def reference_priority_sample(model: SequenceModel, config: SamplerConfig) -> SampleSet:
    """Literal transcription of the decode loop for differential testing.

    Re-runs the model at every position of every sample (no replay
    shortcut) but only collects branch points at positions beyond the
    popped prefix, so the observable behavior matches the fast path
    exactly: same sequences, same order, same scores, same accounting.
    """
    n = config.num_samples
    k = config.top_k if config.top_k is not None else n
    capacity = config.queue_capacity if config.queue_capacity is not None else n
    guide = config.guide
    eos = model.vocab.eos_id

    queue: list[dict] = []
    seq_counter = 0
    token_mask: list[int] = []
    mask_score = 1.0
    records: list[SampleRecord] = []
    exhausted = False

    for order in range(n):
        tokens: list[int] = []
        probs: list[float] = []
        state = guide.index.start if guide is not None else None
        while True:
            pos = len(tokens)
            dist = model.next_distribution(tokens)
            if guide is not None:
                mask = guide.index.mask_for(state, model.max_length - pos)
                allowed = [t for t in range(len(model.vocab)) if mask[t]]
            else:
                allowed = list(range(len(model.vocab)))
            ranked = _rank_allowed(dist, allowed, k)
            if pos < len(token_mask):
                token = token_mask[pos]
                prob = float(dist[token])
            else:
                prob, token = ranked[0]
                cap = len(ranked) - 1
                if config.max_branch is not None:
                    cap = min(cap, config.max_branch - 1)
                for alt_prob, alt in ranked[1 : 1 + cap]:
                    if alt_prob <= 0.0:
                        break
                    if config.metric is Metric.GEOMETRIC_MEAN:
                        score = _geo(probs + [alt_prob])
                    else:
                        score = alt_prob
                    if score <= 0.0:
                        continue
                    queue.append(
                        {"score": score, "seq": seq_counter, "prefix": tokens + [alt]}
                    )
                    seq_counter += 1
                    if len(queue) > capacity:
                        # drop the minimum: lowest score, then youngest
                        victim = 0
                        for i in range(1, len(queue)):
                            q, v = queue[i], queue[victim]
                            if q["score"] < v["score"] or (
                                q["score"] == v["score"] and q["seq"] > v["seq"]
                            ):
                                victim = i
                        queue.pop(victim)
            tokens.append(token)
            probs.append(prob)
            if token == eos:
                break
            if guide is not None:
                state = guide.index.step(state, token)
        records.append(
            SampleRecord(
                tuple(tokens), mask_score, order, len(tokens) - len(token_mask), regex_valid=True
            )
        )
        if order + 1 == n:
            break
        if not queue:
            exhausted = True
            break
        top = 0
        for i in range(1, len(queue)):
            q, v = queue[i], queue[top]
            if q["score"] > v["score"] or (q["score"] == v["score"] and q["seq"] < v["seq"]):
                top = i
        popped = queue.pop(top)
        token_mask = popped["prefix"]
        mask_score = popped["score"]
    return SampleSet(records, exhausted)
