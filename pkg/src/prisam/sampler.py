"""Deterministic best-first sampling.

One decode pass greedily extends the current branch one token at a time.
At every position where the model is actually consulted, the top ``k``
allowed continuations are ranked: the best one is taken, the runners-up
are offered to a bounded priority queue as branch points. When a sample
finishes (EOS), the globally best queued branch point is popped and its
prefix is replayed, without re-running the model, before greedy extension
resumes. Every queued prefix differs from every emitted sample and from
every other queued prefix, so the N samples are distinct by construction.

Branch points are scored either by the probability of their last token
(raw, after masking, never renormalized) or by the geometric mean of all
token probabilities along the prefix. Queue order is score descending with
insertion order breaking ties; when the queue is full an incoming entry
replaces the current minimum only if it beats it strictly.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import PrisamError
from .guide import Guide
from .models import SequenceModel


class Metric(Enum):
    LAST_TOKEN_PROB = "last-token-prob"
    GEOMETRIC_MEAN = "geometric-mean"


class InvalidPolicy(Enum):
    REJECT = "reject"
    FALLBACK = "fallback"


class EmptyLanguage(PrisamError):
    """The guide admits no sequence within the length budget."""


class NoAllowedToken(PrisamError):
    """Decoding reached a position with no usable continuation."""


class SamplerError(PrisamError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    num_samples: int = 1
    top_k: int | None = None  # defaults to num_samples
    max_branch: int | None = None  # None = unbounded children per node
    metric: Metric = Metric.LAST_TOKEN_PROB
    queue_capacity: int | None = None  # defaults to num_samples
    guide: Guide | None = None
    invalid_policy: InvalidPolicy = InvalidPolicy.REJECT

    def __post_init__(self):
        if self.num_samples < 1:
            raise SamplerError(f"num_samples must be >= 1, got {self.num_samples}")
        if self.top_k is not None and self.top_k < 1:
            raise SamplerError(f"top_k must be >= 1, got {self.top_k}")
        if self.max_branch is not None and self.max_branch < 1:
            raise SamplerError(f"max_branch must be >= 1, got {self.max_branch}")
        if self.queue_capacity is not None and self.queue_capacity < 0:
            raise SamplerError(f"queue_capacity must be >= 0, got {self.queue_capacity}")
        if not isinstance(self.metric, Metric):
            raise SamplerError(f"metric must be a Metric, got {self.metric!r}")


@dataclass(frozen=True)
class QueueEntry:
    score: float
    prefix: tuple[int, ...]
    probs: tuple[float, ...]  # per-token probabilities along the prefix
    insertion_seq: int


@dataclass(frozen=True)
class SampleRecord:
    tokens: tuple[int, ...]
    branch_score: float  # popped priority; 1.0 for the first sample
    order: int  # emission index
    new_inferences: int  # model calls this sample needed beyond replay
    regex_valid: bool = True


@dataclass
class SampleSet:
    records: list[SampleRecord] = field(default_factory=list)
    exhausted: bool = False  # queue emptied before num_samples were produced

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


class BranchQueue:
    """Bounded max-queue over (score desc, insertion order asc).

    When full, an offer either replaces the strict minimum under that order
    or is discarded; a discarded or evicted prefix is gone for good. Ties
    on score keep the older entry, since the newcomer compares lower.
    """

    def __init__(self, capacity: int):
        if capacity < 0:
            raise SamplerError(f"capacity must be >= 0, got {capacity}")
        self.capacity = capacity
        self._heap: list[tuple[float, int, QueueEntry]] = []  # (score, -seq): min-heap root is eviction victim
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def entries(self) -> list[QueueEntry]:
        return [item[2] for item in self._heap]

    def offer(self, score: float, prefix: tuple[int, ...], probs: tuple[float, ...]) -> bool:
        seq = self._seq
        self._seq += 1
        entry = QueueEntry(score, prefix, probs, seq)
        item = (score, -seq, entry)
        if len(self._heap) < self.capacity:
            heapq.heappush(self._heap, item)
            return True
        if self.capacity and score > self._heap[0][0]:
            heapq.heapreplace(self._heap, item)
            return True
        return False

    def pop_max(self) -> QueueEntry | None:
        if not self._heap:
            return None
        best = 0
        for i in range(1, len(self._heap)):
            if (self._heap[i][0], self._heap[i][1]) > (self._heap[best][0], self._heap[best][1]):
                best = i
        item = self._heap[best]
        last = self._heap.pop()
        if best < len(self._heap):
            self._heap[best] = last
            heapq.heapify(self._heap)
        return item[2]


def choose_best_tokens(
    distribution: np.ndarray,
    k: int,
    guide: Guide | None = None,
    state: int | None = None,
    remaining: int | None = None,
) -> list[tuple[float, int]]:
    """Rank the allowed continuations of one position.

    Returns up to ``k`` (probability, token id) pairs sorted by probability
    descending, ties by id ascending. Unguided, every token including EOS
    competes. Guided, the mask for ``state`` applies, narrowed by the
    ``remaining`` length budget; an empty mask raises NoAllowedToken.
    """
    if k < 1:
        raise SamplerError(f"k must be >= 1, got {k}")
    if guide is None:
        return _kernels.topk_all(distribution, k)
    if state is None:
        state = guide.index.start
    mask = guide.index.mask_for(state, remaining)
    if not mask.any():
        raise NoAllowedToken(f"guide state {state} allows nothing within the budget")
    return _kernels.topk_masked(distribution, mask, k)


def _branch_score(metric: Metric, path_probs: Sequence[float], alt_prob: float) -> float:
    if metric is Metric.LAST_TOKEN_PROB:
        return float(alt_prob)
    total = 0.0
    for p in path_probs:
        if p <= 0.0:
            return 0.0
        total += math.log(p)
    if alt_prob <= 0.0:
        return 0.0
    total += math.log(alt_prob)
    return math.exp(total / (len(path_probs) + 1))


def priority_sample(model: SequenceModel, config: SamplerConfig) -> SampleSet:
    """Produce up to ``config.num_samples`` distinct samples, best first.

    Samples are ordered by expansion priority: record 0 is the greedy
    decode, each later record extends the highest-priority branch point
    left in the queue. ``exhausted`` is set when the queue runs dry early,
    which is also the exact model-enumeration case. Inference is counted
    per consulted position; replayed prefixes are free.
    """
    cfg = config
    n = cfg.num_samples
    k = cfg.top_k if cfg.top_k is not None else n
    capacity = cfg.queue_capacity if cfg.queue_capacity is not None else n
    guide = cfg.guide
    eos = model.vocab.eos_id
    if guide is not None:
        if guide.vocab != model.vocab:
            raise SamplerError("guide and model vocabularies differ")
        if guide.language_empty(model.max_length):
            raise EmptyLanguage(
                f"regex {guide.regex!r} admits no sequence within max_length {model.max_length}"
            )

    queue = BranchQueue(capacity)
    records: list[SampleRecord] = []
    exhausted = False
    mask_tokens: tuple[int, ...] = ()
    mask_probs: tuple[float, ...] = ()
    branch_score = 1.0

    for order in range(n):
        tokens: list[int] = []
        probs: list[float] = []
        state = guide.index.start if guide is not None else -1
        new_inferences = 0
        while True:
            pos = len(tokens)
            if pos < len(mask_tokens):
                token = mask_tokens[pos]
                prob = mask_probs[pos]
            else:
                dist = model.next_distribution(tokens)
                new_inferences += 1
                if guide is not None:
                    best = choose_best_tokens(
                        dist, k, guide=guide, state=state, remaining=model.max_length - pos
                    )
                else:
                    best = choose_best_tokens(dist, k)
                if not best:
                    raise NoAllowedToken(f"nothing to decode at position {pos}")
                prob, token = best[0]
                cap = len(best) - 1
                if cfg.max_branch is not None and cfg.max_branch - 1 < cap:
                    cap = cfg.max_branch - 1
                for alt_prob, alt in best[1 : 1 + cap]:
                    if alt_prob <= 0.0:
                        break  # candidates are sorted, the rest are zero too
                    score = _branch_score(cfg.metric, probs, alt_prob)
                    if score > 0.0:
                        queue.offer(score, tuple(tokens) + (alt,), tuple(probs) + (alt_prob,))
            tokens.append(token)
            probs.append(prob)
            if token == eos:
                break
            if guide is not None:
                state = guide.index.step(state, token)
        records.append(
            SampleRecord(tuple(tokens), branch_score, order, new_inferences, regex_valid=True)
        )
        if order + 1 == n:
            break
        entry = queue.pop_max()
        if entry is None:
            exhausted = True
            break
        mask_tokens, mask_probs, branch_score = entry.prefix, entry.probs, entry.score
    return SampleSet(records, exhausted)


def count_inferences(samples: SampleSet) -> int:
    """Total model calls across a sample set; equals the number of distinct
    tree positions expanded."""
    return sum(r.new_inferences for r in samples.records)
