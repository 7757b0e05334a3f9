"""Desk-scale pass-ordering benchmark.

A task is "pick a sequence of compiler flags maximizing a score", where
the score is the percent improvement over a fixed default action.
Synthetic scorers stand in for a real compiler: each task draws per-flag
gains and ordered pairwise interactions from its seed, mixing in tables
shared across a suite so that patterns learned on some tasks transfer to
the others. Scores reward good flags and good adjacencies, decay repeated
flags, and are bounded; most random sequences lose to the default, which
matches how real pass pipelines behave.

A line-protocol external scorer can replace the synthetic ones to drive a
real toolchain.
"""

from __future__ import annotations

import math
import shlex
import subprocess
import time
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .baselines import NucleusConfig, greedy_decode, nucleus_sample, random_flag_sample, topk_sample
from .errors import PrisamError
from .guide import Guide, compile_guide, escape_literal
from .models import SequenceModel
from .rng import RngStream, mix64
from .sampler import (
    InvalidPolicy,
    Metric,
    SamplerConfig,
    priority_sample,
)
from .vocab import Vocabulary, detokenize


class BenchError(PrisamError):
    pass


class ScorerIoError(PrisamError):
    """The external scorer process misbehaved."""


# ---------------------------------------------------------------------------
# flag vocabularies

_PASS_POOL = [
    "-mem2reg", "-sroa", "-gvn", "-licm", "-instcombine", "-simplifycfg",
    "-early-cse", "-reassociate", "-dce", "-adce", "-dse", "-sccp",
    "-jump-threading", "-tailcallelim", "-loop-rotate", "-loop-unroll",
    "-loop-deletion", "-loop-idiom", "-indvars", "-memcpyopt", "-bdce",
    "-mldst-motion", "-correlated-propagation", "-aggressive-instcombine",
    "-sink", "-speculative-execution", "-slp-vectorizer", "-loop-simplify",
    "-lcssa", "-sccp-ipcp", "-globalopt", "-float2int",
]


def pass_names(num_flags: int) -> list[str]:
    if num_flags < 1:
        raise BenchError(f"num_flags must be >= 1, got {num_flags}")
    names = list(_PASS_POOL[:num_flags])
    i = 0
    while len(names) < num_flags:
        names.append(f"-opt-pass-{i}")
        i += 1
    return names


def flag_vocabulary(num_flags: int) -> Vocabulary:
    """Flags first, EOS marker last."""
    return Vocabulary(pass_names(num_flags) + ["<eos>"])


def flag_regex(vocab: Vocabulary) -> str:
    """One or more flags from the vocabulary, space separated."""
    alt = "|".join(escape_literal(vocab.surfaces[t]) for t in vocab.non_eos_ids())
    return f"({alt})( ({alt}))*"


# ---------------------------------------------------------------------------
# scorers

class SyntheticScorer:
    """Deterministic stand-in for a compiler run.

    score = bound * tanh(raw / bound), with

        raw = sum_i base[f_i] * decay^(occurrence_i - 1)
            + sum_{i<j} inter[f_i, f_j] * locality^(j - i - 1)

    Base gains skew negative with a positive tail, interactions are
    order-sensitive and mostly antagonistic, adjacency matters most, and
    repeating a flag buys less each time. Tables blend a suite-shared draw
    with a task-local draw so tasks resemble one another without
    coinciding.
    """

    def __init__(
        self,
        num_flags: int,
        seed: int,
        shared_seed: int | None = None,
        shared_weight: float = 0.8,
        decay: float = 0.4,
        locality: float = 0.55,
        bound: float = 25.0,
    ):
        if not 0.0 <= shared_weight <= 1.0:
            raise BenchError(f"shared_weight must be in [0, 1], got {shared_weight}")
        self.num_flags = num_flags
        self.decay = decay
        self.locality = locality
        self.bound = bound
        if shared_seed is None:
            shared_seed = seed
        local = self._draw(num_flags, seed)
        shared = self._draw(num_flags, shared_seed)
        w = shared_weight
        self.base = w * shared[0] + (1.0 - w) * local[0]
        self.inter = w * shared[1] + (1.0 - w) * local[1]

    @staticmethod
    def _draw(num_flags: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        rng = RngStream(mix64(seed ^ 0x5C0E125))
        base = np.empty(num_flags)
        for i in range(num_flags):
            base[i] = 3.2 * rng.uniform() - 1.9
        inter = np.empty((num_flags, num_flags))
        for i in range(num_flags):
            for j in range(num_flags):
                u = rng.uniform()
                inter[i, j] = u * u * 1.6 - 0.75
        return base, inter

    def score_indices(self, flags: Sequence[int]) -> float:
        occurrences: dict[int, int] = {}
        raw = 0.0
        for pos, f in enumerate(flags):
            seen = occurrences.get(f, 0)
            occurrences[f] = seen + 1
            raw += float(self.base[f]) * self.decay ** seen
            for later in range(pos + 1, len(flags)):
                raw += float(self.inter[f, flags[later]]) * self.locality ** (later - pos - 1)
        return float(self.bound * math.tanh(raw / self.bound))


class ExternalScorer:
    """Line-protocol bridge to a real scorer process.

    The command is started once; each request writes one space-separated
    flag sequence to its stdin and reads one decimal number from its
    stdout. Any protocol violation raises ScorerIoError.
    """

    def __init__(self, command: str):
        self.command = command
        try:
            self._proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ScorerIoError(f"could not start scorer {command!r}: {exc}") from None

    def score_text(self, text: str) -> float:
        proc = self._proc
        if proc.poll() is not None:
            raise ScorerIoError(f"scorer {self.command!r} exited with {proc.returncode}")
        try:
            proc.stdin.write(text + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except OSError as exc:
            raise ScorerIoError(f"scorer pipe failed: {exc}") from None
        if not line:
            raise ScorerIoError(f"scorer {self.command!r} closed its output")
        try:
            return float(line.strip())
        except ValueError:
            raise ScorerIoError(f"scorer returned a non-number: {line.strip()!r}") from None

    def close(self):
        proc = self._proc
        if proc.poll() is None:
            proc.stdin.close()
            proc.terminate()
            proc.wait(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


# ---------------------------------------------------------------------------
# tasks

@dataclass
class PassTask:
    """One pass-ordering problem over a shared flag vocabulary."""

    name: str
    vocab: Vocabulary
    max_flags: int
    scorer: SyntheticScorer | None
    baseline_score: float = 0.0
    seed: int = 0
    external: Callable[[str], float] | None = None

    def score_text(self, text: str, policy: InvalidPolicy = InvalidPolicy.REJECT) -> tuple[float, bool]:
        """Score a detokenized sample. Returns (score, regex_valid).

        Invalid samples (unknown words, or no flags at all) score the
        baseline 0.0 under REJECT; FALLBACK strips unknown words first and
        scores whatever remains, still reporting validity honestly.
        """
        words = text.split()
        known = [w for w in words if w in self.vocab and w != self.vocab.eos_surface]
        valid = bool(words) and len(known) == len(words)
        if policy is InvalidPolicy.REJECT:
            if not valid:
                return self.baseline_score, False
            use = words
        else:
            if not known:
                return self.baseline_score, valid
            use = known
        if self.external is not None:
            return float(self.external(" ".join(use))), valid
        flags = [self.vocab.id_of(w) for w in use]
        return self.scorer.score_indices(flags), valid

    def score_tokens(self, tokens: Sequence[int], policy: InvalidPolicy = InvalidPolicy.REJECT) -> tuple[float, bool]:
        return self.score_text(detokenize(tokens, self.vocab), policy)


def make_task(
    seed: int,
    num_flags: int = 24,
    max_flags: int = 10,
    vocab: Vocabulary | None = None,
    shared_seed: int | None = None,
    shared_weight: float = 0.8,
) -> PassTask:
    if max_flags < 1:
        raise BenchError(f"max_flags must be >= 1, got {max_flags}")
    if vocab is None:
        vocab = flag_vocabulary(num_flags)
    scorer = SyntheticScorer(num_flags, seed, shared_seed=shared_seed, shared_weight=shared_weight)
    return PassTask(
        name=f"task{seed:08x}",
        vocab=vocab,
        max_flags=max_flags,
        scorer=scorer,
        seed=seed,
    )


def make_suite(seed: int, num_tasks: int, num_flags: int = 24, max_flags: int = 10) -> list[PassTask]:
    """Tasks share one vocabulary and one shared score table, so structure
    learned from some tasks carries over to the rest."""
    if num_tasks < 1:
        raise BenchError(f"num_tasks must be >= 1, got {num_tasks}")
    vocab = flag_vocabulary(num_flags)
    return [
        make_task(
            seed=mix64(seed ^ (0xA5 + 0x1000003 * i)),
            num_flags=num_flags,
            max_flags=max_flags,
            vocab=vocab,
            shared_seed=seed,
        )
        for i in range(num_tasks)
    ]


# ---------------------------------------------------------------------------
# autotuner and corpus

def _random_flags(rng: RngStream, task: PassTask) -> list[int]:
    choices = task.vocab.non_eos_ids()
    length = 1 + rng.randint(task.max_flags)
    return [choices[rng.randint(len(choices))] for _ in range(length)]


def autotune_trajectory(task: PassTask, budget: int, seed: int):
    """Yield (candidate flags, score, best so far) for each evaluation of a
    budgeted random search. Earlier candidates win ties, so the best-so-far
    track is deterministic and monotone in the budget."""
    if budget < 1:
        raise BenchError(f"budget must be >= 1, got {budget}")
    rng = RngStream(mix64(seed ^ task.seed))
    best_score = -math.inf
    for _ in range(budget):
        candidate = _random_flags(rng, task)
        score, _ = task.score_tokens(candidate)
        if score > best_score:
            best_score = score
        yield candidate, score, best_score


def autotune(task: PassTask, budget: int, seed: int = 0) -> tuple[list[int], float]:
    """Best of ``budget`` random flag sequences, with its score."""
    best: list[int] = []
    best_score = -math.inf
    for candidate, score, _ in autotune_trajectory(task, budget, seed):
        if score > best_score:
            best, best_score = list(candidate), score
    return best, best_score


def build_training_corpus(tasks: Iterable[PassTask], budget: int, seed: int = 0) -> list[list[int]]:
    """One autotuned winner per task, EOS-terminated, ready for training."""
    corpus = []
    for task in tasks:
        flags, _ = autotune(task, budget, seed)
        corpus.append(flags + [task.vocab.eos_id])
    return corpus


# ---------------------------------------------------------------------------
# evaluation

@dataclass(frozen=True)
class MethodSpec:
    """Parsed method string.

    Grammar: NAME[:ARG[:ARG]] with '-' suffixes. Names: priority, greedy,
    nucleus, topk, random, autotuner. nucleus takes a temperature, topk
    takes k and an optional temperature. Suffixes: 'geo' scores branches
    by geometric mean, 'bN' caps branching at N, 'noregex' drops the guide.
    Examples: priority, priority-geo-b5, nucleus:1.2, topk:5:0.8-noregex.
    """

    text: str
    kind: str
    temperature: float = 1.0
    k: int = 0
    metric: Metric = Metric.LAST_TOKEN_PROB
    max_branch: int | None = None
    guided: bool = True


_METHOD_NAMES = ("priority", "greedy", "nucleus", "topk", "random", "autotuner")


def parse_method(spec: str) -> MethodSpec:
    parts = spec.split("-")
    head, suffixes = parts[0], parts[1:]
    pieces = head.split(":")
    name = pieces[0]
    if name not in _METHOD_NAMES:
        raise BenchError(f"unknown method {spec!r}; names are {', '.join(_METHOD_NAMES)}")
    temperature = 1.0
    k = 0
    try:
        if name == "nucleus":
            if len(pieces) > 2:
                raise BenchError(f"{spec!r}: nucleus takes one temperature argument")
            if len(pieces) == 2:
                temperature = float(pieces[1])
        elif name == "topk":
            if len(pieces) < 2 or len(pieces) > 3:
                raise BenchError(f"{spec!r}: topk takes k and an optional temperature")
            k = int(pieces[1])
            if len(pieces) == 3:
                temperature = float(pieces[2])
        elif len(pieces) > 1:
            raise BenchError(f"{spec!r}: {name} takes no ':' arguments")
    except ValueError:
        raise BenchError(f"{spec!r}: bad numeric argument") from None
    metric = Metric.LAST_TOKEN_PROB
    max_branch = None
    guided = True
    for s in suffixes:
        if s == "geo":
            metric = Metric.GEOMETRIC_MEAN
        elif s == "noregex":
            guided = False
        elif s.startswith("b") and s[1:].isdigit() and int(s[1:]) >= 1:
            max_branch = int(s[1:])
        else:
            raise BenchError(f"{spec!r}: unknown suffix {s!r}")
    if (metric is Metric.GEOMETRIC_MEAN or max_branch is not None) and name != "priority":
        raise BenchError(f"{spec!r}: geo/bN suffixes apply to priority only")
    if temperature < 0:
        raise BenchError(f"{spec!r}: temperature must be >= 0")
    return MethodSpec(spec, name, temperature, k, metric, max_branch, guided)


@dataclass(frozen=True)
class BenchRecord:
    method: str
    n: int
    mean_improvement: float  # mean over tasks of best-of-n score
    mean_unique_raw: float
    mean_unique_valid: float
    wall_ms: float


@dataclass
class EvalConfig:
    model: SequenceModel
    guide: Guide | None
    budgets: tuple[int, ...] = (1, 3, 5, 10, 30, 100)
    seed: int = 0
    top_p: float = 0.95
    invalid_policy: InvalidPolicy = InvalidPolicy.REJECT

    def __post_init__(self):
        if not self.budgets or any(b < 1 for b in self.budgets):
            raise BenchError("budgets must be positive")
        self.budgets = tuple(sorted(self.budgets))


def _stable_hash(text: str) -> int:
    h = 0x243F6A8885A308D3
    for b in text.encode("utf-8"):
        h = mix64(h ^ b)
    return h


def _method_samples(
    spec: MethodSpec, task: PassTask, config: EvalConfig, task_index: int
) -> list[tuple[int, ...]]:
    """All sampled token sequences for one method on one task, in emission
    order, up to the largest budget."""
    n = max(config.budgets)
    guide = config.guide if spec.guided else None
    seed = mix64(config.seed ^ _stable_hash(spec.text) ^ mix64(0xBEEF + task_index))
    if spec.kind == "priority":
        cfg = SamplerConfig(
            num_samples=n,
            metric=spec.metric,
            max_branch=spec.max_branch,
            guide=guide,
            invalid_policy=config.invalid_policy,
        )
        return [r.tokens for r in priority_sample(config.model, cfg).records]
    if spec.kind == "greedy":
        return [greedy_decode(config.model, guide).tokens]
    if spec.kind == "nucleus":
        cfg = NucleusConfig(
            top_p=config.top_p, temperature=spec.temperature, seed=seed, num_samples=n
        )
        return [r.tokens for r in nucleus_sample(config.model, cfg, guide).records]
    if spec.kind == "topk":
        out = topk_sample(
            config.model, spec.k, temperature=spec.temperature, seed=seed, num_samples=n, guide=guide
        )
        return [r.tokens for r in out.records]
    if spec.kind == "random":
        out = random_flag_sample(task.vocab, task.max_flags, seed=seed, num_samples=n)
        return [r.tokens for r in out.records]
    if spec.kind == "autotuner":
        return [
            tuple(candidate) + (task.vocab.eos_id,)
            for candidate, _, _ in autotune_trajectory(task, n, seed)
        ]
    raise BenchError(f"unhandled method {spec.text!r}")


def evaluate(
    methods: Sequence[str | MethodSpec],
    tasks: Sequence[PassTask],
    config: EvalConfig,
) -> list[BenchRecord]:
    """Run every method on every task and aggregate best-of-n quality and
    uniqueness at each budget.

    Per task and method the largest budget's worth of samples is produced
    once; smaller budgets reuse the prefix, mirroring how a practitioner
    would spend a sampling budget. Invalid samples score the baseline 0.0
    (REJECT) or their repaired value (FALLBACK). wall_ms covers a method's
    full sampling and scoring work across tasks, repeated on each of its
    budget rows.
    """
    if not tasks:
        raise BenchError("no tasks to evaluate")
    specs = [m if isinstance(m, MethodSpec) else parse_method(m) for m in methods]
    records: list[BenchRecord] = []
    for spec in specs:
        t0 = time.perf_counter()
        per_task: list[tuple[list[float], list[bool], list[str]]] = []
        for index, task in enumerate(tasks):
            sampled = _method_samples(spec, task, config, index)
            texts = [detokenize(tokens, task.vocab) for tokens in sampled]
            scores = []
            valids = []
            for text in texts:
                score, valid = task.score_text(text, config.invalid_policy)
                scores.append(score)
                valids.append(valid)
            per_task.append((scores, valids, texts))
        wall_ms = (time.perf_counter() - t0) * 1000.0
        for n in config.budgets:
            best_sum = 0.0
            uraw_sum = 0
            uvalid_sum = 0
            for scores, valids, texts in per_task:
                window = scores[:n]
                best_sum += max(window) if window else 0.0
                uraw_sum += len(set(texts[:n]))
                uvalid_sum += len({t for t, v in zip(texts[:n], valids[:n]) if v})
            count = len(per_task)
            records.append(
                BenchRecord(
                    method=spec.text,
                    n=n,
                    mean_improvement=best_sum / count,
                    mean_unique_raw=uraw_sum / count,
                    mean_unique_valid=uvalid_sum / count,
                    wall_ms=wall_ms,
                )
            )
    return records


CSV_HEADER = "method,n,mean_improvement_pct,mean_unique_raw,mean_unique_valid,wall_ms"


def write_csv(records: Sequence[BenchRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in records:
            fh.write(
                f"{r.method},{r.n},{r.mean_improvement:.6f},"
                f"{r.mean_unique_raw:.6f},{r.mean_unique_valid:.6f},{r.wall_ms:.3f}\n"
            )


def use_external_scorer(tasks: Sequence[PassTask], scorer: ExternalScorer) -> list[PassTask]:
    """Tasks rewired to score through the external process."""
    return [replace(task, scorer=None, external=scorer.score_text) for task in tasks]
