"""Command line interface.

Subcommands: sample, compare, bench, guide-inspect, train, make-task.
Exit codes: 0 on success, 1 for usage errors, 2 for data or runtime
errors (missing files, malformed inputs, scorer failures). All output is
deterministic for fixed seeds, except the wall_ms column of bench CSVs.
"""

from __future__ import annotations

import argparse
import csv
import sys

from . import bench as bench_mod
from .baselines import NucleusConfig, greedy_decode, nucleus_sample, random_flag_sample, topk_sample
from .errors import PrisamError
from .guide import compile_guide
from .models import load_corpus, load_ngram, save_ngram, train_ngram
from .rng import mix64
from .sampler import InvalidPolicy, Metric, SamplerConfig, priority_sample
from .vocab import Vocabulary, detokenize


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


_METRICS = {"last": Metric.LAST_TOKEN_PROB, "geo": Metric.GEOMETRIC_MEAN}
_POLICIES = {"reject": InvalidPolicy.REJECT, "fallback": InvalidPolicy.FALLBACK}


def _build_parser() -> _Parser:
    parser = _Parser(prog="prisam", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("sample", help="decode samples from a model")
    p.add_argument("--model", required=True, help="trained model file")
    p.add_argument("--method", default="priority",
                   help="priority (default, unique best-first), greedy, nucleus:T, topk:K[:T], random")
    p.add_argument("-n", "--num-samples", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="for stochastic methods")
    p.add_argument("--vocab", help="optional vocabulary file; must agree with the model")
    p.add_argument("--regex", help="constrain output to this pattern")
    p.add_argument("--metric", choices=sorted(_METRICS), help="branch priority metric")
    p.add_argument("--max-branch", type=int)
    p.add_argument("--top-k", type=int)
    p.add_argument("--queue-capacity", type=int)
    p.add_argument("--top-p", type=float, default=0.95)
    p.add_argument("--max-length", type=int, default=32, help="sequence budget incl. EOS")
    p.add_argument("--csv", action="store_true", help="CSV instead of text lines")
    p.add_argument("--out", help="write to a file instead of stdout")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("compare", help="run several methods side by side")
    p.add_argument("--model", required=True)
    p.add_argument("--methods", default="priority,greedy,nucleus:1.0")
    p.add_argument("--num-samples", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--regex")
    p.add_argument("--top-p", type=float, default=0.95)
    p.add_argument("--max-length", type=int, default=32)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="pass-ordering benchmark suite")
    p.add_argument("--tasks", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-flags", type=int, default=24)
    p.add_argument("--max-flags", type=int, default=10)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--autotune-budget", type=int, default=2000,
                   help="search evaluations per task when building the training corpus")
    p.add_argument("--budget-list", default="1,3,5,10,30,100")
    p.add_argument("--methods", default="priority,greedy,nucleus:1.0,random,autotuner")
    p.add_argument("--scorer-cmd", help="external scorer command (line protocol)")
    p.add_argument("--invalid-policy", choices=sorted(_POLICIES), default="reject")
    p.add_argument("--top-p", type=float, default=0.95)
    p.add_argument("--out", default="results.csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("guide-inspect", help="show the compiled token automaton")
    p.add_argument("--regex", required=True)
    p.add_argument("--vocab", required=True, help="vocabulary file")
    p.add_argument("--max-length", type=int)
    p.add_argument("--max-states", type=int, default=20, help="cap on listed states")
    p.set_defaults(func=cmd_guide_inspect)

    p = sub.add_parser("train", help="train an n-gram model from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("make-task", help="emit a synthetic task fixture")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--num-flags", type=int, default=24)
    p.add_argument("--max-flags", type=int, default=10)
    p.add_argument("--vocab-out", help="write the flag vocabulary here")
    p.add_argument("--probe", type=int, default=3, help="print scores of this many single flags")
    p.set_defaults(func=cmd_make_task)

    return parser


def _open_out(path):
    return open(path, "w", encoding="utf-8") if path else sys.stdout


def _run_method(spec, model, guide, n, seed, top_p, sampler_overrides=None):
    """Sample records for one parsed method over a bare model."""
    use_guide = guide if spec.guided else None
    if spec.kind == "priority":
        fields = dict(num_samples=n, metric=spec.metric, max_branch=spec.max_branch, guide=use_guide)
        fields.update(sampler_overrides or {})
        result = priority_sample(model, SamplerConfig(**fields))
        return result.records, result.exhausted
    if spec.kind == "greedy":
        return [greedy_decode(model, use_guide)], False
    if spec.kind == "nucleus":
        cfg = NucleusConfig(top_p=top_p, temperature=spec.temperature, seed=seed, num_samples=n)
        return nucleus_sample(model, cfg, use_guide).records, False
    if spec.kind == "topk":
        out = topk_sample(model, spec.k, spec.temperature, seed=seed, num_samples=n, guide=use_guide)
        return out.records, False
    if spec.kind == "random":
        return random_flag_sample(model.vocab, model.max_length - 1, seed, n).records, False
    raise _UsageError(f"method {spec.text!r} needs a benchmark task, not a bare model")


def cmd_sample(args) -> int:
    try:
        spec = bench_mod.parse_method(args.method)
    except bench_mod.BenchError as exc:
        raise _UsageError(str(exc)) from None
    model = load_ngram(args.model, args.max_length)
    if args.vocab:
        vocab = Vocabulary.load(args.vocab)
        if vocab != model.vocab:
            raise PrisamError(f"vocabulary {args.vocab} does not match the model's")
    guide = compile_guide(args.regex, model.vocab) if args.regex else None
    overrides = {}
    if args.metric is not None:
        overrides["metric"] = _METRICS[args.metric]
    if args.max_branch is not None:
        overrides["max_branch"] = args.max_branch
    if args.top_k is not None:
        overrides["top_k"] = args.top_k
    if args.queue_capacity is not None:
        overrides["queue_capacity"] = args.queue_capacity
    records, exhausted = _run_method(
        spec, model, guide, args.num_samples, args.seed, args.top_p, overrides
    )
    out = _open_out(args.out)
    try:
        if args.csv:
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(["order", "score", "new_inferences", "regex_valid", "text"])
            for r in records:
                writer.writerow(
                    [r.order, repr(r.branch_score), r.new_inferences,
                     str(r.regex_valid).lower(), detokenize(r.tokens, model.vocab)]
                )
        else:
            for r in records:
                out.write(f"{r.order}\t{r.branch_score!r}\t{detokenize(r.tokens, model.vocab)}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    note = " (model exhausted)" if exhausted else ""
    total = sum(r.new_inferences for r in records)
    print(f"samples: {len(records)}{note}  inferences: {total}", file=sys.stderr)
    return 0


def cmd_compare(args) -> int:
    try:
        specs = [bench_mod.parse_method(m) for m in args.methods.split(",") if m]
    except bench_mod.BenchError as exc:
        raise _UsageError(str(exc)) from None
    if not specs:
        raise _UsageError("no methods given")
    model = load_ngram(args.model, args.max_length)
    guide = compile_guide(args.regex, model.vocab) if args.regex else None
    for spec in specs:
        seed = mix64(args.seed ^ bench_mod._stable_hash(spec.text))
        records, _ = _run_method(spec, model, guide, args.num_samples, seed, args.top_p)
        texts = [detokenize(r.tokens, model.vocab) for r in records]
        print(f"== {spec.text}")
        for i, text in enumerate(texts):
            print(f"{i}\t{text}")
        unique = len(set(texts))
        if guide is not None:
            valid = len({t for t in texts if guide.matches_text(t)})
            print(f"-- unique: {unique}/{len(texts)}  regex-valid unique: {valid}")
        else:
            print(f"-- unique: {unique}/{len(texts)}")
    return 0


def cmd_bench(args) -> int:
    try:
        budgets = tuple(int(b) for b in args.budget_list.split(",") if b)
        specs = [bench_mod.parse_method(m) for m in args.methods.split(",") if m]
    except (ValueError, bench_mod.BenchError) as exc:
        raise _UsageError(str(exc)) from None
    if not budgets or not specs:
        raise _UsageError("need at least one budget and one method")

    tasks = bench_mod.make_suite(args.seed, args.tasks, args.num_flags, args.max_flags)
    vocab = tasks[0].vocab
    scorer = None
    if args.scorer_cmd:
        scorer = bench_mod.ExternalScorer(args.scorer_cmd)
        tasks = bench_mod.use_external_scorer(tasks, scorer)
    try:
        corpus = bench_mod.build_training_corpus(tasks, args.autotune_budget, seed=args.seed)
        model = train_ngram(corpus, args.order, args.alpha, vocab, max_length=args.max_flags + 1)
        guide = compile_guide(bench_mod.flag_regex(vocab), vocab)
        config = bench_mod.EvalConfig(
            model=model,
            guide=guide,
            budgets=budgets,
            seed=args.seed,
            top_p=args.top_p,
            invalid_policy=_POLICIES[args.invalid_policy],
        )
        records = bench_mod.evaluate(specs, tasks, config)
    finally:
        if scorer is not None:
            scorer.close()
    bench_mod.write_csv(records, args.out)
    print(f"{'method':<24} {'n':>4} {'improve%':>9} {'uniq':>7} {'valid':>7}")
    for r in records:
        print(
            f"{r.method:<24} {r.n:>4} {r.mean_improvement:>9.4f}"
            f" {r.mean_unique_raw:>7.2f} {r.mean_unique_valid:>7.2f}"
        )
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def cmd_guide_inspect(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    guide = compile_guide(args.regex, vocab)
    index = guide.index
    empty = guide.language_empty(args.max_length)
    print(f"regex: {guide.regex}")
    print(f"char states: {guide.dfa.n_states} (dead={guide.dfa.dead})  token states: {index.n_states}")
    mt = guide.min_tokens
    print(f"min tokens: {'-' if mt is None else mt}  language empty: {str(empty).lower()}")
    shown = 0
    for state in range(index.n_states):
        if shown >= args.max_states:
            print(f"... {index.n_states - shown} more states")
            break
        allowed = index.allowed_tokens(state)
        if not allowed and state != index.start:
            continue
        names = " ".join(vocab.surfaces[t] for t in allowed[:8])
        more = f" (+{len(allowed) - 8} more)" if len(allowed) > 8 else ""
        accept = " accept" if state in index.accepting else ""
        print(f"state {state}{accept}: {len(allowed)} allowed: {names}{more}")
        shown += 1
    return 0


def cmd_train(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    corpus = load_corpus(args.corpus, vocab)
    model = train_ngram(corpus, args.order, args.alpha, vocab, max_length=32)
    save_ngram(model, args.out)
    print(
        f"trained order-{args.order} model on {len(corpus)} sequences,"
        f" {len(model.counts)} contexts, vocab {len(vocab)}"
    )
    return 0


def cmd_make_task(args) -> int:
    task = bench_mod.make_task(args.seed, args.num_flags, args.max_flags)
    if args.vocab_out:
        task.vocab.save(args.vocab_out)
    print(f"name: {task.name}")
    print(f"flags: {args.num_flags}  max per sequence: {args.max_flags}")
    print(f"regex: {bench_mod.flag_regex(task.vocab)}")
    for t in task.vocab.non_eos_ids()[: max(args.probe, 0)]:
        score, _ = task.score_tokens((t, task.vocab.eos_id))
        print(f"probe {task.vocab.surfaces[t]}: {score:.4f}")
    return 0


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except PrisamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
