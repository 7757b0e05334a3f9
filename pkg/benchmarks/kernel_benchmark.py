"""Time the pure-Python kernels against the compiled extension.

Usage:
    python3 benchmarks/kernel_benchmark.py [--repeats 2000] [--sizes 64,512,4096]

Parity between the backends is asserted on every timed input before the
numbers are printed, so a reported speedup is always for identical output.
"""

import argparse
import time

import numpy as np

from prisam._kernels import BACKEND, pure

if BACKEND != "compiled":
    raise SystemExit(
        "compiled backend not active (PRISAM_PURE set, or the extension "
        "failed to build); nothing to compare"
    )

from prisam._kernels import _fast


def make_inputs(size: int, seed: int):
    rng = np.random.default_rng(seed)
    probs = rng.random(size)
    probs /= probs.sum()
    probs.setflags(write=False)
    mask = (rng.random(size) < 0.7).astype(np.uint8)
    if not mask.any():
        mask[0] = 1
    mask.setflags(write=False)
    return probs, mask


def time_call(fn, args, repeats: int) -> float:
    """Best-of-3 mean microseconds per call."""
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best * 1e6


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=2000)
    ap.add_argument("--sizes", default="64,512,4096")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    rows = []
    for size in sizes:
        probs, mask = make_inputs(size, seed=size)
        k = max(4, size // 32)
        cases = [
            ("topk_masked", (probs, mask, k)),
            ("nucleus_pick", (probs, mask, 1.0 / 1.3, 0.9, 0.53)),
            ("topk_pick", (probs, mask, k, 1.0 / 0.8, 0.27)),
        ]
        for name, call_args in cases:
            pure_fn = getattr(pure, name)
            fast_fn = getattr(_fast, name)
            expect = pure_fn(*call_args)
            got = fast_fn(*call_args)
            if name == "topk_masked":
                assert list(expect) == list(got), f"{name} parity broke at size {size}"
            else:
                assert expect == got, f"{name} parity broke at size {size}"
            pure_us = time_call(pure_fn, call_args, args.repeats)
            fast_us = time_call(fast_fn, call_args, args.repeats)
            rows.append((name, size, pure_us, fast_us))

    print(f"{'kernel':<14} {'size':>6} {'pure us':>10} {'compiled us':>12} {'speedup':>8}")
    for name, size, pure_us, fast_us in rows:
        print(f"{name:<14} {size:>6} {pure_us:>10.2f} {fast_us:>12.2f} {pure_us / fast_us:>7.1f}x")


if __name__ == "__main__":
    main()
