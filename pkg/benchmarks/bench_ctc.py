"""Benchmark the CTC forward-backward kernels: compiled vs pure numpy.

Usage: python3 benchmarks/bench_ctc.py [--repeats N]

Times the full loss+posterior computation on grids spanning short lines
to long-page lines. The compiled kernel is the default at import; the
numpy fallback is what you get without a C toolchain.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import scriptorium._ctc_py as ctc_py

try:
    import scriptorium._ctc_fast as ctc_fast
except ImportError:
    ctc_fast = None


def make_instance(rng, frames, classes, label_len):
    logits = rng.normal(size=(frames, classes))
    logits -= logits.max(axis=1, keepdims=True)
    log_probs = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    label = rng.integers(1, classes, size=label_len).astype(np.int64)
    return log_probs, label


def bench(kernel, instances, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for log_probs, label in instances:
            kernel.forward_backward(log_probs, label)
        best = min(best, time.perf_counter() - start)
    return best / len(instances)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--batch", type=int, default=32, help="instances per size")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    sizes = [
        ("short line", 32, 20, 8),
        ("typical line", 80, 60, 30),
        ("long line", 200, 80, 70),
        ("page column", 600, 100, 180),
    ]
    print(f"{'case':>14} {'T':>5} {'C':>4} {'L':>4} {'numpy':>12} "
          f"{'compiled':>12} {'speedup':>8}")
    for name, frames, classes, label_len in sizes:
        instances = [make_instance(rng, frames, classes, label_len)
                     for _ in range(args.batch)]
        t_py = bench(ctc_py, instances, args.repeats)
        if ctc_fast is None:
            print(f"{name:>14} {frames:>5} {classes:>4} {label_len:>4} "
                  f"{t_py * 1e3:>10.3f}ms {'n/a':>12} {'-':>8}")
            continue
        t_fast = bench(ctc_fast, instances, args.repeats)
        nll_a, _ = ctc_py.forward_backward(*instances[0])
        nll_b, _ = ctc_fast.forward_backward(*instances[0])
        assert abs(nll_a - nll_b) < 1e-9, "kernels disagree"
        print(f"{name:>14} {frames:>5} {classes:>4} {label_len:>4} "
              f"{t_py * 1e3:>10.3f}ms {t_fast * 1e3:>10.3f}ms "
              f"{t_py / t_fast:>7.1f}x")
    if ctc_fast is None:
        print("\ncompiled kernel not built; pip install -e . with a C toolchain")


if __name__ == "__main__":
    main()
