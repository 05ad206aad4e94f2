#!/usr/bin/env python3
"""Scaling sweep: mean stabilization time of the fast approximate halver
(expected logarithmic) against the slow exact halver (expected linear).

Writes one CSV per protocol under artifacts/ in the same format as the
command-line `experiment` runner, then prints least-squares fits of mean
parallel time against ln n and against n.

Example:
    python3 scripts/scaling_sweep.py --trials 10 --seed 7
"""

import argparse
import csv
import math
from pathlib import Path

from popproto import builtin
from popproto.sim import PredicateHolds, estimate_stabilization_time


def least_squares(xs, ys):
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    sxx = sum((x - mean_x) ** 2 for x in xs)
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    ss_res = sum((y - (slope * x + intercept)) ** 2 for x, y in zip(xs, ys))
    ss_tot = sum((y - mean_y) ** 2 for y in ys)
    return slope, intercept, 1.0 - ss_res / ss_tot


def sweep(name, sizes, layout, trials, seed):
    """Mean stabilization times, one entry per population size."""
    inst = builtin(name)
    means = []
    for i, n in enumerate(sizes):
        m, a = layout(n)
        initial = inst.initial(m, a) if a is not None else inst.initial(m)
        stats = estimate_stabilization_time(
            inst.protocol,
            initial,
            PredicateHolds(inst.stabilized, "stabilized"),
            trials=trials,
            base_seed=seed + i,
        )
        means.append(stats.mean)
        print(f"  {name} n={initial.n:>8}: mean {stats.mean:8.2f} "
              f"(std {stats.stddev:.2f}, {trials} trials)")
    return means


def write_csv(path, name, sizes, means):
    path.parent.mkdir(exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["protocol", "n", "mean_parallel_time"])
        for n, mean in zip(sizes, means):
            writer.writerow([name, n, f"{mean:.6f}"])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=10)
    parser.add_argument("--seed", type=int, default=2)
    parser.add_argument("--out-dir", type=Path, default=Path("artifacts"))
    args = parser.parse_args()

    fast_sizes = [2**k for k in (12, 14, 16, 18)]
    print("fast approximate halver (a = n/11):")
    fast = sweep(
        "halve_fast",
        fast_sizes,
        lambda n: (n - n // 11, n // 11),
        args.trials,
        args.seed,
    )
    write_csv(args.out_dir / "sweep_halve_fast.csv", "halve_fast", fast_sizes, fast)

    slow_sizes = [1_000, 10_000, 100_000]
    print("slow exact halver:")
    slow = sweep("halve_slow", slow_sizes, lambda n: (n, None), args.trials, args.seed)
    write_csv(args.out_dir / "sweep_halve_slow.csv", "halve_slow", slow_sizes, slow)

    _, _, r2_log = least_squares([math.log(n) for n in fast_sizes], fast)
    _, _, r2_lin = least_squares([float(n) for n in slow_sizes], slow)
    print(f"fast halver vs ln n: R^2 = {r2_log:.4f}")
    print(f"slow halver vs n:    R^2 = {r2_lin:.4f}")


if __name__ == "__main__":
    main()
