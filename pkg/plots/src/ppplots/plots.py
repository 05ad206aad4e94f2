"""Scaling figures and fit summaries for experiment CSV tables.

Reads a results table (one row per trial; columns named on the command
line, defaulting to the experiment runner's header), aggregates the y
column per (group, x) as the mean over trials with min/max whiskers,
renders a scatter with an optional reference curve, and prints
least-squares fits of the group means against ln x and against x —
one R² per fit, so logarithmic and linear growth are told apart by
which regression explains the means.

The input file is only ever opened for reading, and identical input
yields identical printed fit numbers.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


class PlotError(Exception):
    """Unusable input: missing columns or no data rows."""


@dataclass(frozen=True)
class PlotSpec:
    """What to read, how to aggregate, and what to draw."""

    csv_path: Path
    out_path: Path
    x: str = "n"
    y: str = "parallel_time"
    group_by: str = "protocol"
    log_x: bool = False
    log_y: bool = False
    reference: str | None = None  # "log" draws c*ln(x), "linear" draws c*x
    reference_c: float = 1.0


@dataclass(frozen=True)
class Series:
    """One group's aggregated points, x ascending."""

    group: str
    xs: tuple[float, ...]
    means: tuple[float, ...]
    mins: tuple[float, ...]
    maxes: tuple[float, ...]


def least_squares(xs, ys):
    """Slope, intercept, and R^2 of the ordinary least-squares line.

    The operation order is a compatibility contract: any consumer that
    fits the same aggregated means must reproduce these doubles exactly.
    """
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    sxx = sum((x - mean_x) ** 2 for x in xs)
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    ss_res = sum((y - (slope * x + intercept)) ** 2 for x, y in zip(xs, ys))
    ss_tot = sum((y - mean_y) ** 2 for y in ys)
    r_squared = 1.0 - ss_res / ss_tot
    return slope, intercept, r_squared


def read_series(spec: PlotSpec) -> list[Series]:
    """Aggregate the table into per-group series (trial means, x ascending)."""
    with open(spec.csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise PlotError(f"{spec.csv_path}: empty file, no header")
        missing = [
            c for c in (spec.x, spec.y, spec.group_by)
            if c not in reader.fieldnames
        ]
        if missing:
            raise PlotError(
                f"{spec.csv_path}: missing column(s) {', '.join(missing)} "
                f"(header has {', '.join(reader.fieldnames)})"
            )
        table: dict[str, dict[float, list[float]]] = {}
        for row in reader:
            group = table.setdefault(row[spec.group_by], {})
            group.setdefault(float(row[spec.x]), []).append(float(row[spec.y]))
    if not table:
        raise PlotError(f"{spec.csv_path}: no data rows")
    series = []
    for group, points in table.items():
        xs = sorted(points)
        trials = [points[x] for x in xs]
        series.append(
            Series(
                group=group,
                xs=tuple(xs),
                means=tuple(sum(ts) / len(ts) for ts in trials),
                mins=tuple(min(ts) for ts in trials),
                maxes=tuple(max(ts) for ts in trials),
            )
        )
    return series


def fit_summary(spec: PlotSpec, series: list[Series]) -> list[str]:
    """Fit lines for each group: means against ln x and against x."""
    lines = []
    for s in series:
        if len(s.xs) < 2:
            lines.append(
                f"fit {s.group}: insufficient points "
                f"({len(s.xs)} distinct {spec.x} value)"
            )
            continue
        slope, intercept, r2 = least_squares(
            [math.log(x) for x in s.xs], list(s.means)
        )
        lines.append(
            f"fit {s.group} vs ln({spec.x}): slope {slope:.6f} "
            f"intercept {intercept:.6f} R^2 {r2:.12f}"
        )
        slope, intercept, r2 = least_squares(list(s.xs), list(s.means))
        lines.append(
            f"fit {s.group} vs {spec.x}: slope {slope:.6g} "
            f"intercept {intercept:.6f} R^2 {r2:.12f}"
        )
    return lines


def _reference_points(spec: PlotSpec, lo: float, hi: float):
    if spec.log_x and lo > 0:
        xs = [lo * (hi / lo) ** (i / 199) for i in range(200)]
    else:
        xs = [lo + (hi - lo) * i / 199 for i in range(200)]
    if spec.reference == "log":
        return xs, [spec.reference_c * math.log(x) for x in xs]
    return xs, [spec.reference_c * x for x in xs]


def render(spec: PlotSpec, series: list[Series]) -> None:
    """Draw mean-with-whiskers per group and save the figure."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for s in series:
        below = [m - lo for m, lo in zip(s.means, s.mins)]
        above = [hi - m for m, hi in zip(s.means, s.maxes)]
        ax.errorbar(
            s.xs, s.means, yerr=[below, above],
            marker="o", capsize=3, label=s.group,
        )
    if spec.reference:
        lo, hi = min(min(s.xs) for s in series), max(max(s.xs) for s in series)
        if lo < hi:
            rx, ry = _reference_points(spec, lo, hi)
            label = (
                f"{spec.reference_c:g}·ln {spec.x}"
                if spec.reference == "log"
                else f"{spec.reference_c:g}·{spec.x}"
            )
            ax.plot(rx, ry, linestyle="--", color="gray", label=label)
    if spec.log_x:
        ax.set_xscale("log")
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel(spec.x)
    ax.set_ylabel(f"mean {spec.y} (min/max whiskers)")
    ax.set_title(spec.csv_path.name)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.out_path, dpi=150)
    plt.close(fig)


def plot_scaling(spec: PlotSpec) -> list[str]:
    """Aggregate, render to spec.out_path, and return the fit summary."""
    series = read_series(spec)
    render(spec, series)
    return fit_summary(spec, series)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="popproto-plots", description=__doc__.splitlines()[0]
    )
    parser.add_argument("csv_path", type=Path)
    parser.add_argument("out_path", type=Path)
    parser.add_argument("--x", default="n")
    parser.add_argument("--y", default="parallel_time")
    parser.add_argument("--group-by", default="protocol")
    parser.add_argument("--log-x", action="store_true")
    parser.add_argument("--log-y", action="store_true")
    parser.add_argument("--reference", choices=("log", "linear"))
    parser.add_argument("--reference-c", type=float, default=1.0)
    args = parser.parse_args(argv)
    spec = PlotSpec(
        csv_path=args.csv_path,
        out_path=args.out_path,
        x=args.x,
        y=args.y,
        group_by=args.group_by,
        log_x=args.log_x,
        log_y=args.log_y,
        reference=args.reference,
        reference_c=args.reference_c,
    )
    try:
        summary = plot_scaling(spec)
    except (PlotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for line in summary:
        print(line)
    print(f"wrote {spec.out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
