#!/usr/bin/env python3
"""Render figures from a sweep-results CSV.

One invocation draws one figure family: a chosen results column against
the number of rounds R, one line per value of the grouping column (K or
n), with error bars when the column has a matching std.  Output is a
fixed-DPI PNG with timestamp metadata suppressed, so re-rendering the
same CSV reproduces the same bytes.

    python plot_sweep.py --csv sweep.csv --y gen_mean --group-by K --out gen.png
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

CSV_HEADER = "K,R,n,M,theta,q,B,heterogeneous,seed,gen_mean,gen_std,emp_mean,pop_mean,bound_t5"
COLUMNS = CSV_HEADER.split(",")
Y_CHOICES = ("gen_mean", "bound_t5", "emp_mean", "pop_mean")
GROUP_CHOICES = ("K", "n")
ERROR_BARS = {"gen_mean": "gen_std"}

Y_LABELS = {
    "gen_mean": "generalization error",
    "bound_t5": "generalization bound",
    "emp_mean": "empirical margin risk",
    "pop_mean": "population risk",
}

DPI = 120


class SchemaError(ValueError):
    """CSV header or figure columns do not match the sweep schema."""


@dataclass(frozen=True)
class FigureSpec:
    csv: str
    y: str
    group_by: str
    out: str

    def __post_init__(self):
        if self.y not in Y_CHOICES:
            raise SchemaError(f"unknown y column '{self.y}', expected one of {Y_CHOICES}")
        if self.group_by not in GROUP_CHOICES:
            raise SchemaError(
                f"unknown group column '{self.group_by}', expected one of {GROUP_CHOICES}"
            )


def read_rows(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as f:
        lines = [line.rstrip("\n") for line in f if line.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise SchemaError(f"bad header in {path}: expected '{CSV_HEADER}'")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(COLUMNS):
            raise SchemaError(f"{path} line {lineno}: expected {len(COLUMNS)} fields")
        row = dict(zip(COLUMNS, parts))
        for key in ("K", "R", "n", "M"):
            row[key] = int(row[key])
        for key in ("theta", "q", "B", "gen_mean", "gen_std", "emp_mean", "pop_mean", "bound_t5"):
            row[key] = float(row[key])
        rows.append(row)
    return rows


def render(spec: FigureSpec) -> int:
    """Draw the figure; returns the number of lines (group values)."""
    rows = read_rows(spec.csv)
    groups = sorted({row[spec.group_by] for row in rows})
    err_col = ERROR_BARS.get(spec.y)

    fig, ax = plt.subplots(figsize=(5.0, 3.4), dpi=DPI)
    for value in groups:
        series = sorted(
            (row for row in rows if row[spec.group_by] == value),
            key=lambda row: row["R"],
        )
        xs = [row["R"] for row in series]
        ys = [row[spec.y] for row in series]
        if err_col is not None:
            errs = [row[err_col] / max(row["M"], 1) ** 0.5 for row in series]
            ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3,
                        label=f"{spec.group_by}={value}")
        else:
            ax.plot(xs, ys, marker="o", label=f"{spec.group_by}={value}")
    ax.set_xlabel("rounds R")
    ax.set_ylabel(Y_LABELS[spec.y])
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=DPI, metadata={"Software": None})
    plt.close(fig)
    return len(groups)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--csv", required=True, help="sweep results CSV")
    parser.add_argument("--y", required=True, choices=Y_CHOICES, help="column to plot")
    parser.add_argument("--group-by", required=True, choices=GROUP_CHOICES,
                        help="one line per value of this column")
    parser.add_argument("--out", required=True, help="output PNG path")
    args = parser.parse_args(argv)
    try:
        count = render(FigureSpec(csv=args.csv, y=args.y, group_by=args.group_by, out=args.out))
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"lines={count} out={args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
