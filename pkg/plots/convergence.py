#!/usr/bin/env python3
"""Retrieval-dynamics figure: mean W2 to the originals per iteration, one
curve per (beta, multiplier), +-1 std bands, dotted red line at 1e-6."""

import sys

import numpy as np

from plot_common import base_parser, read_rows, run_script, save_png
import matplotlib.pyplot as plt

COLUMNS = ("beta", "multiplier", "iteration", "mean_w2", "std_w2",
           "frac_below_tol")

THRESHOLD = 1e-6


def load(path):
    """Curves keyed by (beta, multiplier): (iterations, means, stds)."""
    _, rows = read_rows(path, COLUMNS)
    curves = {}
    for row in rows:
        beta, mult = float(row[0]), float(row[1])
        curves.setdefault((beta, mult), []).append(
            (int(row[2]), float(row[3]), float(row[4]))
        )
    return {
        key: tuple(np.array(v) for v in zip(*sorted(pts)))
        for key, pts in curves.items()
    }


def render(argv=None) -> int:
    args = base_parser(__doc__).parse_args(argv)
    curves = load(args.input)
    fig, ax = plt.subplots(figsize=(7, 5))
    for (beta, mult), (its, means, stds) in sorted(curves.items()):
        line, = ax.plot(its, means, marker="o",
                        label=f"beta={beta:g}, r x{mult:g}")
        lo = np.maximum(means - stds, 1e-300)
        ax.fill_between(its, lo, means + stds, alpha=0.2,
                        color=line.get_color())
    ax.axhline(THRESHOLD, color="red", linestyle=":", linewidth=1.2,
               label="threshold 1e-6")
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean W2 to original")
    ax.set_title(args.title or "Retrieval dynamics")
    if curves:
        ax.legend(fontsize=8)
    save_png(fig, args.output)
    return 0


if __name__ == "__main__":
    sys.exit(run_script(render))
