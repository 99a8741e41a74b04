#!/usr/bin/env python3
"""Word-retrieval dynamics: per-word W2 distance to the original embedding
over iterations (log scale) and a table of the retrieved word per iteration."""

import sys

import numpy as np

from plot_common import base_parser, read_rows, run_script, save_png
import matplotlib.pyplot as plt

COLUMNS = ("word", "iteration", "w2_to_original", "retrieved_word")


def load(path):
    """Per-word trajectories: {word: (iterations, distances, retrieved words)}."""
    _, rows = read_rows(path, COLUMNS)
    series = {}
    for word, it, dist, retrieved in rows:
        series.setdefault(word, []).append((int(it), float(dist), retrieved))
    out = {}
    for word, pts in series.items():
        pts.sort()
        its = np.array([p[0] for p in pts])
        dists = np.array([p[1] for p in pts])
        retrieved = [p[2] for p in pts]
        out[word] = (its, dists, retrieved)
    return out


def render(argv=None) -> int:
    args = base_parser(__doc__).parse_args(argv)
    series = load(args.input)
    n_rows = 2 if series else 1
    fig, axes = plt.subplots(
        n_rows, 1, figsize=(7, 5.5),
        gridspec_kw={"height_ratios": [3, 1] if series else [1]},
    )
    ax = axes[0] if series else axes
    for word in sorted(series):
        its, dists, _ = series[word]
        ax.plot(its, np.maximum(dists, 1e-300), marker="o", label=word)
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("W2 to original")
    ax.set_title(args.title or "Word retrieval dynamics")
    if series:
        ax.legend(fontsize=7)
        table_ax = axes[1]
        table_ax.axis("off")
        words = sorted(series)
        n_iters = max(len(series[w][0]) for w in words)
        cell_text = []
        for w in words:
            retrieved = series[w][2]
            cell_text.append(retrieved + [""] * (n_iters - len(retrieved)))
        table = table_ax.table(
            cellText=cell_text,
            rowLabels=words,
            colLabels=[str(k) for k in range(n_iters)],
            loc="center",
        )
        table.auto_set_font_size(False)
        table.set_fontsize(6)
    save_png(fig, args.output)
    return 0


if __name__ == "__main__":
    sys.exit(run_script(render))
