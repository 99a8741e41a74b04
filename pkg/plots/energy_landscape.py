#!/usr/bin/env python3
"""Energy landscape over (mu, sigma) for a one-dimensional bank, with the
stored patterns overlaid as red dots (read from the sidecar CSV when present)."""

import sys
from pathlib import Path

import numpy as np

from plot_common import base_parser, read_rows, run_script, save_png
import matplotlib.pyplot as plt

COLUMNS = ("mu", "sigma", "energy")
SIDECAR_COLUMNS = ("mu", "sigma")


def load(path):
    """(mus, sigmas, energy matrix, pattern list). Patterns may be empty."""
    _, rows = read_rows(path, COLUMNS)
    data = np.array([[float(c) for c in row] for row in rows])
    patterns = []
    sidecar = Path(str(path) + ".patterns.csv")
    if sidecar.exists():
        _, prows = read_rows(sidecar, SIDECAR_COLUMNS)
        patterns = [(float(r[0]), float(r[1])) for r in prows]
    if data.size == 0:
        return np.array([]), np.array([]), np.zeros((0, 0)), patterns
    mus = np.unique(data[:, 0])
    sigmas = np.unique(data[:, 1])
    energy = data[:, 2].reshape(mus.size, sigmas.size)
    return mus, sigmas, energy, patterns


def render(argv=None) -> int:
    args = base_parser(__doc__).parse_args(argv)
    mus, sigmas, energy, patterns = load(args.input)
    fig, ax = plt.subplots(figsize=(6, 5))
    if energy.size:
        mesh = ax.pcolormesh(mus, sigmas, energy.T, shading="nearest",
                             cmap="viridis")
        fig.colorbar(mesh, ax=ax, label="energy")
    if patterns:
        ax.plot([p[0] for p in patterns], [p[1] for p in patterns], "o",
                color="red", markersize=5, label="stored patterns")
        ax.legend(fontsize=8)
    ax.set_xlabel("mu")
    ax.set_ylabel("sigma")
    ax.set_title(args.title or "Energy landscape")
    save_png(fig, args.output)
    return 0


if __name__ == "__main__":
    sys.exit(run_script(render))
