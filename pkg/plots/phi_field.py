#!/usr/bin/env python3
"""Displacement heatmap W2(query, updated query) over a grid of query means,
with mean-displacement arrows at every second grid point and one weight-map
panel per stored pattern (the red pattern markers come from the weight peaks
only when pattern positions are not encoded in the CSV)."""

import sys

import numpy as np

from plot_common import base_parser, read_rows, run_script, save_png
import matplotlib.pyplot as plt

# w_* expands to w_1..w_N in the file.
COLUMNS = ("x", "y", "displacement", "w_", "dx", "dy")


def load(path):
    """(xs, ys, displacement grid, weight grids (N, nx, ny), dx grid, dy grid)."""
    header, rows = read_rows(path, COLUMNS, prefix_wildcard="w_")
    w_cols = [i for i, c in enumerate(header) if c.startswith("w_")]
    data = np.array([[float(c) for c in row] for row in rows])
    if data.size == 0:
        return (np.array([]),) * 6
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    nx, ny = xs.size, ys.size
    disp = data[:, 2].reshape(nx, ny)
    weights = np.array([data[:, i].reshape(nx, ny) for i in w_cols])
    dxg = data[:, w_cols[-1] + 1].reshape(nx, ny)
    dyg = data[:, w_cols[-1] + 2].reshape(nx, ny)
    return xs, ys, disp, weights, dxg, dyg


def render(argv=None) -> int:
    args = base_parser(__doc__).parse_args(argv)
    xs, ys, disp, weights, dxg, dyg = load(args.input)
    n_w = len(weights) if np.size(weights) else 0
    cols = max(n_w, 1)
    fig = plt.figure(figsize=(2.2 * cols + 3, 7))
    gs = fig.add_gridspec(2, cols, height_ratios=[2.2, 1])

    ax = fig.add_subplot(gs[0, :])
    if np.size(disp):
        mesh = ax.pcolormesh(xs, ys, disp.T, shading="nearest", cmap="magma")
        fig.colorbar(mesh, ax=ax, label="W2(query, updated query)")
        ax.contour(xs, ys, disp.T, colors="white", linewidths=0.4, alpha=0.6)
        step = 2
        gx, gy = np.meshgrid(xs[::step], ys[::step], indexing="ij")
        ax.quiver(gx, gy, dxg[::step, ::step], dyg[::step, ::step],
                  color="deepskyblue", width=0.003)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(args.title or "Update displacement field")

    for i in range(n_w):
        sub = fig.add_subplot(gs[1, i])
        sub.pcolormesh(xs, ys, weights[i].T, shading="nearest", cmap="viridis",
                       vmin=0.0, vmax=1.0)
        sub.set_title(f"w_{i + 1}", fontsize=8)
        sub.set_xticks([])
        sub.set_yticks([])
    save_png(fig, args.output)
    return 0


if __name__ == "__main__":
    sys.exit(run_script(render))
