#!/usr/bin/env python3
"""Retrieval success rate versus temperature: markers at the exact CSV values
connected by a step curve, log-scaled beta axis."""

import sys

import numpy as np

from plot_common import base_parser, read_rows, run_script, save_png
import matplotlib.pyplot as plt

COLUMNS = ("beta", "success_rate")


def load(path):
    _, rows = read_rows(path, COLUMNS)
    pts = sorted((float(r[0]), float(r[1])) for r in rows)
    if not pts:
        return np.array([]), np.array([])
    betas, rates = zip(*pts)
    return np.array(betas), np.array(rates)


def render(argv=None) -> int:
    args = base_parser(__doc__).parse_args(argv)
    betas, rates = load(args.input)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if betas.size:
        ax.step(betas, rates, where="mid", color="tab:blue")
        ax.plot(betas, rates, "o", color="tab:blue")
        ax.set_xscale("log")
    ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel("beta")
    ax.set_ylabel("success rate")
    ax.set_title(args.title or "Retrieval success rate vs beta")
    save_png(fig, args.output)
    return 0


if __name__ == "__main__":
    sys.exit(run_script(render))
