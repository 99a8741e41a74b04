"""Shared plumbing for the figure scripts: strict CSV schema checks, argument
parsing and deterministic PNG output.

The scripts never recompute any math; every plotted value comes from the CSV.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


class SchemaMismatch(Exception):
    def __init__(self, expected, found):
        self.expected = list(expected)
        self.found = list(found)
        missing = [c for c in expected if c not in found]
        extra = [c for c in found if c not in expected]
        super().__init__(
            f"CSV columns do not match: missing {missing}, unexpected {extra}; "
            f"expected {list(expected)}, found {list(found)}"
        )


def read_rows(path: str | Path, expected_columns, prefix_wildcard: str | None = None):
    """Read a CSV and validate the header.

    expected_columns are required in order; when prefix_wildcard is given,
    any run of columns starting with that prefix is accepted in place of the
    single placeholder entry equal to the wildcard.
    """
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(expected_columns, [])
        rows = [row for row in reader if row]
    if prefix_wildcard is None:
        if header != list(expected_columns):
            raise SchemaMismatch(expected_columns, header)
    else:
        fixed_head = [c for c in expected_columns if c != prefix_wildcard]
        stripped = [c for c in header if not c.startswith(prefix_wildcard)]
        wild = [c for c in header if c.startswith(prefix_wildcard)]
        if stripped != fixed_head or not wild:
            raise SchemaMismatch(expected_columns, header)
    return header, rows


def base_parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--in", dest="input", required=True, help="input CSV")
    p.add_argument("--out", dest="output", required=True, help="output PNG")
    p.add_argument("--title", default=None)
    return p


def save_png(fig, out: str | Path) -> None:
    """Write the figure with stable bytes: fixed dpi, no metadata."""
    fig.savefig(out, dpi=110, metadata={"Software": None})
    plt.close(fig)


def run_script(render_fn, argv=None) -> int:
    try:
        return render_fn(argv)
    except SchemaMismatch as exc:
        sys.stderr.write(f"schema mismatch: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return 3
