"""Bank and query file formats (JSON, schema_version 1).

Commuting banks store the shared basis plus per-pattern spectra, which is
compact and reconstructs the fast path exactly; general banks store dense
covariances. Floats serialize through repr, so save -> load -> save is
byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ParseError
from .geometry import CommutingFamily, GaussianMeasure
from .memory import MemoryBank

SCHEMA_VERSION = 1


def _matrix(a: np.ndarray) -> list[list[float]]:
    return [[float(x) for x in row] for row in np.asarray(a)]


def _vector(a: np.ndarray) -> list[float]:
    return [float(x) for x in np.asarray(a)]


def bank_to_dict(bank: MemoryBank) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "dim": bank.dim,
        "beta": bank.beta,
        "basis": _matrix(bank.family.basis) if bank.family is not None else None,
    }
    if bank.family is not None:
        doc["patterns"] = [
            {"mean": _vector(bank.family.means[i]),
             "spectrum": _vector(bank.family.spectra[i])}
            for i in range(bank.n)
        ]
    else:
        doc["patterns"] = [
            {"mean": _vector(bank.means[i]), "cov": _matrix(bank.covs[i])}
            for i in range(bank.n)
        ]
    return doc


def save_bank(bank: MemoryBank, path: str | Path) -> None:
    with open(path, "w") as f:
        json.dump(bank_to_dict(bank), f)
        f.write("\n")


def bank_from_dict(doc: dict) -> MemoryBank:
    try:
        if doc["schema_version"] != SCHEMA_VERSION:
            raise ParseError(f"unsupported schema_version {doc['schema_version']}")
        dim = int(doc["dim"])
        beta = float(doc["beta"])
        basis = doc.get("basis")
        patterns = doc["patterns"]
        if basis is not None:
            means = np.array([p["mean"] for p in patterns], dtype=float)
            spectra = np.array([p["spectrum"] for p in patterns], dtype=float)
            if means.shape[1] != dim:
                raise ParseError("pattern dimension does not match header dim")
            family = CommutingFamily(
                basis=np.array(basis, dtype=float), spectra=spectra, means=means
            )
            return MemoryBank.from_family(family, beta=beta)
        measures = [
            GaussianMeasure(
                mean=np.array(p["mean"], dtype=float),
                cov=np.array(p["cov"], dtype=float),
            )
            for p in patterns
        ]
        if measures and measures[0].dim != dim:
            raise ParseError("pattern dimension does not match header dim")
        return MemoryBank(measures, beta=beta)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed bank file: {exc}") from exc


def load_bank(path: str | Path) -> MemoryBank:
    with open(path, "r") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bank file is not valid JSON: {exc}", line=exc.lineno)
    return bank_from_dict(doc)


def save_queries(
    measures: list[GaussianMeasure],
    path: str | Path,
    original_indices: list[int] | None = None,
    basis: np.ndarray | None = None,
    spectra: np.ndarray | None = None,
) -> None:
    """Persist query measures; spectra+basis form when they live in a family."""
    entries = []
    for k, m in enumerate(measures):
        entry: dict = {"mean": _vector(m.mean)}
        if spectra is not None:
            entry["spectrum"] = _vector(spectra[k])
        else:
            entry["cov"] = _matrix(m.cov)
        entry["original_index"] = (
            int(original_indices[k]) if original_indices is not None else None
        )
        entries.append(entry)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "dim": measures[0].dim if measures else 0,
        "basis": _matrix(basis) if basis is not None else None,
        "queries": entries,
    }
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_queries(path: str | Path) -> tuple[list[GaussianMeasure], list[int | None]]:
    with open(path, "r") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ParseError(f"query file is not valid JSON: {exc}", line=exc.lineno)
    try:
        if doc["schema_version"] != SCHEMA_VERSION:
            raise ParseError(f"unsupported schema_version {doc['schema_version']}")
        basis = doc.get("basis")
        u = np.array(basis, dtype=float) if basis is not None else None
        measures = []
        originals = []
        for entry in doc["queries"]:
            mean = np.array(entry["mean"], dtype=float)
            if "spectrum" in entry:
                if u is None:
                    raise ParseError("query stores a spectrum but no basis present")
                spec = np.array(entry["spectrum"], dtype=float)
                cov = (u * spec) @ u.T
                cov = 0.5 * (cov + cov.T)
            else:
                cov = np.array(entry["cov"], dtype=float)
            measures.append(GaussianMeasure(mean=mean, cov=cov))
            originals.append(entry.get("original_index"))
        return measures, originals
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed query file: {exc}") from exc
