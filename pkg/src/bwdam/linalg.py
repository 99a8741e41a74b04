"""Dense symmetric/SPD matrix kernels: eigendecomposition, square roots,
inverse square roots and a commutator test.

Everything operates on plain float64 numpy arrays. Inputs are symmetrized
(m + m^T)/2 before decomposition to absorb accumulation error from products
like A @ Omega @ A^T that drift from exact symmetry.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NotPositiveDefinite, NumericError, SymmetryViolation

# Relative floor for positive definiteness: eigenvalues below
# EPS_PD * max(|eigenvalue|) are rejected rather than clamped.
EPS_PD = 1e-10

SYMMETRY_RTOL = 1e-12


def as_square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] < 1:
        raise DimensionError(f"{name} must have dim >= 1")
    return a


def check_symmetric(m: np.ndarray, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Validate symmetry within rtol * maxabs and return the array."""
    a = as_square(m)
    if not np.all(np.isfinite(a)):
        raise NumericError("matrix has non-finite entries")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale == 0.0:
        return a
    if np.max(np.abs(a - a.T)) > rtol * scale:
        raise SymmetryViolation(
            f"matrix is not symmetric: max asymmetry {np.max(np.abs(a - a.T)):.3e} "
            f"exceeds {rtol:.1e} * maxabs"
        )
    return a


def symmetrize(m: np.ndarray) -> np.ndarray:
    a = as_square(m)
    return 0.5 * (a + a.T)


def sym_eig(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns (eigenvalues ascending, orthonormal eigenvector columns) such that
    U @ diag(w) @ U.T reconstructs the input.
    """
    a = check_symmetric(m)
    w, u = np.linalg.eigh(symmetrize(a))
    return w, u


def spd_eig(m: np.ndarray, eps_pd: float = EPS_PD) -> tuple[np.ndarray, np.ndarray]:
    """sym_eig plus a positive-definiteness gate relative to the top eigenvalue."""
    w, u = sym_eig(m)
    floor = eps_pd * max(abs(w[0]), abs(w[-1]))
    if w[0] <= floor:
        raise NotPositiveDefinite(
            f"matrix is not positive definite: smallest eigenvalue {w[0]:.6e} "
            f"<= {floor:.6e}",
            eigenvalue=float(w[0]),
        )
    return w, u


def spd_sqrt(m: np.ndarray, eps_pd: float = EPS_PD) -> np.ndarray:
    w, u = spd_eig(m, eps_pd)
    return (u * np.sqrt(w)) @ u.T


def spd_invsqrt(m: np.ndarray, eps_pd: float = EPS_PD) -> np.ndarray:
    w, u = spd_eig(m, eps_pd)
    return (u / np.sqrt(w)) @ u.T


def spd_sqrt_invsqrt(m: np.ndarray, eps_pd: float = EPS_PD) -> tuple[np.ndarray, np.ndarray]:
    """Both spd_sqrt(m) and spd_invsqrt(m) from one decomposition."""
    w, u = spd_eig(m, eps_pd)
    s = np.sqrt(w)
    return (u * s) @ u.T, (u / s) @ u.T


def is_commuting(a: np.ndarray, b: np.ndarray, tol: float = 1e-10) -> bool:
    """True iff ||ab - ba||_F <= tol * ||a||_F * ||b||_F."""
    a = as_square(a, "a")
    b = as_square(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    comm = a @ b - b @ a
    return float(np.linalg.norm(comm)) <= tol * float(np.linalg.norm(a)) * float(
        np.linalg.norm(b)
    )

