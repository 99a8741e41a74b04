"""Gaussian measures and the Bures-Wasserstein geometry.

Distances, optimal transport maps, pushforwards, geodesics and the L2 inner
product that drives the separation condition. A `CommutingFamily` carries a
shared orthogonal eigenbasis so that banks of covariances that commute
pairwise get O(d) spectral formulas instead of O(d^3) dense kernels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import (
    DegenerateResult,
    DimensionError,
    DomainError,
    NotPositiveDefinite,
    NumericError,
)

# Off-diagonal mass (relative to the largest diagonal entry) below which a
# covariance expressed in a family basis counts as a member of the family.
FAMILY_DIAG_RTOL = 1e-9


@dataclass(frozen=True)
class GaussianMeasure:
    """A Gaussian N(mean, cov) with SPD covariance; the atom of the system."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        if mean.ndim != 1:
            raise DimensionError(f"mean must be a vector, got shape {mean.shape}")
        if not np.all(np.isfinite(mean)):
            raise NumericError("mean has non-finite entries")
        cov = linalg.check_symmetric(self.cov)
        if cov.shape[0] != mean.shape[0]:
            raise DimensionError(
                f"mean dim {mean.shape[0]} != cov dim {cov.shape[0]}"
            )
        w = np.linalg.eigvalsh(linalg.symmetrize(cov))
        floor = linalg.EPS_PD * max(abs(w[0]), abs(w[-1]))
        if w[0] <= floor:
            raise NotPositiveDefinite(
                f"covariance is not positive definite (min eigenvalue {w[0]:.6e})",
                eigenvalue=float(w[0]),
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", linalg.symmetrize(cov))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class AffineMap:
    """x -> matrix @ x + shift. OT maps produced here have SPD matrices."""

    matrix: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        m = linalg.as_square(self.matrix, "map matrix")
        s = np.asarray(self.shift, dtype=float)
        if s.ndim != 1 or s.shape[0] != m.shape[0]:
            raise DimensionError("shift incompatible with map matrix")
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(s))):
            raise NumericError("affine map has non-finite entries")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "shift", s)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Apply the map to one point (d,) or a batch (n, d)."""
        x = np.asarray(x, dtype=float)
        return x @ self.matrix.T + self.shift


def _check_dims(p: GaussianMeasure, q: GaussianMeasure):
    if p.dim != q.dim:
        raise DimensionError(f"dimension mismatch: {p.dim} vs {q.dim}")


def bures_trace_term(cov_p: np.ndarray, cov_q: np.ndarray) -> float:
    """Tr(S_p + S_q - 2 (S_p^{1/2} S_q S_p^{1/2})^{1/2}), cancellation-free.

    Equal to min over orthogonal O of ||sqrt(cov_p) - sqrt(cov_q) O||_F^2 with
    the minimizer read off an SVD; computing it as a squared norm keeps full
    precision when the covariances nearly coincide, where the subtraction form
    loses everything to roundoff.
    """
    sp = linalg.spd_sqrt(cov_p)
    sq = linalg.spd_sqrt(cov_q)
    u, _, vt = np.linalg.svd(sq @ sp)
    diff = sp - sq @ (u @ vt)
    return float(np.sum(diff * diff))


def bures_w2_squared(p: GaussianMeasure, q: GaussianMeasure) -> float:
    """Squared 2-Wasserstein distance between two Gaussians.

    ||mu_p - mu_q||^2 + Tr(S_p + S_q - 2 (S_p^{1/2} S_q S_p^{1/2})^{1/2}).
    """
    _check_dims(p, q)
    mean_part = float(np.sum((p.mean - q.mean) ** 2))
    return mean_part + bures_trace_term(p.cov, q.cov)


def bures_w2(p: GaussianMeasure, q: GaussianMeasure) -> float:
    return float(np.sqrt(bures_w2_squared(p, q)))


def dirac_w2_squared(p: GaussianMeasure) -> float:
    """Squared W2 distance to the Dirac at the origin: ||mu||^2 + Tr(Sigma)."""
    return float(np.sum(p.mean ** 2) + np.trace(p.cov))


def spectral_w2_squared(
    mean_p: np.ndarray,
    sqrt_spec_p: np.ndarray,
    mean_q: np.ndarray,
    sqrt_spec_q: np.ndarray,
) -> float:
    """W2^2 for two members of one commuting family, O(d).

    Means may be given in any fixed orthonormal coordinates; sqrt_spec are the
    square roots of the eigenvalues in the shared basis order.
    """
    return float(
        np.sum((mean_p - mean_q) ** 2) + np.sum((sqrt_spec_p - sqrt_spec_q) ** 2)
    )


def ot_map(source: GaussianMeasure, target: GaussianMeasure) -> AffineMap:
    """Unique affine OT map T(x) = mu_t + A (x - mu_s) pushing source to target.

    A = S_t^{1/2} (S_t^{1/2} S_s S_t^{1/2})^{-1/2} S_t^{1/2}, which equals the
    S_s^{-1/2} (S_s^{1/2} S_t S_s^{1/2})^{1/2} S_s^{-1/2} form for SPD inputs.
    """
    _check_dims(source, target)
    st = linalg.spd_sqrt(target.cov)
    inner = linalg.symmetrize(st @ source.cov @ st)
    a = linalg.symmetrize(st @ linalg.spd_invsqrt(inner) @ st)
    return AffineMap(matrix=a, shift=target.mean - a @ source.mean)


def push_forward_affine(mapping: AffineMap, p: GaussianMeasure) -> GaussianMeasure:
    """Pushforward of N(m, S) through x -> Cx + b: N(Cm + b, C S C^T)."""
    c = mapping.matrix
    if c.shape[0] != p.dim:
        raise DimensionError("map dimension does not match measure")
    mean = c @ p.mean + mapping.shift
    cov = linalg.symmetrize(c @ p.cov @ c.T)
    try:
        return GaussianMeasure(mean=mean, cov=cov)
    except NotPositiveDefinite as exc:
        raise DegenerateResult(
            f"pushforward covariance lost positive-definiteness: {exc}"
        ) from exc


def neg_log_l2_inner(p: GaussianMeasure, q: GaussianMeasure) -> float:
    """-log <p, q>_{L2} for Gaussian densities.

    (d/2) log(2*pi) + (1/2) log|S_p + S_q| + (1/2) dm^T (S_p + S_q)^{-1} dm.
    """
    _check_dims(p, q)
    d = p.dim
    s = p.cov + q.cov
    sign, logdet = np.linalg.slogdet(s)
    if sign <= 0:
        raise NotPositiveDefinite("sum of covariances is not positive definite")
    dm = p.mean - q.mean
    quad = float(dm @ np.linalg.solve(s, dm))
    return 0.5 * d * np.log(2.0 * np.pi) + 0.5 * float(logdet) + 0.5 * quad


def geodesic(p: GaussianMeasure, q: GaussianMeasure, t: float) -> GaussianMeasure:
    """McCann interpolation: pushforward of p through (1-t) Id + t * ot_map(p, q)."""
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"geodesic parameter t={t} outside [0, 1]")
    if t == 0.0:
        return p
    if t == 1.0:
        return q
    a = ot_map(p, q).matrix
    d = p.dim
    b = (1.0 - t) * np.eye(d) + t * a
    mean = (1.0 - t) * p.mean + t * q.mean
    cov = linalg.symmetrize(b @ p.cov @ b.T)
    return GaussianMeasure(mean=mean, cov=cov)


@dataclass(frozen=True)
class CommutingFamily:
    """A set of Gaussians whose covariances share one orthogonal eigenbasis.

    spectra[i] holds the eigenvalues of member i in the basis column order;
    means[i] its mean in ambient coordinates.
    """

    basis: np.ndarray      # (d, d) orthogonal
    spectra: np.ndarray    # (n, d) strictly positive
    means: np.ndarray      # (n, d)
    _means_in_basis: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        u = linalg.as_square(self.basis, "basis")
        d = u.shape[0]
        if np.max(np.abs(u.T @ u - np.eye(d))) > 1e-9:
            raise NumericError("family basis is not orthogonal within 1e-9")
        spectra = np.asarray(self.spectra, dtype=float)
        means = np.asarray(self.means, dtype=float)
        if spectra.ndim != 2 or spectra.shape[1] != d:
            raise DimensionError(f"spectra must be (n, {d}), got {spectra.shape}")
        if means.shape != spectra.shape:
            raise DimensionError("means and spectra must have matching shapes")
        if not np.all(spectra > 0.0):
            raise NotPositiveDefinite(
                "family spectra must be strictly positive",
                eigenvalue=float(spectra.min()),
            )
        if not (np.all(np.isfinite(spectra)) and np.all(np.isfinite(means))):
            raise NumericError("family has non-finite entries")
        object.__setattr__(self, "basis", u)
        object.__setattr__(self, "spectra", spectra)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "_means_in_basis", means @ u)

    @property
    def n(self) -> int:
        return self.spectra.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def means_in_basis(self) -> np.ndarray:
        """Means expressed in basis coordinates (rows: U^T mu_i)."""
        return self._means_in_basis

    def member_cov(self, i: int) -> np.ndarray:
        u = self.basis
        return linalg.symmetrize((u * self.spectra[i]) @ u.T)

    def member(self, i: int) -> GaussianMeasure:
        return GaussianMeasure(mean=self.means[i], cov=self.member_cov(i))

    def members(self) -> list[GaussianMeasure]:
        return [self.member(i) for i in range(self.n)]

    def coordinates_of(self, p: GaussianMeasure) -> tuple[np.ndarray, np.ndarray] | None:
        """(mean in basis coords, spectrum) if p's covariance lives in the basis.

        Returns None when the covariance has off-diagonal mass in the basis
        beyond FAMILY_DIAG_RTOL, i.e. the measure does not commute with the
        family.
        """
        if p.dim != self.dim:
            raise DimensionError("measure dimension does not match family")
        t = self.basis.T @ p.cov @ self.basis
        diag = np.diag(t).copy()
        off = t - np.diag(diag)
        if np.max(np.abs(off)) > FAMILY_DIAG_RTOL * float(np.max(np.abs(diag))):
            return None
        if np.any(diag <= 0.0):
            return None
        return self.basis.T @ p.mean, diag

    def measure_from_coordinates(
        self, mean_in_basis: np.ndarray, spectrum: np.ndarray
    ) -> GaussianMeasure:
        u = self.basis
        return GaussianMeasure(
            mean=u @ np.asarray(mean_in_basis, dtype=float),
            cov=linalg.symmetrize((u * np.asarray(spectrum, dtype=float)) @ u.T),
        )
