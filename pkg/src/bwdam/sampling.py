"""Random generation of pattern banks on Wasserstein spheres and exact-radius
query perturbation.

All randomness flows through explicit numpy Generators seeded from the config;
no ambient entropy, so identical seeds give bit-identical banks. Parallel
callers derive independent child streams via SeedSequence spawning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    BinarySearchFailed,
    DimensionError,
    NumericError,
    RejectionBudgetExceeded,
)
from .geometry import CommutingFamily, GaussianMeasure, bures_w2_squared

REJECTION_BUDGET = 1_000_000
BISECTION_STEPS = 200


@dataclass(frozen=True)
class SphereConfig:
    """Parameters of a commuting bank on the Wasserstein sphere of radius R."""

    radius_r: float
    n: int
    lambda_min: float
    lambda_max: float
    dim: int
    seed: int = 0

    def __post_init__(self):
        if self.lambda_min <= 0 or not self.lambda_min < self.lambda_max:
            raise NumericError(
                f"need 0 < lambda_min < lambda_max, got [{self.lambda_min}, {self.lambda_max}]"
            )
        if self.n < 1 or self.dim < 1:
            raise NumericError("n and dim must be positive")
        if self.radius_r <= 0:
            raise NumericError("radius must be positive")
        target = 0.5 * self.radius_r**2
        if not (self.dim * self.lambda_min < target < self.dim * self.lambda_max):
            raise NumericError(
                f"empty eigenvalue polytope: need d*lambda_min < R^2/2 < d*lambda_max, "
                f"got {self.dim * self.lambda_min} < {target} < {self.dim * self.lambda_max}"
            )

    @classmethod
    def for_eigenvalue_band(
        cls, dim: int, n: int, lambda_min: float, lambda_max: float, seed: int = 0
    ) -> "SphereConfig":
        """Radius R = sqrt(d (lambda_min + lambda_max)), the sampled-sphere default."""
        return cls(
            radius_r=float(np.sqrt(dim * (lambda_min + lambda_max))),
            n=n,
            lambda_min=lambda_min,
            lambda_max=lambda_max,
            dim=dim,
            seed=seed,
        )


@dataclass(frozen=True)
class PerturbSpec:
    """Target W2 displacement r with a mean/covariance budget split."""

    radius_r: float
    mean_budget_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.radius_r < 0:
            raise NumericError("perturbation radius must be >= 0")
        if not 0.0 <= self.mean_budget_fraction <= 1.0:
            raise NumericError("mean_budget_fraction must lie in [0, 1]")


def sample_sphere_uniform(d: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform point on the sphere of the given radius in R^d."""
    if d < 1 or radius <= 0:
        raise NumericError("need d >= 1 and radius > 0")
    while True:
        v = rng.standard_normal(d)
        norm = float(np.linalg.norm(v))
        if norm > 0.0:
            return (v / norm) * radius


def sample_polytope_eigs(
    d: int,
    target_sum: float,
    lambda_min: float,
    lambda_max: float,
    rng: np.random.Generator,
    budget: int = REJECTION_BUDGET,
) -> np.ndarray:
    """Eigenvalues in [lambda_min, lambda_max] summing to target_sum.

    Rejection scheme: draw d-1 uniforms, complete the last coordinate from the
    sum constraint, retry until it lands in range, then randomly permute to
    remove the positional bias of the completed coordinate.
    """
    if not lambda_min * d <= target_sum <= lambda_max * d:
        raise RejectionBudgetExceeded(
            f"no eigenvalue vector in [{lambda_min}, {lambda_max}]^{d} sums to {target_sum}"
        )
    if d == 1:
        return np.array([target_sum])
    block = 64
    attempts = 0
    while attempts < budget:
        draws = rng.uniform(lambda_min, lambda_max, size=(block, d - 1))
        last = target_sum - draws.sum(axis=1)
        ok = np.nonzero((last >= lambda_min) & (last <= lambda_max))[0]
        if ok.size:
            i = int(ok[0])
            eigs = np.concatenate([draws[i], [last[i]]])
            return rng.permutation(eigs)
        attempts += block
    raise RejectionBudgetExceeded(
        f"eigenvalue rejection sampler failed {budget} consecutive times"
    )


def sample_polytope_uniform_hit_and_run(
    d: int,
    target_sum: float,
    lambda_min: float,
    lambda_max: float,
    n_samples: int,
    rng: np.random.Generator,
    burn_in: int = 1000,
) -> np.ndarray:
    """Uniform samples on the same polytope via hit-and-run, (n_samples, d).

    Walks on the affine slice sum(x) = target_sum inside the box; burn_in
    steps separate consecutive emitted samples.
    """
    if not lambda_min * d < target_sum < lambda_max * d:
        if d == 1 and lambda_min <= target_sum <= lambda_max:
            return np.full((n_samples, 1), target_sum)
        raise RejectionBudgetExceeded("empty polytope for hit-and-run sampler")
    if d == 1:
        return np.full((n_samples, 1), target_sum)
    x = np.full(d, target_sum / d)
    out = np.empty((n_samples, d))
    for s in range(n_samples):
        for _ in range(burn_in):
            g = rng.standard_normal(d)
            v = g - g.mean()
            nv = float(np.linalg.norm(v))
            if nv < 1e-12:
                continue
            v /= nv
            # Segment of x + t v inside the box, per coordinate.
            lo, hi = -np.inf, np.inf
            for k in range(d):
                if v[k] > 1e-15:
                    lo = max(lo, (lambda_min - x[k]) / v[k])
                    hi = min(hi, (lambda_max - x[k]) / v[k])
                elif v[k] < -1e-15:
                    lo = max(lo, (lambda_max - x[k]) / v[k])
                    hi = min(hi, (lambda_min - x[k]) / v[k])
            if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
                continue
            x = x + rng.uniform(lo, hi) * v
        out[s] = x
    return out


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random orthogonal matrix: QR with sign-corrected R diagonal."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def sample_commuting_bank(
    config: SphereConfig, rng: np.random.Generator | None = None
) -> CommutingFamily:
    """N Gaussians sharing one random eigenbasis, each at W2 distance exactly R
    from the Dirac at the origin: eigenvalues sum to R^2/2, mean norm R/sqrt(2).
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    d, n = config.dim, config.n
    target = 0.5 * config.radius_r**2
    basis = random_orthogonal(d, rng)
    spectra = np.empty((n, d))
    means = np.empty((n, d))
    mean_radius = config.radius_r / np.sqrt(2.0)
    for i in range(n):
        spectra[i] = sample_polytope_eigs(
            d, target, config.lambda_min, config.lambda_max, rng
        )
        means[i] = sample_sphere_uniform(d, mean_radius, rng)
    return CommutingFamily(basis=basis, spectra=spectra, means=means)


def sample_commuting_bank_hit_and_run(
    config: SphereConfig, rng: np.random.Generator | None = None, burn_in: int = 1000
) -> CommutingFamily:
    """Variant drawing spectra Uniform(P) by hit-and-run instead of rejection."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    d, n = config.dim, config.n
    basis = random_orthogonal(d, rng)
    spectra = sample_polytope_uniform_hit_and_run(
        d, 0.5 * config.radius_r**2, config.lambda_min, config.lambda_max, n, rng,
        burn_in=burn_in,
    )
    means = np.empty((n, d))
    for i in range(n):
        means[i] = sample_sphere_uniform(d, config.radius_r / np.sqrt(2.0), rng)
    return CommutingFamily(basis=basis, spectra=spectra, means=means)


def sample_noncommuting_bank(
    dim: int, n: int, radius_r: float, rng: np.random.Generator
) -> list[GaussianMeasure]:
    """General-position Gaussians on the sphere: covariance c (W W^T + 0.01 I)
    scaled so the trace is R^2/2, mean uniform with norm R/sqrt(2)."""
    if dim < 2:
        raise DimensionError("non-commuting sampler needs dim >= 2")
    half = 0.5 * radius_r**2
    out = []
    for _ in range(n):
        mean = sample_sphere_uniform(dim, radius_r / np.sqrt(2.0), rng)
        w = rng.standard_normal((dim, dim))
        base = w @ w.T + 0.01 * np.eye(dim)
        if not np.all(np.isfinite(base)):
            raise NumericError("non-finite covariance draw")
        cov = base * (half / float(np.trace(base)))
        out.append(GaussianMeasure(mean=mean, cov=linalg.symmetrize(cov)))
    return out


# ---------------------------------------------------------------------------
# Exact-radius perturbation

def _bisect_cov_scale(contribution, target: float, tol: float):
    """Find s >= 0 with contribution(s) = target by bracketed bisection."""
    if target <= 0.0:
        return 0.0
    hi = 1.0
    for _ in range(200):
        if contribution(hi) >= target:
            break
        hi *= 2.0
    else:
        raise BinarySearchFailed("could not bracket the covariance perturbation scale")
    lo = 0.0
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        val = contribution(mid)
        if abs(val - target) <= tol:
            return mid
        if val < target:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    if abs(contribution(mid) - target) <= tol:
        return mid
    raise BinarySearchFailed(
        f"bisection did not reach tolerance {tol:.1e} in {BISECTION_STEPS} steps"
    )


def perturb_to_distance(
    p: GaussianMeasure,
    spec: PerturbSpec,
    rng: np.random.Generator | None = None,
    direction: np.ndarray | None = None,
) -> GaussianMeasure:
    """A measure at W2 distance exactly spec.radius_r from p.

    Splits the squared budget: the mean moves by a uniform-direction vector of
    norm r * sqrt(fraction); the covariance gains s * direction with the scale
    s found by binary search so its squared W2 contribution is the remainder.
    `direction` defaults to a random PSD matrix V V^T normalized to unit trace;
    callers that must stay inside a commuting family pass one that commutes.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    r = spec.radius_r
    if r == 0.0:
        return p
    d = p.dim
    frac = spec.mean_budget_fraction

    mean_shift = 0.0
    new_mean = p.mean
    if frac > 0.0:
        shift_norm = r * np.sqrt(frac)
        new_mean = p.mean + sample_sphere_uniform(d, shift_norm, rng)
        mean_shift = shift_norm**2

    cov_target = r**2 - mean_shift
    new_cov = p.cov
    if cov_target > 1e-300:
        if direction is None:
            v = rng.standard_normal((d, d))
            direction = v @ v.T
        direction = linalg.symmetrize(np.asarray(direction, dtype=float))
        tr = float(np.trace(direction))
        if tr <= 0:
            raise NumericError("perturbation direction must have positive trace")
        direction = direction / tr

        base = GaussianMeasure(mean=np.zeros(d), cov=p.cov)

        def contribution(s: float) -> float:
            cand = GaussianMeasure(mean=np.zeros(d), cov=p.cov + s * direction)
            return bures_w2_squared(base, cand)

        s = _bisect_cov_scale(contribution, cov_target, tol=1e-10)
        new_cov = linalg.symmetrize(p.cov + s * direction)

    return GaussianMeasure(mean=new_mean, cov=new_cov)


def batch_perturb_in_family(
    means_b: np.ndarray,
    spectra: np.ndarray,
    radii: np.ndarray,
    fraction: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized split-budget perturbation of in-family states.

    means_b (Q, d) are means in basis coordinates, spectra (Q, d) eigenvalues.
    Covariance directions are diagonal in the family basis (squared Gaussian
    coordinates, unit trace), so perturbed states stay inside the family.
    Returns (new means_b, new spectra).
    """
    q, d = means_b.shape
    radii = np.asarray(radii, dtype=float)
    if radii.ndim == 0:
        radii = np.full(q, float(radii))

    new_means = means_b.copy()
    if fraction > 0.0:
        dirs = rng.standard_normal((q, d))
        norms = np.linalg.norm(dirs, axis=1, keepdims=True)
        # Zero-norm draws are measure zero; nudge deterministically if they occur.
        norms[norms == 0.0] = 1.0
        new_means = means_b + dirs / norms * (radii[:, None] * np.sqrt(fraction))

    cov_targets = radii**2 * (1.0 - fraction)
    new_spectra = spectra.copy()
    active = cov_targets > 1e-300
    if np.any(active):
        g = rng.standard_normal((q, d)) ** 2
        g /= g.sum(axis=1, keepdims=True)
        sq = np.sqrt(spectra)

        def contribution(s: np.ndarray) -> np.ndarray:
            return np.sum((np.sqrt(spectra + s[:, None] * g) - sq) ** 2, axis=1)

        hi = np.ones(q)
        for _ in range(200):
            short = contribution(hi) < cov_targets
            if not np.any(short & active):
                break
            hi[short] *= 2.0
        else:
            raise BinarySearchFailed("could not bracket batched covariance scales")
        lo = np.zeros(q)
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            val = contribution(mid)
            low = val < cov_targets
            lo = np.where(low, mid, lo)
            hi = np.where(low, hi, mid)
        s = 0.5 * (lo + hi)
        err = np.abs(contribution(s) - cov_targets)
        if np.any(err[active] > 1e-10):
            raise BinarySearchFailed(
                f"batched bisection residual {float(err[active].max()):.3e} above 1e-10"
            )
        new_spectra = np.where(active[:, None], spectra + s[:, None] * g, spectra)
    return new_means, new_spectra
