"""The associative memory core: LSE energy, Gibbs weights, the one-step
update operator, iterative retrieval and gradient-field diagnostics.

A `MemoryBank` is immutable after construction. Banks whose covariances share
one eigenbasis (a `CommutingFamily`) get O(N d) spectral updates; general
banks fall back to dense O(N d^3) kernels with per-pattern square roots cached
at construction. Batch engines over many queries back the experiment runners.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DegenerateResult, DimensionError, NotPositiveDefinite, NumericError
from .geometry import CommutingFamily, GaussianMeasure, bures_w2_squared

# Counts covariance eigenvalues clamped to the PD floor by dam_step; the
# update can graze singularity for extreme beta and the clamp is the
# documented recovery policy.
_CLAMP_EVENTS = 0


def clamp_event_count() -> int:
    return _CLAMP_EVENTS


def reset_clamp_event_count() -> None:
    global _CLAMP_EVENTS
    _CLAMP_EVENTS = 0


@dataclass(frozen=True)
class WeightVector:
    """Gibbs weights over the stored patterns; lives on the simplex."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise DimensionError("weights must be a non-empty vector")
        if np.any(v < -1e-12) or np.any(v > 1.0 + 1e-12):
            raise NumericError("weights outside [0, 1]")
        if abs(float(v.sum()) - 1.0) > 1e-9:
            raise NumericError(f"weights sum to {v.sum():.12f}, not 1")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size


@dataclass
class RetrievalTrace:
    """Per-iteration record of a retrieval run."""

    iterates: list[GaussianMeasure]
    nearest_pattern_ids: list[int]
    weight_history: list[WeightVector]
    converged: bool
    iterations_used: int
    w2_to_target: list[float] | None = None


class MemoryBank:
    """Immutable collection of stored Gaussians with temperature beta.

    Construct with `MemoryBank(measures, beta)` for general patterns, passing
    `family=` when the covariances share an eigenbasis, or with
    `MemoryBank.from_family(family, beta)` to avoid materializing dense
    covariances at all.
    """

    def __init__(
        self,
        patterns: list[GaussianMeasure] | None,
        beta: float,
        family: CommutingFamily | None = None,
        _from_family: bool = False,
    ):
        if beta <= 0:
            raise NumericError(f"beta must be positive, got {beta}")
        self.beta = float(beta)
        self.family = family

        if _from_family:
            assert family is not None
            self._init_family_arrays(family)
        else:
            if not patterns:
                raise DimensionError("bank needs at least one pattern")
            d = patterns[0].dim
            if any(p.dim != d for p in patterns):
                raise DimensionError("all patterns must share one dimension")
            self.means = np.array([p.mean for p in patterns])
            if family is not None:
                if family.n != len(patterns) or family.dim != d:
                    raise DimensionError("family does not cover the pattern set")
                for i, p in enumerate(patterns):
                    rec = family.member_cov(i)
                    scale = max(float(np.max(np.abs(p.cov))), 1e-300)
                    if np.max(np.abs(rec - p.cov)) > 1e-9 * scale:
                        raise NumericError(
                            f"pattern {i} covariance does not reconstruct from the family"
                        )
                self._init_family_arrays(family)
            else:
                self.covs = np.array([p.cov for p in patterns])
                sq = []
                for p in patterns:
                    sq.append(linalg.spd_sqrt(p.cov))
                self.cov_sqrts = np.array(sq)
                self.traces = np.einsum("nii->n", self.covs)
                self._m_w_sq = float(
                    np.max(np.sum(self.means**2, axis=1) + self.traces)
                )
        self._patterns = list(patterns) if patterns is not None else None

    def _init_family_arrays(self, family: CommutingFamily) -> None:
        self.means = family.means
        self.means_in_basis = family.means_in_basis
        self.sqrt_spectra = np.sqrt(family.spectra)
        self.traces = np.sum(family.spectra, axis=1)
        self._m_w_sq = float(np.max(np.sum(self.means**2, axis=1) + self.traces))

    @classmethod
    def from_family(cls, family: CommutingFamily, beta: float) -> "MemoryBank":
        return cls(None, beta, family=family, _from_family=True)

    @property
    def n(self) -> int:
        return self.means.shape[0]

    def __len__(self) -> int:
        return self.n

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def m_w(self) -> float:
        """max_i W2(delta_0, X_i), the Wasserstein radius of the bank."""
        return float(np.sqrt(self._m_w_sq))

    def pattern(self, i: int) -> GaussianMeasure:
        if self._patterns is not None:
            return self._patterns[i]
        return self.family.member(i)

    @property
    def patterns(self) -> list[GaussianMeasure]:
        if self._patterns is None:
            self._patterns = self.family.members()
        return self._patterns


# ---------------------------------------------------------------------------
# Distances and the one-step update

def _query_family_coords(bank: MemoryBank, query: GaussianMeasure):
    """(mean in basis, sqrt spectrum) when the query commutes with the bank."""
    if bank.family is None:
        return None
    coords = bank.family.coordinates_of(query)
    if coords is None:
        return None
    mean_b, spec = coords
    return mean_b, np.sqrt(spec)


def pattern_distances_sq(bank: MemoryBank, query: GaussianMeasure) -> np.ndarray:
    """W2^2 from the query to every stored pattern, shape (N,)."""
    if query.dim != bank.dim:
        raise DimensionError(f"query dim {query.dim} != bank dim {bank.dim}")
    coords = _query_family_coords(bank, query)
    if coords is not None:
        qm, qs = coords
        dm = bank.means_in_basis - qm
        ds = bank.sqrt_spectra - qs
        return np.clip(np.sum(dm * dm, axis=1) + np.sum(ds * ds, axis=1), 0.0, None)
    return _dense_distances_sq(bank, query)


def _dense_distances_sq(bank: MemoryBank, query: GaussianMeasure) -> np.ndarray:
    if bank.family is not None:
        # Non-commuting query against a family bank: materialize sqrts once.
        sqrts, traces = _family_dense_cache(bank)
    else:
        sqrts, traces = bank.cov_sqrts, bank.traces
    omega = query.cov
    m = np.einsum("nij,jk,nkl->nil", sqrts, omega, sqrts)
    w = np.linalg.eigvalsh(0.5 * (m + np.swapaxes(m, -1, -2)))
    cross = np.sum(np.sqrt(np.clip(w, 0.0, None)), axis=1)
    dm = bank.means - query.mean
    tr_q = float(np.trace(omega))
    d2 = np.sum(dm * dm, axis=1) + traces + tr_q - 2.0 * cross
    return np.clip(d2, 0.0, None)


def _family_dense_cache(bank: MemoryBank):
    cache = getattr(bank, "_dense_cache", None)
    if cache is None:
        u = bank.family.basis
        sqrts = np.einsum("ij,nj,kj->nik", u, bank.sqrt_spectra, u)
        cache = (sqrts, bank.traces)
        bank._dense_cache = cache
    return cache


def _softmax_weights(beta: float, d2: np.ndarray) -> np.ndarray:
    z = -beta * (d2 - np.min(d2))
    e = np.exp(z)
    return e / e.sum()


def energy(bank: MemoryBank, query: GaussianMeasure) -> float:
    """LSE energy -(1/beta) log sum_i exp(-beta W2^2(X_i, query)), max-shifted."""
    d2 = pattern_distances_sq(bank, query)
    dmin = float(np.min(d2))
    return dmin - float(np.log(np.sum(np.exp(-bank.beta * (d2 - dmin))))) / bank.beta


def weights(bank: MemoryBank, query: GaussianMeasure) -> WeightVector:
    """Gibbs weights: softmax of -beta * W2^2 over the stored patterns."""
    return WeightVector(_softmax_weights(bank.beta, pattern_distances_sq(bank, query)))


def _aggregate_map(bank: MemoryBank, query: GaussianMeasure):
    """Weighted mean m', aggregated map matrix A~, weights and distances.

    The aggregated transport is x -> m' + A~ (x - m); one update step is the
    pushforward of the query through it.
    """
    coords = _query_family_coords(bank, query)
    if coords is not None:
        qm, qs = coords
        dm = bank.means_in_basis - qm
        ds = bank.sqrt_spectra - qs
        d2 = np.clip(np.sum(dm * dm, axis=1) + np.sum(ds * ds, axis=1), 0.0, None)
        w = _softmax_weights(bank.beta, d2)
        m_new = w @ bank.means
        # A_i = U diag(sqrt(lambda_i/omega)) U^T, so A~ has diagonal w @ sqrt_spectra / qs.
        diag = (w @ bank.sqrt_spectra) / qs
        u = bank.family.basis
        a_tilde = (u * diag) @ u.T
        return m_new, a_tilde, w, d2

    d2 = _dense_distances_sq(bank, query)
    w = _softmax_weights(bank.beta, d2)
    if bank.family is not None:
        sqrts, _ = _family_dense_cache(bank)
    else:
        sqrts = bank.cov_sqrts
    omega = query.cov
    m = np.einsum("nij,jk,nkl->nil", sqrts, omega, sqrts)
    ew, ev = np.linalg.eigh(0.5 * (m + np.swapaxes(m, -1, -2)))
    top = np.max(ew, axis=1)
    if np.any(ew <= linalg.EPS_PD * top[:, None]):
        raise NotPositiveDefinite(
            "transport-map inner matrix lost positive-definiteness",
            eigenvalue=float(np.min(ew)),
        )
    inv_sqrt = np.einsum("nij,nj,nkj->nik", ev, 1.0 / np.sqrt(ew), ev)
    a = np.einsum("nij,njk,nkl->nil", sqrts, inv_sqrt, sqrts)
    a_tilde = np.tensordot(w, a, axes=1)
    m_new = w @ bank.means
    return m_new, a_tilde, w, d2


def dam_step(bank: MemoryBank, query: GaussianMeasure) -> GaussianMeasure:
    """One update step: pushforward of the query through the Gibbs-weighted
    average of the optimal transport maps to all stored patterns."""
    measure, _ = dam_step_with_weights(bank, query)
    return measure


def dam_step_with_weights(
    bank: MemoryBank, query: GaussianMeasure
) -> tuple[GaussianMeasure, WeightVector]:
    global _CLAMP_EVENTS
    if query.dim != bank.dim:
        raise DimensionError(f"query dim {query.dim} != bank dim {bank.dim}")
    coords = _query_family_coords(bank, query)
    if coords is not None:
        qm, qs = coords
        dm = bank.means_in_basis - qm
        ds = bank.sqrt_spectra - qs
        d2 = np.clip(np.sum(dm * dm, axis=1) + np.sum(ds * ds, axis=1), 0.0, None)
        w = _softmax_weights(bank.beta, d2)
        new_sqrt_spec = w @ bank.sqrt_spectra
        new_mean_b = w @ bank.means_in_basis
        out = bank.family.measure_from_coordinates(new_mean_b, new_sqrt_spec**2)
        return out, WeightVector(w)

    m_new, a_tilde, w, _ = _aggregate_map(bank, query)
    cov_new = linalg.symmetrize(a_tilde @ query.cov @ a_tilde.T)
    ew, ev = np.linalg.eigh(cov_new)
    floor = linalg.EPS_PD * float(np.max(np.abs(ew)))
    if np.any(ew <= 0.0):
        raise DegenerateResult(
            f"updated covariance has non-positive eigenvalue {float(np.min(ew)):.3e}"
        )
    if np.any(ew <= floor):
        _CLAMP_EVENTS += int(np.sum(ew <= floor))
        ew = np.maximum(ew, floor * (1.0 + 1e-3))
        cov_new = linalg.symmetrize((ev * ew) @ ev.T)
    return GaussianMeasure(mean=m_new, cov=cov_new), WeightVector(w)


def _iterate_distance(bank: MemoryBank, a: GaussianMeasure, b: GaussianMeasure) -> float:
    """W2 between successive iterates, spectral when both live in the family."""
    if bank.family is not None:
        ca = bank.family.coordinates_of(a)
        cb = bank.family.coordinates_of(b)
        if ca is not None and cb is not None:
            d2 = float(
                np.sum((ca[0] - cb[0]) ** 2)
                + np.sum((np.sqrt(ca[1]) - np.sqrt(cb[1])) ** 2)
            )
            return float(np.sqrt(max(d2, 0.0)))
    return float(np.sqrt(bures_w2_squared(a, b)))


def retrieve(
    bank: MemoryBank,
    query: GaussianMeasure,
    max_iters: int = 50,
    tol: float = 1e-8,
    target: GaussianMeasure | None = None,
) -> RetrievalTrace:
    """Iterate the update operator until successive iterates move <= tol.

    Stops on W2(xi_k, xi_{k+1}) <= tol or after max_iters steps; the converged
    flag records which. Nearest pattern ids break ties toward the lowest index.
    """
    if max_iters < 1:
        raise NumericError("max_iters must be >= 1")
    if tol <= 0:
        raise NumericError("tol must be positive")

    def nearest(m: GaussianMeasure) -> int:
        return int(np.argmin(pattern_distances_sq(bank, m)))

    def to_target(m: GaussianMeasure) -> float:
        return float(np.sqrt(bures_w2_squared(m, target)))

    iterates = [query]
    nearest_ids = [nearest(query)]
    w2_to_target = [to_target(query)] if target is not None else None
    weight_history: list[WeightVector] = []
    converged = False
    iterations_used = 0

    state = query
    for _ in range(max_iters):
        try:
            new_state, w = dam_step_with_weights(bank, state)
        except DegenerateResult as exc:
            exc.partial_trace = RetrievalTrace(
                iterates=iterates,
                nearest_pattern_ids=nearest_ids,
                weight_history=weight_history,
                converged=False,
                iterations_used=iterations_used,
                w2_to_target=w2_to_target,
            )
            raise
        iterations_used += 1
        weight_history.append(w)
        if _iterate_distance(bank, state, new_state) <= tol:
            converged = True
            break
        state = new_state
        iterates.append(state)
        nearest_ids.append(nearest(state))
        if w2_to_target is not None:
            w2_to_target.append(to_target(state))

    return RetrievalTrace(
        iterates=iterates,
        nearest_pattern_ids=nearest_ids,
        weight_history=weight_history,
        converged=converged,
        iterations_used=iterations_used,
        w2_to_target=w2_to_target,
    )


def gradient_field(
    bank: MemoryBank, query: GaussianMeasure, points: np.ndarray
) -> np.ndarray:
    """Displacement field 2 sum_i w_i (T_i(x) - x) evaluated at each point.

    With the aggregated map this is 2 (m' + A~ (x - m) - x).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != bank.dim:
        raise DimensionError("points do not match bank dimension")
    m_new, a_tilde, _, _ = _aggregate_map(bank, query)
    rel = pts - query.mean
    return 2.0 * (m_new + rel @ a_tilde.T - pts)


def displacement_norm(bank: MemoryBank, query: GaussianMeasure) -> float:
    """W2 between a query and its one-step update (the heatmap quantity)."""
    stepped = dam_step(bank, query)
    return _iterate_distance(bank, query, stepped)


# ---------------------------------------------------------------------------
# Batch engines (vectorized over queries) used by the experiment runners.

def family_batch_step(
    bank: MemoryBank, q_means_b: np.ndarray, q_sqrt_spec: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """One update step for a block of in-family queries, O(Q N d).

    q_means_b: (Q, d) means in basis coordinates; q_sqrt_spec: (Q, d) square
    roots of the query spectra. Returns the updated pair.
    """
    pm = bank.means_in_basis
    ps = bank.sqrt_spectra
    d2 = (
        np.sum(q_means_b**2, axis=1)[:, None]
        + np.sum(pm**2, axis=1)[None, :]
        - 2.0 * (q_means_b @ pm.T)
        + np.sum(q_sqrt_spec**2, axis=1)[:, None]
        + np.sum(ps**2, axis=1)[None, :]
        - 2.0 * (q_sqrt_spec @ ps.T)
    )
    np.clip(d2, 0.0, None, out=d2)
    z = -bank.beta * (d2 - d2.min(axis=1, keepdims=True))
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z @ pm, z @ ps


def family_batch_distances(
    q_means_b: np.ndarray,
    q_sqrt_spec: np.ndarray,
    t_means_b: np.ndarray,
    t_sqrt_spec: np.ndarray,
) -> np.ndarray:
    """Row-wise W2 between paired in-family states, shape (Q,)."""
    d2 = np.sum((q_means_b - t_means_b) ** 2, axis=1) + np.sum(
        (q_sqrt_spec - t_sqrt_spec) ** 2, axis=1
    )
    return np.sqrt(np.clip(d2, 0.0, None))


def dense_batch_step(
    bank: MemoryBank, q_means: np.ndarray, q_covs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """One update step for a block of general queries against a dense bank.

    q_means: (Q, d); q_covs: (Q, d, d). Returns updated means and covariances.
    Memory scales as Q * N * d^2; callers chunk Q.
    """
    sqrts = bank.cov_sqrts[None, :, :, :]  # broadcast over queries
    traces = bank.traces
    q = q_means.shape[0]
    m = sqrts @ q_covs[:, None, :, :] @ sqrts
    m = 0.5 * (m + np.swapaxes(m, -1, -2))
    ew, ev = np.linalg.eigh(m)
    top = np.max(ew, axis=2)
    if np.any(ew <= linalg.EPS_PD * top[:, :, None]):
        raise NotPositiveDefinite(
            "transport-map inner matrix lost positive-definiteness in batch step",
            eigenvalue=float(np.min(ew)),
        )
    cross = np.sum(np.sqrt(np.clip(ew, 0.0, None)), axis=2)
    dm = q_means[:, None, :] - bank.means[None, :, :]
    d2 = (
        np.sum(dm * dm, axis=2)
        + traces[None, :]
        + np.trace(q_covs, axis1=1, axis2=2)[:, None]
        - 2.0 * cross
    )
    np.clip(d2, 0.0, None, out=d2)
    z = -bank.beta * (d2 - d2.min(axis=1, keepdims=True))
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)

    inv_sqrt = (ev / np.sqrt(ew)[:, :, None, :]) @ np.swapaxes(ev, -1, -2)
    a = sqrts @ inv_sqrt @ sqrts
    a_tilde = (z[:, :, None, None] * a).sum(axis=1)
    new_means = z @ bank.means
    new_covs = a_tilde @ q_covs @ np.swapaxes(a_tilde, -1, -2)
    new_covs = 0.5 * (new_covs + np.swapaxes(new_covs, -1, -2))
    # Floor eigenvalues the same way dam_step does, batched.
    cw, cv = np.linalg.eigh(new_covs)
    if np.any(cw <= 0.0):
        raise DegenerateResult(
            f"updated covariance lost positive-definiteness in batch step "
            f"(min eigenvalue {float(np.min(cw)):.3e})"
        )
    floor = linalg.EPS_PD * np.max(np.abs(cw), axis=1)
    mask = cw <= floor[:, None]
    if np.any(mask):
        global _CLAMP_EVENTS
        _CLAMP_EVENTS += int(np.sum(mask))
        cw = np.maximum(cw, floor[:, None] * (1.0 + 1e-3))
        new_covs = np.einsum("qij,qj,qkj->qik", cv, cw, cv)
        new_covs = 0.5 * (new_covs + np.swapaxes(new_covs, -1, -2))
    assert q == new_means.shape[0]
    return new_means, new_covs


def dense_batch_w2(
    a_means: np.ndarray, a_covs: np.ndarray, b_means: np.ndarray, b_covs: np.ndarray
) -> np.ndarray:
    """Pairwise (row-wise) W2 between two stacks of Gaussians, shape (Q,).

    Uses the orthogonal-alignment form of the Bures trace term so that nearly
    coinciding pairs come out at machine-level zero instead of sqrt(roundoff).
    """
    wa, va = np.linalg.eigh(0.5 * (a_covs + np.swapaxes(a_covs, -1, -2)))
    sa = np.einsum("qij,qj,qkj->qik", va, np.sqrt(np.clip(wa, 0.0, None)), va)
    wb, vb = np.linalg.eigh(0.5 * (b_covs + np.swapaxes(b_covs, -1, -2)))
    sb = np.einsum("qij,qj,qkj->qik", vb, np.sqrt(np.clip(wb, 0.0, None)), vb)
    u, _, vt = np.linalg.svd(sb @ sa)
    diff = sa - sb @ (u @ vt)
    d2 = np.sum((a_means - b_means) ** 2, axis=1) + np.sum(diff * diff, axis=(1, 2))
    return np.sqrt(np.clip(d2, 0.0, None))
