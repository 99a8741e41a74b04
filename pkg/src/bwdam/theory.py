"""Assumption checking and closed-form storage/retrieval bounds.

Separation margins, the two-clause assumption verdicts, the exponential
storage-capacity count, the contraction coefficient, the iteration count to a
given accuracy, and the one-step retrieval error bound. Logarithms are natural
throughout. The checker reports each inequality independently and never
intersects them into a single verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EpsilonTooLarge,
    GammaTooLarge,
    KappaNotContractive,
    MissingCommutingFamily,
    NumericError,
    SinglePattern,
)
from .geometry import neg_log_l2_inner
from .memory import MemoryBank


@dataclass(frozen=True)
class AssumptionReport:
    """Separation margins and verdicts that gate the guarantee claims."""

    delta_per_pattern: np.ndarray
    separation_threshold: float
    separation_ok: np.ndarray          # boolean, per pattern
    beta_constraint_ok: bool
    m_w: float
    lambda_bounds: tuple[float, float]  # observed (min, max) over all spectra
    commuting_ok: bool
    r_basin: float                      # 1 / sqrt(beta N)
    kappa: float                        # 144 beta M_W^2 / N

    @property
    def all_separation_ok(self) -> bool:
        return bool(np.all(self.separation_ok))

    def to_dict(self) -> dict:
        """JSON-ready dict with fixed key order."""
        return {
            "delta_per_pattern": [float(x) for x in self.delta_per_pattern],
            "separation_threshold": float(self.separation_threshold),
            "separation_ok": [bool(x) for x in self.separation_ok],
            "beta_constraint_ok": bool(self.beta_constraint_ok),
            "m_w": float(self.m_w),
            "lambda_min_observed": float(self.lambda_bounds[0]),
            "lambda_max_observed": float(self.lambda_bounds[1]),
            "commuting_ok": bool(self.commuting_ok),
            "r_basin": float(self.r_basin),
            "kappa": float(self.kappa),
        }


@dataclass(frozen=True)
class CapacityInputs:
    """Inputs of the storage-capacity bound; gamma = lambda_max / lambda_min."""

    dim: int
    p_fail: float
    lambda_min: float
    lambda_max: float
    gamma: float = field(init=False)
    alpha: float = field(init=False)
    radius: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.p_fail < 1.0:
            raise NumericError(f"p_fail must lie in (0, 1), got {self.p_fail}")
        if self.lambda_min <= 0 or self.lambda_max < self.lambda_min:
            raise NumericError("need 0 < lambda_min <= lambda_max")
        if self.dim < 1:
            raise NumericError("dim must be >= 1")
        gamma = self.lambda_max / self.lambda_min
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "alpha", 1.0 - 2.0 * math.log(gamma))
        object.__setattr__(
            self, "radius", math.sqrt(self.dim * (self.lambda_max + self.lambda_min))
        )

    @classmethod
    def from_gamma(cls, dim: int, p_fail: float, gamma: float, lambda_min: float = 1.0):
        if gamma < 1.0:
            raise NumericError("gamma must be >= 1")
        return cls(
            dim=dim,
            p_fail=p_fail,
            lambda_min=lambda_min,
            lambda_max=gamma * lambda_min,
        )


@dataclass(frozen=True)
class CapacityBound:
    n: int
    beta_min: float  # the bound requires beta > 3 alpha / lambda_min
    alpha: float
    gamma: float
    radius: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "beta_min": self.beta_min,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "radius": self.radius,
        }


def _pairwise_deltas_family(bank: MemoryBank) -> np.ndarray:
    """Delta_i for every i on a family bank, vectorized over the partner index."""
    fam = bank.family
    n, d = fam.n, fam.dim
    mb = fam.means_in_basis
    spec = fam.spectra
    const = 0.5 * d * math.log(2.0 * math.pi)
    deltas = np.empty(n)
    for i in range(n):
        s = spec[i] + spec            # (n, d) eigenvalues of Sigma_i + Sigma_j
        dm = mb[i] - mb               # (n, d)
        vals = const + 0.5 * np.sum(np.log(s), axis=1) + 0.5 * np.sum(dm * dm / s, axis=1)
        vals[i] = np.inf
        deltas[i] = float(np.min(vals))
    return deltas


def separation_delta(bank: MemoryBank, i: int) -> float:
    """Delta_i = min over j != i of -log <X_i, X_j>_{L2}."""
    if bank.n < 2:
        raise SinglePattern("separation is undefined for a single-pattern bank")
    if bank.family is not None:
        fam = bank.family
        s = fam.spectra[i] + fam.spectra
        dm = fam.means_in_basis[i] - fam.means_in_basis
        vals = (
            0.5 * fam.dim * math.log(2.0 * math.pi)
            + 0.5 * np.sum(np.log(s), axis=1)
            + 0.5 * np.sum(dm * dm / s, axis=1)
        )
        vals[i] = np.inf
        return float(np.min(vals))
    pi = bank.pattern(i)
    return min(
        neg_log_l2_inner(pi, bank.pattern(j)) for j in range(bank.n) if j != i
    )


def separation_threshold(
    dim: int, n: int, beta: float, m_w: float, lambda_min: float, lambda_max: float
) -> float:
    """Assumption clause-1 threshold:
    (d/2) log(4 pi lambda_max) + (1/(beta lambda_min)) log(N^3 beta (4 M_W^2 + 2 d (lambda_max + lambda_min))).
    """
    c = 4.0 * m_w**2 + 2.0 * dim * (lambda_max + lambda_min)
    return 0.5 * dim * math.log(4.0 * math.pi * lambda_max) + (
        1.0 / (beta * lambda_min)
    ) * math.log(n**3 * beta * c)


def beta_lower_bound(dim: int, n: int, m_w: float, lambda_min: float, lambda_max: float) -> float:
    """Assumption clause-2 threshold: beta must exceed e^2 / (C N^3)."""
    c = 4.0 * m_w**2 + 2.0 * dim * (lambda_max + lambda_min)
    return math.e**2 / (c * n**3)


def check_assumptions(bank: MemoryBank) -> AssumptionReport:
    """Evaluate both assumption clauses on a commuting bank.

    Lambda bounds come from the observed spectra, not from any config: the
    guarantees quantify over actual eigenvalues.
    """
    if bank.family is None:
        raise MissingCommutingFamily(
            "assumption checking presupposes a bank with a shared eigenbasis"
        )
    if bank.n < 2:
        raise SinglePattern("assumption checking needs at least two patterns")
    lam_min = float(np.min(bank.family.spectra))
    lam_max = float(np.max(bank.family.spectra))
    m_w = bank.m_w
    deltas = _pairwise_deltas_family(bank)
    thr = separation_threshold(bank.dim, bank.n, bank.beta, m_w, lam_min, lam_max)
    beta_ok = bank.beta > beta_lower_bound(bank.dim, bank.n, m_w, lam_min, lam_max)
    return AssumptionReport(
        delta_per_pattern=deltas,
        separation_threshold=thr,
        separation_ok=deltas >= thr,
        beta_constraint_ok=bool(beta_ok),
        m_w=m_w,
        lambda_bounds=(lam_min, lam_max),
        commuting_ok=True,
        r_basin=1.0 / math.sqrt(bank.beta * bank.n),
        kappa=144.0 * bank.beta * m_w**2 / bank.n,
    )


def capacity_bound(inputs: CapacityInputs) -> CapacityBound:
    """Storage capacity N = floor(sqrt(p/2) exp(d alpha^2 / 16)).

    Valid only for gamma < sqrt(e); also reports the accompanying beta
    lower bound 3 alpha / lambda_min.
    """
    if inputs.gamma >= math.sqrt(math.e):
        raise GammaTooLarge(
            f"gamma={inputs.gamma:.6f} >= sqrt(e); the capacity bound is void"
        )
    n = math.floor(
        math.sqrt(inputs.p_fail / 2.0) * math.exp(inputs.dim * inputs.alpha**2 / 16.0)
    )
    return CapacityBound(
        n=int(n),
        beta_min=3.0 * inputs.alpha / inputs.lambda_min,
        alpha=inputs.alpha,
        gamma=inputs.gamma,
        radius=inputs.radius,
    )


def contraction_kappa(beta: float, n: int, m_w: float) -> float:
    """kappa = 144 beta M_W^2 / N; a contraction when below 1."""
    if beta <= 0 or n < 1:
        raise NumericError("need beta > 0 and n >= 1")
    return 144.0 * beta * m_w**2 / n


def iterations_for_eps(eps: float, beta: float, n: int, m_w: float) -> int:
    """Iterations guaranteeing W2(Phi^k(xi), fixed point) < eps:
    ceil(log((eps/2) sqrt(beta N)) / log(144 beta M_W^2 / N)), at least 1.
    """
    kappa = contraction_kappa(beta, n, m_w)
    if kappa >= 1.0:
        raise KappaNotContractive(f"kappa={kappa:.6f} >= 1; no contraction guarantee")
    r = 1.0 / math.sqrt(beta * n)
    if eps >= r:
        raise EpsilonTooLarge(f"eps={eps} must be below the basin radius r={r}")
    if eps <= 0:
        raise NumericError("eps must be positive")
    value = math.log(0.5 * eps * math.sqrt(beta * n)) / math.log(kappa)
    return max(1, math.ceil(value))


def one_step_error_bound(beta: float, n: int) -> float:
    """Closed-form bound on the single-step retrieval error: 3 / sqrt(beta N)."""
    if beta <= 0 or n < 1:
        raise NumericError("need beta > 0 and n >= 1")
    return 3.0 / math.sqrt(beta * n)
