"""Scripted experiment runners emitting CSV plus a JSON run manifest.

Each runner is deterministic for a fixed config: all randomness flows through
SeedSequence children of the config seed, queries are processed in fixed-size
chunks (so --threads never changes results), and aggregation happens on the
reassembled per-query arrays in index order.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DimensionError, InsufficientQueries, NumericError
from .memory import (
    MemoryBank,
    dam_step_with_weights,
    dense_batch_step,
    dense_batch_w2,
    family_batch_distances,
    family_batch_step,
)
from .sampling import (
    PerturbSpec,
    SphereConfig,
    batch_perturb_in_family,
    perturb_to_distance,
    sample_commuting_bank,
    sample_noncommuting_bank,
)

CHUNK = 512  # fixed per-worker block of queries; independent of thread count

CONVERGENCE_COLUMNS = ("beta", "multiplier", "iteration", "mean_w2", "std_w2",
                       "frac_below_tol")
BETA_SWEEP_COLUMNS = ("beta", "success_rate")
ENERGY_GRID_COLUMNS = ("mu", "sigma", "energy")
ENERGY_GRID_SIDECAR_COLUMNS = ("mu", "sigma")


@dataclass(frozen=True)
class NoncommutingParams:
    dim: int
    n: int
    radius_r: float


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    output_path: str
    sphere: SphereConfig | None = None
    noncommuting: NoncommutingParams | None = None
    beta_values: tuple[float, ...] = (1.0,)
    perturb_radius_multipliers: tuple[float, ...] = (1.0,)
    fraction_perturbed: float = 0.75
    mean_budget_fraction: float = 0.5
    max_iters: int = 10
    tol: float = 1e-6
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if len(self.beta_values) < 1:
            raise NumericError("need at least one beta value")
        if any(b <= 0 for b in self.beta_values):
            raise NumericError("beta values must be positive")
        if any(m <= 0 for m in self.perturb_radius_multipliers):
            raise NumericError("radius multipliers must be positive")
        if not 0.0 < self.fraction_perturbed <= 1.0:
            raise NumericError("fraction_perturbed must lie in (0, 1]")

    def manifest(self) -> dict:
        cfg = {
            "kind": self.kind,
            "sphere": asdict(self.sphere) if self.sphere else None,
            "noncommuting": asdict(self.noncommuting) if self.noncommuting else None,
            "beta_values": list(self.beta_values),
            "perturb_radius_multipliers": list(self.perturb_radius_multipliers),
            "fraction_perturbed": self.fraction_perturbed,
            "mean_budget_fraction": self.mean_budget_fraction,
            "max_iters": self.max_iters,
            "tol": self.tol,
            "seed": self.seed,
        }
        return {"config": cfg, "seed": self.seed, "version": __version__}


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path: str | Path, columns, rows) -> None:
    """RFC-4180-style CSV: header always, comma-separated, bare newlines,
    floats at 17 significant digits."""
    with open(path, "w", newline="") as f:
        f.write(",".join(columns) + "\n")
        for row in rows:
            cells = [
                format_float(c) if isinstance(c, float) else str(c) for c in row
            ]
            f.write(",".join(cells) + "\n")


def write_manifest(csv_path: str | Path, payload: dict) -> None:
    path = str(csv_path) + ".manifest.json"
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def _chunk_ranges(total: int, chunk: int = CHUNK):
    return [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]


def _run_chunks(fn, n_chunks: int, threads: int):
    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fn, range(n_chunks)))
    else:
        for i in range(n_chunks):
            fn(i)


def _select_queries(rng: np.random.Generator, n: int, fraction: float) -> np.ndarray:
    count = int(np.floor(fraction * n))
    if count < 1:
        raise InsufficientQueries(
            f"fraction_perturbed={fraction} of N={n} selects no queries"
        )
    return np.sort(rng.choice(n, size=count, replace=False))


def _family_trajectories(
    bank: MemoryBank,
    q_means: np.ndarray,
    q_sqrt_spec: np.ndarray,
    target_means: np.ndarray,
    target_sqrt_spec: np.ndarray,
    iters: int,
    threads: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distance-to-target per query per iteration for in-family queries.

    Returns (dists (Q, iters+1), final means, final sqrt spectra).
    """
    q = q_means.shape[0]
    dists = np.empty((q, iters + 1))
    final_m = np.empty_like(q_means)
    final_s = np.empty_like(q_sqrt_spec)
    ranges = _chunk_ranges(q)

    def work(ci: int):
        lo, hi = ranges[ci]
        m = q_means[lo:hi]
        s = q_sqrt_spec[lo:hi]
        tm = target_means[lo:hi]
        ts = target_sqrt_spec[lo:hi]
        dists[lo:hi, 0] = family_batch_distances(m, s, tm, ts)
        for k in range(1, iters + 1):
            m, s = family_batch_step(bank, m, s)
            dists[lo:hi, k] = family_batch_distances(m, s, tm, ts)
        final_m[lo:hi] = m
        final_s[lo:hi] = s

    _run_chunks(work, len(ranges), threads)
    return dists, final_m, final_s


def _aggregate_rows(beta: float, multiplier: float, dists: np.ndarray, tol: float):
    rows = []
    for k in range(dists.shape[1]):
        col = dists[:, k]
        rows.append(
            (
                float(beta),
                float(multiplier),
                k,
                float(np.mean(col)),
                float(np.std(col)),
                float(np.mean(col <= tol)),
            )
        )
    return rows


def run_convergence(config: ExperimentConfig) -> list[tuple]:
    """Retrieval-dynamics protocol: sample a commuting bank, perturb a
    fraction of the patterns to multiplier / sqrt(beta N), iterate, and
    aggregate the per-iteration W2 distance back to the originals."""
    if config.sphere is None:
        raise NumericError("convergence experiment needs a sphere config")
    fam = sample_commuting_bank(config.sphere)
    n = fam.n
    seeds = np.random.SeedSequence(config.seed).spawn(2)
    select_rng = np.random.default_rng(seeds[0])
    perturb_rng = np.random.default_rng(seeds[1])

    idx = _select_queries(select_rng, n, config.fraction_perturbed)
    base_means = fam.means_in_basis[idx]
    base_spectra = fam.spectra[idx]
    base_sqrt = np.sqrt(base_spectra)

    rows = []
    for beta in config.beta_values:
        bank = MemoryBank.from_family(fam, beta=beta)
        r_base = 1.0 / np.sqrt(beta * n)
        for mult in config.perturb_radius_multipliers:
            q_means, q_spectra = batch_perturb_in_family(
                base_means,
                base_spectra,
                np.full(idx.size, mult * r_base),
                config.mean_budget_fraction,
                perturb_rng,
            )
            dists, _, _ = _family_trajectories(
                bank,
                q_means,
                np.sqrt(q_spectra),
                base_means,
                base_sqrt,
                config.max_iters,
                config.threads,
            )
            rows.extend(_aggregate_rows(beta, mult, dists, config.tol))

    write_csv(config.output_path, CONVERGENCE_COLUMNS, rows)
    write_manifest(config.output_path, config.manifest())
    return rows


def run_beta_sweep_on_bank_family(
    fam, beta_values, fraction_perturbed, mean_budget_fraction, max_iters, seed,
    threads, output_path=None,
) -> list[tuple]:
    """Success rate per beta on an existing commuting family.

    Success means the nearest stored pattern after max_iters is the original
    one AND the final distance to it is at most the perturbation radius.
    """
    n = fam.n
    seeds = np.random.SeedSequence(seed).spawn(2)
    select_rng = np.random.default_rng(seeds[0])
    idx = _select_queries(select_rng, n, fraction_perturbed)
    base_means = fam.means_in_basis[idx]
    base_spectra = fam.spectra[idx]
    base_sqrt = np.sqrt(base_spectra)

    rows = []
    for bi, beta in enumerate(beta_values):
        bank = MemoryBank.from_family(fam, beta=beta)
        r = 1.0 / np.sqrt(beta * n)
        perturb_rng = np.random.default_rng(seeds[1].spawn(bi + 1)[-1])
        q_means, q_spectra = batch_perturb_in_family(
            base_means, base_spectra, np.full(idx.size, r),
            mean_budget_fraction, perturb_rng,
        )
        dists, fin_m, fin_s = _family_trajectories(
            bank, q_means, np.sqrt(q_spectra), base_means, base_sqrt,
            max_iters, threads,
        )
        nearest = _family_nearest(bank, fin_m, fin_s, threads)
        success = (nearest == idx) & (dists[:, -1] <= r)
        rows.append((float(beta), float(np.mean(success))))

    if output_path is not None:
        write_csv(output_path, BETA_SWEEP_COLUMNS, rows)
    return rows


def _family_nearest(
    bank: MemoryBank, q_means: np.ndarray, q_sqrt_spec: np.ndarray, threads: int
) -> np.ndarray:
    """argmin over stored patterns of W2, lowest index on ties."""
    q = q_means.shape[0]
    out = np.empty(q, dtype=int)
    pm = bank.means_in_basis
    ps = bank.sqrt_spectra
    pm_sq = np.sum(pm**2, axis=1)
    ps_sq = np.sum(ps**2, axis=1)
    ranges = _chunk_ranges(q)

    def work(ci: int):
        lo, hi = ranges[ci]
        d2 = (
            np.sum(q_means[lo:hi] ** 2, axis=1)[:, None]
            + pm_sq[None, :]
            - 2.0 * (q_means[lo:hi] @ pm.T)
            + np.sum(q_sqrt_spec[lo:hi] ** 2, axis=1)[:, None]
            + ps_sq[None, :]
            - 2.0 * (q_sqrt_spec[lo:hi] @ ps.T)
        )
        out[lo:hi] = np.argmin(d2, axis=1)

    _run_chunks(work, len(ranges), threads)
    return out


def run_beta_sweep(config: ExperimentConfig) -> list[tuple]:
    """Success-rate sweep over temperatures on a freshly sampled commuting bank."""
    if config.sphere is None:
        raise NumericError("beta sweep needs a sphere config")
    if len(config.beta_values) < 2:
        raise NumericError("beta sweep needs at least two beta values")
    fam = sample_commuting_bank(config.sphere)
    rows = run_beta_sweep_on_bank_family(
        fam,
        config.beta_values,
        config.fraction_perturbed,
        config.mean_budget_fraction,
        config.max_iters,
        config.seed,
        config.threads,
        output_path=config.output_path,
    )
    write_manifest(config.output_path, config.manifest())
    return rows


def energy_grid_1d(
    bank: MemoryBank, mu_range, sigma_range, grid_shape
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Energy of N(mu, sigma^2) over a grid; returns (mus, sigmas, E matrix).

    E[i, j] is the energy at mu = mus[i], sigma = sigmas[j].
    """
    if bank.dim != 1:
        raise DimensionError("energy grid is defined for one-dimensional banks")
    n_mu, n_sigma = grid_shape
    if n_mu < 2 or n_sigma < 2:
        raise NumericError("grid must be at least 2x2")
    mus = np.linspace(mu_range[0], mu_range[1], n_mu)
    sigmas = np.linspace(sigma_range[0], sigma_range[1], n_sigma)
    p_mu = bank.means[:, 0]
    if bank.family is not None:
        p_sigma = bank.sqrt_spectra[:, 0] * np.abs(bank.family.basis[0, 0])
    else:
        p_sigma = np.sqrt(bank.covs[:, 0, 0])
    # W2^2 in one dimension: (mu - mu_i)^2 + (sigma - sigma_i)^2.
    dmu2 = (mus[:, None] - p_mu[None, :]) ** 2
    dsg2 = (sigmas[:, None] - p_sigma[None, :]) ** 2
    d2 = dmu2[:, None, :] + dsg2[None, :, :]
    z = -bank.beta * (d2 - d2.min(axis=2, keepdims=True))
    e = d2.min(axis=2) - np.log(np.exp(z).sum(axis=2)) / bank.beta
    return mus, sigmas, e


def run_energy_grid_1d(
    bank: MemoryBank, mu_range, sigma_range, grid_shape, output_path
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Emit the 1-D energy landscape CSV plus a pattern sidecar for overlay."""
    mus, sigmas, e = energy_grid_1d(bank, mu_range, sigma_range, grid_shape)
    rows = []
    for i, mu in enumerate(mus):
        for j, sg in enumerate(sigmas):
            rows.append((float(mu), float(sg), float(e[i, j])))
    write_csv(output_path, ENERGY_GRID_COLUMNS, rows)
    p_mu = bank.means[:, 0]
    if bank.family is not None:
        p_sigma = bank.sqrt_spectra[:, 0] * np.abs(bank.family.basis[0, 0])
    else:
        p_sigma = np.sqrt(bank.covs[:, 0, 0])
    write_csv(
        str(output_path) + ".patterns.csv",
        ENERGY_GRID_SIDECAR_COLUMNS,
        [(float(m), float(s)) for m, s in zip(p_mu, p_sigma)],
    )
    return mus, sigmas, e


def find_local_minima(values: np.ndarray) -> list[tuple[int, int]]:
    """Grid cells not exceeded by any 8-neighbour (4-neighbourhood at edges)."""
    n, m = values.shape
    out = []
    for i in range(n):
        for j in range(m):
            v = values[i, j]
            neighbors = values[
                max(0, i - 1): i + 2, max(0, j - 1): j + 2
            ]
            if v <= neighbors.min():
                out.append((i, j))
    return out


def run_phi_grid_2d(
    bank: MemoryBank, x_values, y_values, query_cov: np.ndarray, output_path
) -> list[tuple]:
    """Displacement heatmap, weight functions and mean displacement vectors
    over a grid of query means with fixed covariance."""
    if bank.dim != 2:
        raise DimensionError("phi grid is defined for two-dimensional banks")
    from .geometry import GaussianMeasure
    from .memory import _iterate_distance

    columns = ["x", "y", "displacement"]
    columns += [f"w_{i + 1}" for i in range(bank.n)]
    columns += ["dx", "dy"]
    rows = []
    for x in x_values:
        for y in y_values:
            q = GaussianMeasure(mean=np.array([x, y]), cov=query_cov)
            stepped, w = dam_step_with_weights(bank, q)
            disp = _iterate_distance(bank, q, stepped)
            delta = stepped.mean - q.mean
            rows.append(
                (float(x), float(y), float(disp))
                + tuple(float(v) for v in w.values)
                + (float(delta[0]), float(delta[1]))
            )
    write_csv(output_path, columns, rows)
    return rows


def run_noncommuting_convergence(config: ExperimentConfig) -> list[tuple]:
    """Non-commuting variant: general-position bank, split-budget
    perturbation, dense update kernels; same aggregation as run_convergence."""
    if config.noncommuting is None:
        raise NumericError("non-commuting experiment needs its parameter block")
    params = config.noncommuting
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    bank_rng = np.random.default_rng(seeds[0])
    select_rng = np.random.default_rng(seeds[1])
    perturb_rng = np.random.default_rng(seeds[2])

    patterns = sample_noncommuting_bank(params.dim, params.n, params.radius_r, bank_rng)
    idx = _select_queries(select_rng, params.n, config.fraction_perturbed)

    rows = []
    for beta in config.beta_values:
        bank = MemoryBank(patterns, beta=beta)
        r_base = 1.0 / np.sqrt(beta * params.n)
        for mult in config.perturb_radius_multipliers:
            r = mult * r_base
            q_means = np.empty((idx.size, params.dim))
            q_covs = np.empty((idx.size, params.dim, params.dim))
            spec = PerturbSpec(radius_r=r, mean_budget_fraction=config.mean_budget_fraction)
            for qi, pi in enumerate(idx):
                out = perturb_to_distance(patterns[pi], spec, perturb_rng)
                q_means[qi] = out.mean
                q_covs[qi] = out.cov
            t_means = np.array([patterns[pi].mean for pi in idx])
            t_covs = np.array([patterns[pi].cov for pi in idx])
            dists = _dense_trajectories(
                bank, q_means, q_covs, t_means, t_covs, config.max_iters,
                config.threads,
            )
            rows.extend(_aggregate_rows(beta, mult, dists, config.tol))

    write_csv(config.output_path, CONVERGENCE_COLUMNS, rows)
    write_manifest(config.output_path, config.manifest())
    return rows


def _dense_trajectories(
    bank: MemoryBank,
    q_means: np.ndarray,
    q_covs: np.ndarray,
    t_means: np.ndarray,
    t_covs: np.ndarray,
    iters: int,
    threads: int,
) -> np.ndarray:
    q, d = q_means.shape
    # Keep the (chunk, N, d, d) intermediates bounded around 100 MB.
    chunk = max(1, min(CHUNK, int(1.5e7 / max(1, bank.n * d * d))))
    dists = np.empty((q, iters + 1))
    ranges = _chunk_ranges(q, chunk)

    def work(ci: int):
        lo, hi = ranges[ci]
        m = q_means[lo:hi]
        c = q_covs[lo:hi]
        dists[lo:hi, 0] = dense_batch_w2(m, c, t_means[lo:hi], t_covs[lo:hi])
        for k in range(1, iters + 1):
            m, c = dense_batch_step(bank, m, c)
            dists[lo:hi, k] = dense_batch_w2(m, c, t_means[lo:hi], t_covs[lo:hi])

    _run_chunks(work, len(ranges), threads)
    return dists
