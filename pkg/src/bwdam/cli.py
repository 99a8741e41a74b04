"""Command-line entry point: sampling, perturbation, retrieval, assumption
checks, closed-form bounds and the figure-reproduction experiments.

Exit codes: 0 success, 1 usage error, 2 numeric/assumption failure, 3 I/O or
file-format error. Every seeded invocation is byte-identical across runs and
across --threads settings.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, bankio, embeddings, experiments, theory
from .errors import BwdamError, ParseError
from .memory import MemoryBank, retrieve
from .sampling import (
    PerturbSpec,
    SphereConfig,
    batch_perturb_in_family,
    perturb_to_distance,
    sample_commuting_bank,
    sample_noncommuting_bank,
)


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise UsageError(f"bad float list {text!r}: {exc}") from exc


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise UsageError(f"bad int list {text!r}: {exc}") from exc


def _grid(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}; expected e.g. 200x200") from exc


def build_parser() -> Parser:
    p = Parser(prog="bwdam", description=__doc__)
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    p.add_argument("--out", type=str, default=None, help="output path")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="format for scalar reports (bounds, check)")
    p.add_argument("--threads", type=int, default=1, help="worker pool size")
    p.add_argument("--paper-scale", action="store_true",
                   help="use the full-scale experiment defaults (N=10000, d=50)")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="sample a pattern bank to a bank file")
    kind = sp.add_subparsers(dest="bank_kind", required=True)
    sc = kind.add_parser("commuting")
    sc.add_argument("--dim", type=int, required=True)
    sc.add_argument("--n", type=int, required=True)
    sc.add_argument("--lambda-min", type=float, required=True)
    sc.add_argument("--lambda-max", type=float, required=True)
    sc.add_argument("--radius", type=float, default=None,
                    help="sphere radius; default sqrt(d (lmin + lmax))")
    sc.add_argument("--beta", type=float, default=1.0)
    sn = kind.add_parser("noncommuting")
    sn.add_argument("--dim", type=int, required=True)
    sn.add_argument("--n", type=int, required=True)
    sn.add_argument("--radius", type=float, required=True)
    sn.add_argument("--beta", type=float, default=1.0)

    pp = sub.add_parser("perturb", help="perturb bank patterns into a query file")
    pp.add_argument("--bank", required=True)
    group = pp.add_mutually_exclusive_group(required=True)
    group.add_argument("--radius", type=float, default=None)
    group.add_argument("--multiplier", type=float, default=None,
                       help="radius as a multiple of 1/sqrt(beta N)")
    pp.add_argument("--fraction", type=float, default=1.0,
                    help="fraction of patterns to perturb")
    pp.add_argument("--mean-budget-fraction", type=float, default=0.5)

    rp = sub.add_parser("retrieve", help="run retrieval for a query file")
    rp.add_argument("--bank", required=True)
    rp.add_argument("--queries", required=True)
    rp.add_argument("--max-iters", type=int, default=50)
    rp.add_argument("--tol", type=float, default=1e-8)

    cp = sub.add_parser("check", help="assumption report for a bank")
    cp.add_argument("--bank", required=True)

    bp = sub.add_parser("bounds", help="closed-form storage/retrieval bounds")
    bkind = bp.add_subparsers(dest="bound_kind", required=True)
    bc = bkind.add_parser("capacity")
    bc.add_argument("--dim", type=int, required=True)
    bc.add_argument("--p", type=float, required=True)
    bc.add_argument("--gamma", type=float, required=True)
    bc.add_argument("--lambda-min", type=float, default=1.0)
    bk = bkind.add_parser("kappa")
    bk.add_argument("--beta", type=float, required=True)
    bk.add_argument("--n", type=int, required=True)
    bk.add_argument("--m-w", type=float, required=True)
    bi = bkind.add_parser("iters")
    bi.add_argument("--eps", type=float, required=True)
    bi.add_argument("--beta", type=float, required=True)
    bi.add_argument("--n", type=int, required=True)
    bi.add_argument("--m-w", type=float, required=True)
    bo = bkind.add_parser("one-step")
    bo.add_argument("--beta", type=float, required=True)
    bo.add_argument("--n", type=int, required=True)

    eg = sub.add_parser("energy-grid", help="1-D energy landscape CSV")
    eg.add_argument("--bank", required=True)
    eg.add_argument("--mu-min", type=float, default=-4.0)
    eg.add_argument("--mu-max", type=float, default=4.0)
    eg.add_argument("--sigma-min", type=float, default=0.01)
    eg.add_argument("--sigma-max", type=float, default=2.0)
    eg.add_argument("--grid", type=str, default="200x200")

    pg = sub.add_parser("phi-grid", help="2-D displacement/weight grid CSV")
    pg.add_argument("--bank", required=True)
    pg.add_argument("--x-min", type=float, default=-4.0)
    pg.add_argument("--x-max", type=float, default=4.0)
    pg.add_argument("--y-min", type=float, default=-4.0)
    pg.add_argument("--y-max", type=float, default=4.0)
    pg.add_argument("--grid", type=str, default="20x20")
    pg.add_argument("--query-cov", type=float, default=0.5,
                    help="scale of the fixed spherical query covariance")

    cv = sub.add_parser("convergence", help="retrieval-dynamics experiment CSV")
    cv.add_argument("--dim", type=int, default=None)
    cv.add_argument("--n", type=int, default=None)
    cv.add_argument("--lambda-min", type=float, default=1.0)
    cv.add_argument("--lambda-max", type=float, default=1.1)
    cv.add_argument("--betas", type=str, default="1,0.1")
    cv.add_argument("--multipliers", type=str, default="1,100")
    cv.add_argument("--fraction", type=float, default=0.75)
    cv.add_argument("--iters", type=int, default=10)
    cv.add_argument("--tol", type=float, default=1e-6)
    cv.add_argument("--noncommuting", action="store_true")
    cv.add_argument("--radius", type=float, default=None,
                    help="sphere radius for --noncommuting; default sqrt(2 d)")

    bs = sub.add_parser("beta-sweep", help="retrieval success rate vs beta CSV")
    src = bs.add_mutually_exclusive_group(required=True)
    src.add_argument("--bank", default=None)
    src.add_argument("--vocab", default=None)
    bs.add_argument("--betas", type=str, required=True)
    bs.add_argument("--fraction", type=float, default=1.0)
    bs.add_argument("--iters", type=int, default=10)

    em = sub.add_parser("embed", help="Gaussian word-embedding workflows")
    ekind = em.add_subparsers(dest="embed_kind", required=True)
    eg2 = ekind.add_parser("generate")
    eg2.add_argument("--n", type=int, required=True)
    eg2.add_argument("--dim", type=int, required=True)
    ei = ekind.add_parser("import")
    ei.add_argument("--path", required=True)
    er = ekind.add_parser("retrieve")
    er.add_argument("--vocab", required=True)
    er.add_argument("--word-ids", type=str, required=True)
    er.add_argument("--beta", type=float, required=True)
    er.add_argument("--iters", type=int, default=10)
    return p


def _require_out(args) -> str:
    if args.out is None:
        raise UsageError("this subcommand requires --out")
    return args.out


def _emit_report(args, payload: dict) -> None:
    if args.format == "csv":
        lines = ["key,value"]
        for k, v in payload.items():
            lines.append(f"{k},{experiments.format_float(v) if isinstance(v, float) else v}")
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_sample(args) -> int:
    out = _require_out(args)
    if args.bank_kind == "commuting":
        radius = args.radius
        if radius is None:
            radius = float(np.sqrt(args.dim * (args.lambda_min + args.lambda_max)))
        cfg = SphereConfig(
            radius_r=radius, n=args.n, lambda_min=args.lambda_min,
            lambda_max=args.lambda_max, dim=args.dim, seed=args.seed,
        )
        fam = sample_commuting_bank(cfg)
        bank = MemoryBank.from_family(fam, beta=args.beta)
    else:
        rng = np.random.default_rng(args.seed)
        patterns = sample_noncommuting_bank(args.dim, args.n, args.radius, rng)
        bank = MemoryBank(patterns, beta=args.beta)
    bankio.save_bank(bank, out)
    return 0


def _cmd_perturb(args) -> int:
    out = _require_out(args)
    bank = bankio.load_bank(args.bank)
    radius = args.radius
    if radius is None:
        radius = args.multiplier / np.sqrt(bank.beta * bank.n)
    rng = np.random.default_rng(args.seed)
    count = int(np.floor(args.fraction * bank.n))
    if count < 1:
        raise UsageError(f"--fraction {args.fraction} selects no patterns")
    idx = np.sort(rng.choice(bank.n, size=count, replace=False))

    if bank.family is not None:
        means_b, spectra = batch_perturb_in_family(
            bank.means_in_basis[idx],
            bank.family.spectra[idx],
            np.full(count, radius),
            args.mean_budget_fraction,
            rng,
        )
        measures = [
            bank.family.measure_from_coordinates(means_b[k], spectra[k])
            for k in range(count)
        ]
        bankio.save_queries(
            measures, out, original_indices=list(idx),
            basis=bank.family.basis, spectra=spectra,
        )
    else:
        spec = PerturbSpec(radius_r=radius,
                           mean_budget_fraction=args.mean_budget_fraction)
        measures = [perturb_to_distance(bank.pattern(i), spec, rng) for i in idx]
        bankio.save_queries(measures, out, original_indices=list(idx))
    return 0


TRACE_COLUMNS = ("query", "iteration", "step_w2", "w2_to_target",
                 "nearest_pattern_id")


def _cmd_retrieve(args) -> int:
    out = _require_out(args)
    bank = bankio.load_bank(args.bank)
    queries, originals = bankio.load_queries(args.queries)
    rows = []
    from .geometry import bures_w2

    for qi, (q, orig) in enumerate(zip(queries, originals)):
        target = bank.pattern(orig) if orig is not None else None
        trace = retrieve(bank, q, max_iters=args.max_iters, tol=args.tol,
                         target=target)
        for k, it in enumerate(trace.iterates):
            step = "" if k == 0 else experiments.format_float(
                bures_w2(trace.iterates[k - 1], it)
            )
            tgt = (
                experiments.format_float(trace.w2_to_target[k])
                if trace.w2_to_target is not None
                else ""
            )
            rows.append((qi, k, step, tgt, trace.nearest_pattern_ids[k]))
    experiments.write_csv(out, TRACE_COLUMNS, rows)
    return 0


def _cmd_check(args) -> int:
    bank = bankio.load_bank(args.bank)
    report = theory.check_assumptions(bank)
    payload = report.to_dict()
    if args.format == "csv":
        # Flatten the per-pattern arrays for the csv report form.
        payload = {
            "separation_threshold": payload["separation_threshold"],
            "min_delta": min(payload["delta_per_pattern"]),
            "all_separation_ok": all(payload["separation_ok"]),
            "beta_constraint_ok": payload["beta_constraint_ok"],
            "m_w": payload["m_w"],
            "lambda_min_observed": payload["lambda_min_observed"],
            "lambda_max_observed": payload["lambda_max_observed"],
            "commuting_ok": payload["commuting_ok"],
            "r_basin": payload["r_basin"],
            "kappa": payload["kappa"],
        }
    _emit_report(args, payload)
    return 0


def _cmd_bounds(args) -> int:
    if args.bound_kind == "capacity":
        inputs = theory.CapacityInputs.from_gamma(
            dim=args.dim, p_fail=args.p, gamma=args.gamma,
            lambda_min=args.lambda_min,
        )
        payload = theory.capacity_bound(inputs).to_dict()
    elif args.bound_kind == "kappa":
        payload = {
            "kappa": theory.contraction_kappa(args.beta, args.n, args.m_w),
            "r_basin": 1.0 / float(np.sqrt(args.beta * args.n)),
        }
    elif args.bound_kind == "iters":
        payload = {
            "iterations": theory.iterations_for_eps(
                args.eps, args.beta, args.n, args.m_w
            )
        }
    else:
        payload = {"bound": theory.one_step_error_bound(args.beta, args.n)}
    _emit_report(args, payload)
    return 0


def _cmd_energy_grid(args) -> int:
    out = _require_out(args)
    bank = bankio.load_bank(args.bank)
    grid = _grid(args.grid)
    experiments.run_energy_grid_1d(
        bank, (args.mu_min, args.mu_max), (args.sigma_min, args.sigma_max),
        grid, out,
    )
    write_cli_manifest(out, args, kind="energy_grid_1d")
    return 0


def _cmd_phi_grid(args) -> int:
    out = _require_out(args)
    bank = bankio.load_bank(args.bank)
    nx, ny = _grid(args.grid)
    xs = np.linspace(args.x_min, args.x_max, nx)
    ys = np.linspace(args.y_min, args.y_max, ny)
    experiments.run_phi_grid_2d(bank, xs, ys, args.query_cov * np.eye(2), out)
    write_cli_manifest(out, args, kind="phi_grid_2d")
    return 0


def _cmd_convergence(args) -> int:
    out = _require_out(args)
    if args.noncommuting:
        dim = args.dim if args.dim is not None else 10
        n = args.n if args.n is not None else 1000
        radius = args.radius if args.radius is not None else float(np.sqrt(2 * dim))
        config = experiments.ExperimentConfig(
            kind="noncommuting_convergence",
            output_path=out,
            noncommuting=experiments.NoncommutingParams(dim=dim, n=n, radius_r=radius),
            beta_values=_floats(args.betas),
            perturb_radius_multipliers=_floats(args.multipliers),
            fraction_perturbed=args.fraction,
            max_iters=args.iters,
            tol=args.tol,
            seed=args.seed,
            threads=args.threads,
        )
        experiments.run_noncommuting_convergence(config)
        return 0
    dim = args.dim if args.dim is not None else (50 if args.paper_scale else 25)
    n = args.n if args.n is not None else (10000 if args.paper_scale else 5000)
    sphere = SphereConfig.for_eigenvalue_band(
        dim=dim, n=n, lambda_min=args.lambda_min, lambda_max=args.lambda_max,
        seed=args.seed,
    )
    config = experiments.ExperimentConfig(
        kind="convergence",
        output_path=out,
        sphere=sphere,
        beta_values=_floats(args.betas),
        perturb_radius_multipliers=_floats(args.multipliers),
        fraction_perturbed=args.fraction,
        max_iters=args.iters,
        tol=args.tol,
        seed=args.seed,
        threads=args.threads,
    )
    experiments.run_convergence(config)
    return 0


def _cmd_beta_sweep(args) -> int:
    out = _require_out(args)
    if args.vocab is not None:
        fam = embeddings.load_vocabulary(args.vocab).to_family()
    else:
        bank = bankio.load_bank(args.bank)
        if bank.family is None:
            raise BwdamError("beta sweep needs a commuting or spherical bank")
        fam = bank.family
    rows = experiments.run_beta_sweep_on_bank_family(
        fam,
        _floats(args.betas),
        args.fraction,
        0.5,
        args.iters,
        args.seed,
        args.threads,
        output_path=out,
    )
    write_cli_manifest(out, args, kind="beta_sweep")
    return 0 if rows else 2


def _cmd_embed(args) -> int:
    if args.embed_kind == "generate":
        out = _require_out(args)
        vocab = embeddings.generate_synthetic_vocabulary(args.n, args.dim, args.seed)
        embeddings.save_vocabulary(vocab, out)
        return 0
    if args.embed_kind == "import":
        vocab = embeddings.load_vocabulary(args.path)
        payload = {"n": vocab.n, "dim": vocab.dim, "spherical": True}
        if args.out:
            embeddings.save_vocabulary(vocab, args.out)
        else:
            sys.stdout.write(json.dumps(payload) + "\n")
        return 0
    out = _require_out(args)
    vocab = embeddings.load_vocabulary(args.vocab)
    embeddings.word_retrieval_experiment(
        vocab, list(_ints(args.word_ids)), args.beta, args.iters, args.seed,
        output_path=out,
    )
    return 0


def write_cli_manifest(out: str, args, kind: str) -> None:
    skip = {"out", "threads", "command", "bank_kind", "bound_kind", "embed_kind",
            "format"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    experiments.write_manifest(out, {"kind": kind, "config": cfg,
                                     "seed": args.seed, "version": __version__})


_DISPATCH = {
    "sample": _cmd_sample,
    "perturb": _cmd_perturb,
    "retrieve": _cmd_retrieve,
    "check": _cmd_check,
    "bounds": _cmd_bounds,
    "energy-grid": _cmd_energy_grid,
    "phi-grid": _cmd_phi_grid,
    "convergence": _cmd_convergence,
    "beta-sweep": _cmd_beta_sweep,
    "embed": _cmd_embed,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _DISPATCH[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        parser.print_usage(sys.stderr)
        return 1
    except (ParseError, OSError) as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return 3
    except BwdamError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
