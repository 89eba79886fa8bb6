"""Command-line driver for the QCF stability experiments.

Usage::

    qcfstab table1 --N 50,100 --phi2F -0.1,-0.15 -o table1.csv
    qcfstab table2 --N 10,30 --phi2F -0.1 -o table2.csv
    qcfstab figure1 --N 20,40,80 -o figure1.csv      # also writes figure1.svg
    qcfstab coercivity --N 16,32,64 --phi2F -0.1 -o coercivity.csv

The worker pool size is read from ``QCFSTAB_WORKERS`` (default 1).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chain import ChainConfig, project_zero_mean
from .dynamics import dynamical_stability_audit, evolve_spectral, default_horizon
from .forces import LinearizedCoefficients
from .output import write_csv, write_svg_lines
from .spectral import DiagonalizationError, qcf_eigenbasis, table1, table2
from .stability import (
    coercivity_infimum,
    figure1_sweep,
    fit_exponent,
    instability_witness,
    u1inf_stability_constant,
    u2inf_stability_check,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICS = 0, 2, 3

DEFAULT_RATIOS = "0.05,0.1,0.15,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0"


class SpecError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _p_value(text: str) -> float:
    return math.inf if text.strip().lower() in ("inf", "infinity") else float(text)


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based stream for ``(seed, *keys)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *keys])))


def _k_rule(args):
    if args.K == "half":
        return lambda N: N // 2
    try:
        K = int(args.K)
    except ValueError:
        raise SpecError(f"--K must be an integer or 'half', got {args.K!r}")
    return lambda N: K


def _configs(args) -> list[ChainConfig]:
    rule = _k_rule(args)
    try:
        return [ChainConfig(N, rule(N)) for N in args.N]
    except ValueError as exc:
        raise SpecError(str(exc))


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("QCFSTAB_WORKERS", "1")))
    except ValueError:
        return 1


def _params(args) -> dict:
    skip = {"func", "output", "command"}
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in skip or value is None:
            continue
        out[key] = ",".join(format(v, "g") if isinstance(v, float) else str(v) for v in value) if isinstance(value, list) else value
    return out


# --- commands -----------------------------------------------------------------


def cmd_figure1(args):
    rule = _k_rule(args)
    _configs(args)
    rows = figure1_sweep(args.N, args.ratios, args.phiF, rule, workers=_workers())
    cols = ["N", "K", "ratio", "t_norm", "analytic_t_bound", "note"]
    data = [
        {
            "N": r.N,
            "K": r.K,
            "ratio": r.ratio,
            "t_norm": r.t_norm,
            "analytic_t_bound": r.analytic_bound,
            "note": r.note,
        }
        for r in rows
    ]
    failed = any(not math.isfinite(r.t_norm) for r in rows)
    write_csv(args.output, "figure1", _params(args), cols, data, "FAILED: singular cells" if failed else "ok")
    series = {}
    for r in rows:
        xs, ys = series.setdefault(f"N={r.N}", ([], []))
        xs.append(r.ratio)
        ys.append(r.t_norm)
    svg = Path(args.svg) if args.svg else Path(args.output).with_suffix(".svg")
    write_svg_lines(svg, series, "A_F / phi''_F", "||T||_inf")
    return EXIT_NUMERICS if failed else EXIT_OK


def _table(args, fn, name, value_col):
    _configs(args)
    rows = fn(args.N, args.phi2F, args.phiF, workers=_workers())
    data = [
        {"N": r["N"], "K": r["K"], "phiF": args.phiF, "phi2F": r["phi2F"], value_col: r["value"],
         "reference": r["reference"], "error": r["error"]}
        for r in rows
    ]  # fmt: skip
    failed = [r for r in rows if r["error"]]
    status = f"FAILED: {len(failed)} cell(s) failed certification" if failed else "ok"
    cols = ["N", "K", "phiF", "phi2F", value_col, "reference", "error"]
    write_csv(args.output, name, _params(args), cols, data, status)
    return EXIT_NUMERICS if failed else EXIT_OK


def cmd_table1(args):
    return _table(args, table1, "table1", "spectrum_distance")


def cmd_table2(args):
    return _table(args, table2, "table2", "cond_V")


def cmd_coercivity(args):
    cfgs = _configs(args)
    data = []
    for b in args.phi2F:
        coeffs = LinearizedCoefficients(args.phiF, b)
        for cfg in cfgs:
            res = coercivity_infimum(coeffs, cfg)
            data.append({"N": cfg.N, "K": cfg.K, "phiF": args.phiF, "phi2F": b,
                         "min_value": res.min_value, "min_over_sqrtN": res.min_value / math.sqrt(cfg.N)})  # fmt: skip
        vals = [d["min_value"] for d in data if d["phi2F"] == b]
        if len(vals) >= 2 and all(v < 0 for v in vals):
            print(f"phi2F={b:g}: log-log slope of |min| = {fit_exponent(args.N, vals, window=len(vals)):.4f}")
        else:
            print(f"phi2F={b:g}: minima not all negative, no slope fitted")
    cols = ["N", "K", "phiF", "phi2F", "min_value", "min_over_sqrtN"]
    write_csv(args.output, "coercivity", _params(args), cols, data)
    return EXIT_OK


def cmd_witness(args):
    cfgs = _configs(args)
    data = []
    for b in args.phi2F:
        coeffs = LinearizedCoefficients(args.phiF, b)
        for p in args.p:
            ratios = []
            for cfg in cfgs:
                try:
                    w = instability_witness(coeffs, cfg, p)
                except ValueError as exc:
                    raise SpecError(str(exc))
                ratios.append(w.ratio)
                data.append({"N": cfg.N, "K": cfg.K, "phiF": args.phiF, "phi2F": b, "p": p,
                             "ratio": w.ratio, "ratio_holder": w.ratio_holder})  # fmt: skip
            if len(cfgs) >= 2:
                window = min(3, len(cfgs))
                print(f"phi2F={b:g} p={p:g}: fitted exponent {fit_exponent(args.N, ratios, window):.4f} (expected {1 / p:.4f})")
    cols = ["N", "K", "phiF", "phi2F", "p", "ratio", "ratio_holder"]
    write_csv(args.output, "witness", _params(args), cols, data)
    return EXIT_OK


def cmd_u2inf(args):
    cfgs = _configs(args)
    data = []
    for b in args.phi2F:
        coeffs = LinearizedCoefficients(args.phiF, b)
        for cfg in cfgs:
            rep = u2inf_stability_check(coeffs, cfg, args.samples, make_rng(args.seed, cfg.N))
            data.append({"N": cfg.N, "K": cfg.K, "phiF": args.phiF, "phi2F": b,
                         "hypothesis": rep.hypothesis_holds, "bound": rep.bound, "samples": rep.samples,
                         "l2tilde_violations": rep.l2tilde_violations,
                         "inverse_violations": rep.inverse_violations,
                         "worst_l2tilde_ratio": rep.worst_l2tilde_ratio,
                         "worst_inverse_ratio": rep.worst_inverse_ratio})  # fmt: skip
    cols = ["N", "K", "phiF", "phi2F", "hypothesis", "bound", "samples", "l2tilde_violations",
            "inverse_violations", "worst_l2tilde_ratio", "worst_inverse_ratio"]  # fmt: skip
    write_csv(args.output, "u2inf", _params(args), cols, data)
    return EXIT_OK


def cmd_u1inf(args):
    cfgs = _configs(args)
    data = []
    for b in args.phi2F:
        coeffs = LinearizedCoefficients(args.phiF, b)
        for cfg in cfgs:
            rep = u1inf_stability_constant(coeffs, cfg)
            data.append({"N": cfg.N, "K": cfg.K, "phiF": args.phiF, "phi2F": b, "norm": rep.value,
                         "half_split_norm": rep.half_split_value, "t_norm": rep.t_norm,
                         "analytic_t_bound": rep.analytic_bound})  # fmt: skip
    cols = ["N", "K", "phiF", "phi2F", "norm", "half_split_norm", "t_norm", "analytic_t_bound"]
    write_csv(args.output, "u1inf", _params(args), cols, data)
    return EXIT_OK


def cmd_dynamics(args):
    if len(args.phi2F) != 1:
        raise SpecError("dynamics takes a single --phi2F value")
    coeffs = LinearizedCoefficients(args.phiF, args.phi2F[0])
    cfgs = _configs(args)
    rule = _k_rule(args)
    try:
        rows = dynamical_stability_audit(
            coeffs, args.N, args.horizon, args.trials, args.seed, rule, workers=_workers()
        )
    except DiagonalizationError as exc:
        print(f"diagonalization failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    data = [
        {"N": r.N, "K": r.K, "trials": r.trials, "max_peak_ratio": r.max_peak_ratio, "cond_V": r.cond_V,
         "stable": r.stable, "offending_eigenvalue": r.offending_eigenvalue}
        for r in rows
    ]  # fmt: skip
    cols = ["N", "K", "trials", "max_peak_ratio", "cond_V", "stable", "offending_eigenvalue"]
    write_csv(args.output, "dynamics", _params(args), cols, data)
    if args.trajectory and rows[0].stable:
        cfg = cfgs[0]
        basis = qcf_eigenbasis(coeffs, cfg)
        T = default_horizon(basis) if args.horizon is None else args.horizon
        u0 = project_zero_mean(make_rng(args.seed, cfg.N, 1).standard_normal(cfg.size), cfg)
        traj = evolve_spectral(u0, coeffs, cfg, np.linspace(0.0, T, 2001), basis=basis)
        write_csv(
            args.trajectory,
            "trajectory",
            {**_params(args), "trajectory_N": cfg.N},
            ["t", "norm"],
            [{"t": t, "norm": n} for t, n in zip(traj.times.tolist(), traj.norms.tolist())],
        )
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcfstab", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"qcfstab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, N, phi2F, help, with_K=True):
        p = sub.add_parser(name, help=help)
        p.add_argument("--N", type=_ints, default=_ints(N), help="comma-separated N values")
        if with_K:
            p.add_argument("--K", default="half", help="atomistic half-width, or 'half' for K = N/2")
        else:
            p.set_defaults(K="half")
        p.add_argument("--phiF", type=float, default=1.0)
        p.add_argument("--phi2F", type=_floats, default=_floats(phi2F), help="comma-separated phi''_2F values")
        p.add_argument("-o", "--output", required=True, help="CSV output path")
        p.set_defaults(func=func)
        return p

    p = add("figure1", cmd_figure1, "20,40,80,160", "0", "||T||_inf against A_F/phi''_F")
    p.add_argument("--ratios", type=_floats, default=_floats(DEFAULT_RATIOS))
    p.add_argument("--svg", default=None, help="SVG path (default: output with .svg suffix)")
    add("table1", cmd_table1, "50,100,150", "0,-0.1,-0.15,-0.2,-0.25", "QCF vs QNL spectrum distance", with_K=False)
    add("table2", cmd_table2, "10,30,90", "0,-0.1,-0.15,-0.2,-0.24", "eigenvector condition numbers", with_K=False)
    add("coercivity", cmd_coercivity, "16,32,64,128,256", "-0.1", "coercivity infimum")
    p = add("witness", cmd_witness, "32,64,128,256", "-0.1", "U^{1,p} instability witness")
    p.add_argument("--p", type=lambda s: [_p_value(x) for x in s.split(",")], default=[1.0, 2.0])
    p = add("u2inf", cmd_u2inf, "32", "-0.15", "U^{2,inf} stability audit")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    add("u1inf", cmd_u1inf, "4,6,8", "-0.1", "exact U^{1,inf} stability constant")
    p = add("dynamics", cmd_dynamics, "30,90", "-0.2", "linearized dynamics audit")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--trajectory", default=None, help="also write (t, norm) for the first N")
    return parser


_NUMERIC_FLAGS = ("--phiF", "--phi2F", "--ratios", "--horizon")


def _join_negative_values(argv: list[str]) -> list[str]:
    # argparse takes "-0.1,-0.2" for an option; bind it to its flag explicitly
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _NUMERIC_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_join_negative_values(argv))
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"qcfstab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
