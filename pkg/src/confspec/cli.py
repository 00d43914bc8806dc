"""Command-line front end: config parsing, experiment dispatch, CSV/JSON output.

Every flag can also be set through an environment variable with the
``CONFSPEC_`` prefix (e.g. ``CONFSPEC_N=1000``); explicit flags win.  Reports
are RFC-4180 CSV with LF line endings and 17-significant-digit floats, plus a
JSON sidecar echoing the full effective config, so identical config and seed
reproduce byte-identical outputs.

Exit codes: 0 success, 1 usage or configuration error, 2 validation failure
(the experiment ran but an internal check did not pass).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import platform
import sys
from dataclasses import dataclass, field

import numpy as np
import scipy

import confspec
from confspec import experiments
from confspec.operators import (
    OperatorKind,
    conformal_laplacian,
    cylinder_threshold,
    dirac_operator,
    paneitz_operator,
)

ENV_PREFIX = "CONFSPEC_"

_OPERATORS = {
    "conformal-laplacian": conformal_laplacian,
    "paneitz": paneitz_operator,
    "dirac": dirac_operator,
}

_DEFAULT_N = {"conformal-laplacian": 3, "paneitz": 5, "dirac": 2}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; the contract wants 1
    def error(self, message):
        raise _UsageError(message)


@dataclass
class RunConfig:
    command: str
    operator: str
    n: int
    N: int = 2000
    L_grid: list[float] = field(default_factory=list)
    path: str = "auto"
    seed: int = 0
    jobs: int = 1
    ell_max: int = 8
    j_index: int = 1
    c_values: list[float] = field(default_factory=list)
    N_grid: list[int] = field(default_factory=list)
    cylinder_lengths: list[float] = field(default_factory=list)
    residual_tol: float = 1e-9
    validation_tol: float = 1e-3
    out: str | None = None


def fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def parse_range(text: str) -> list[float]:
    """Either 'start:stop:step' (inclusive) or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range syntax is start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("range step must be positive")
        values = []
        x = start
        while x <= stop + 1e-12 * max(1.0, abs(stop)):
            values.append(round(x, 12))
            x += step
        return values
    return [float(p) for p in text.split(",") if p]


def parse_int_list(text: str) -> list[int]:
    return [int(v) for v in parse_range(text)]


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--operator", required=True, choices=sorted(_OPERATORS))
    # distinct dest so the CONFSPEC_N override cannot collide with --n
    p.add_argument("--n", type=int, default=None, dest="dimension", help="sphere dimension")
    p.add_argument("--N", type=int, default=2000, help="grid size (interior nodes)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="CSV output path (JSON sidecar beside it)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="confspec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate-sphere", help="round-sphere spectra vs exact ladders")
    _add_common(p)
    p.add_argument("--ell-max", type=int, default=8)
    p.add_argument("--tolerance", type=float, default=1e-3)

    p = sub.add_parser("cylinder-thresholds", help="closed-form cylinder gap sigma")
    _add_common(p)

    p = sub.add_parser("pinocchio-sweep", help="invariant along the nose-length family")
    _add_common(p)
    p.add_argument("--L", required=True, help="nose lengths, start:stop:step or list")
    p.add_argument("--path", choices=["covariance", "intrinsic", "auto"], default="auto")

    p = sub.add_parser("convergence", help="eigenvalue trajectories and dichotomy flags")
    _add_common(p)
    p.add_argument("--L", default="2:10:2")
    p.add_argument("--j", type=int, default=1, dest="j_index")
    p.add_argument("--path", choices=["covariance", "intrinsic", "auto"], default="auto")
    p.add_argument(
        "--cylinder-lengths",
        default=None,
        help="run the exact-cylinder surrogate over these lengths instead",
    )

    p = sub.add_parser("covariance-check", help="dual-path eigenvalue agreement")
    _add_common(p)
    p.add_argument("--L", default="2")
    p.add_argument("--N-grid", default="500,1000,2000", dest="N_grid")

    p = sub.add_parser("scaling-check", help="exact constant-factor covariance law")
    _add_common(p)
    p.add_argument("--c", default="0.5,2,3", dest="c_values")
    return parser


def _apply_env_overrides(parser: argparse.ArgumentParser) -> None:
    """Seed parser defaults from CONFSPEC_* variables (explicit flags win)."""
    stack = [parser]
    while stack:
        p = stack.pop()
        for action in p._actions:
            if isinstance(action, argparse._SubParsersAction):
                stack.extend(action.choices.values())
                continue
            if not action.option_strings or action.dest == "help":
                continue
            env_name = ENV_PREFIX + action.dest.upper()
            if env_name in os.environ:
                raw = os.environ[env_name]
                value = action.type(raw) if action.type else raw
                p.set_defaults(**{action.dest: value})


def _make_operator(cfg: RunConfig) -> OperatorKind:
    return _OPERATORS[cfg.operator](cfg.n)


def _versions() -> dict:
    return {
        "confspec": confspec.__version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _write_report(cfg: RunConfig, header: list[str], rows: list[list], summary: dict):
    lines = [header] + [[fmt(v) for v in row] for row in rows]
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerows(lines)
        sidecar = os.path.splitext(cfg.out)[0] + ".json"
        payload = {
            "config": dataclasses.asdict(cfg),
            "versions": _versions(),
            "summary": summary,
        }
        with open(sidecar, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerows(lines)


def _cmd_cylinder_thresholds(cfg: RunConfig) -> int:
    sigma = cylinder_threshold(_make_operator(cfg))
    print(f"sigma,{fmt(sigma)}")
    if cfg.out:
        _write_report(cfg, ["sigma"], [[sigma]], {"pass": True, "sigma": sigma})
    return 0


def _cmd_validate_sphere(cfg: RunConfig) -> int:
    op = _make_operator(cfg)
    report = experiments.validate_sphere(
        op, N=cfg.N, ell_max=cfg.ell_max, tolerance=cfg.validation_tol, seed=cfg.seed
    )
    rows = [
        [r.label, r.computed, r.analytic, r.rel_error, r.multiplicity, r.expected_multiplicity]
        for r in report.rows
    ]
    _write_report(
        cfg,
        ["label", "computed", "analytic", "rel_error", "multiplicity", "expected_multiplicity"],
        rows,
        {"pass": report.passed, "tolerance": report.tolerance},
    )
    for r in report.rows:
        ok = r.rel_error <= report.tolerance and r.multiplicity == r.expected_multiplicity
        print(f"{'PASS' if ok else 'FAIL'} {r.label}: rel_error={r.rel_error:.3e} "
              f"multiplicity={r.multiplicity}/{r.expected_multiplicity}")
    return 0 if report.passed else 2


def _cmd_pinocchio_sweep(cfg: RunConfig) -> int:
    op = _make_operator(cfg)
    rows = experiments.pinocchio_sweep(
        op, cfg.L_grid, N=cfg.N, path=cfg.path, seed=cfg.seed, jobs=cfg.jobs
    )
    table = [
        [r.L, r.lambda_1_plus, r.volume, r.invariant, r.sigma, r.n_modes_used, r.max_residual]
        for r in rows
    ]
    failures = [r.L for r in rows if r.error is not None]
    _write_report(
        cfg,
        ["L", "lambda1plus", "volume", "invariant", "sigma", "modes", "max_residual"],
        table,
        {"pass": not failures, "failed_rows": failures},
    )
    for r in rows:
        note = f"  [{r.error}]" if r.error else ""
        print(f"L={fmt(r.L)} lambda1+={fmt(r.lambda_1_plus)} vol={fmt(r.volume)} "
              f"invariant={fmt(r.invariant)}{note}")
    return 2 if failures else 0


def _cmd_convergence(cfg: RunConfig) -> int:
    if cfg.cylinder_lengths:
        trajectory, worst = experiments.cylinder_surrogate_study(
            cfg.cylinder_lengths, N=cfg.N, n=cfg.n, seed=cfg.seed
        )
        trajectories = [trajectory]
        sigma = (cfg.n - 2) ** 2 / 4.0
        summary_extra = {"max_law_deviation": worst}
    else:
        op = _make_operator(cfg)
        report = experiments.convergence_study(
            op, cfg.j_index, cfg.L_grid, N=cfg.N, path=cfg.path, seed=cfg.seed
        )
        trajectories = list(report.trajectories)
        sigma = report.sigma
        summary_extra = {}
    rows = []
    for tr in trajectories:
        for i, (L, v) in enumerate(zip(tr.L_values, tr.values)):
            diff = math.nan if i == 0 else tr.diffs[i - 1]
            rows.append([tr.sector, L, v, diff])
    summary = {
        "pass": True,
        "sigma": sigma,
        "flags": {tr.sector: tr.flag for tr in trajectories},
        "extrapolated_limits": {tr.sector: tr.extrapolated_limit for tr in trajectories},
    }
    summary.update(summary_extra)
    _write_report(cfg, ["sector", "L", "lambda", "diff"], rows, summary)
    for tr in trajectories:
        print(f"sector {tr.sector}: flag={tr.flag} "
              f"final={fmt(tr.values[-1])} limit~{fmt(tr.extrapolated_limit)}")
    return 0


def _cmd_covariance_check(cfg: RunConfig) -> int:
    op = _make_operator(cfg)
    L = cfg.L_grid[0]
    rows = experiments.covariance_crosscheck(op, L, cfg.N_grid, seed=cfg.seed)
    table = [[r.N, r.discrepancy, r.ratio] for r in rows]
    decreasing = all(b.discrepancy < a.discrepancy for a, b in zip(rows, rows[1:]))
    final_ok = rows[-1].discrepancy <= 1e-3
    _write_report(
        cfg,
        ["N", "discrepancy", "ratio"],
        table,
        {"pass": decreasing and final_ok, "decreasing": decreasing, "final_ok": final_ok},
    )
    for r in rows:
        print(f"N={r.N} discrepancy={r.discrepancy:.3e} ratio={fmt(r.ratio)}")
    return 0 if decreasing and final_ok else 2


def _cmd_scaling_check(cfg: RunConfig) -> int:
    op = _make_operator(cfg)
    reports = [experiments.scaling_check(op, c, seed=cfg.seed) for c in cfg.c_values]
    table = [
        [r.operator, r.c, r.eig_rel_err, r.pointwise_rel_err, r.invariant_rel_err,
         r.volume_rel_err, r.passed]
        for r in reports
    ]
    ok = all(r.passed for r in reports)
    _write_report(
        cfg,
        ["operator", "c", "eig_rel_err", "pointwise_rel_err", "invariant_rel_err",
         "volume_rel_err", "passed"],
        table,
        {"pass": ok},
    )
    for r in reports:
        print(f"c={fmt(r.c)}: eig={r.eig_rel_err:.2e} invariant={r.invariant_rel_err:.2e} "
              f"{'PASS' if r.passed else 'FAIL'}")
    return 0 if ok else 2


_COMMANDS = {
    "validate-sphere": _cmd_validate_sphere,
    "cylinder-thresholds": _cmd_cylinder_thresholds,
    "pinocchio-sweep": _cmd_pinocchio_sweep,
    "convergence": _cmd_convergence,
    "covariance-check": _cmd_covariance_check,
    "scaling-check": _cmd_scaling_check,
}


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    n = args.dimension if args.dimension is not None else _DEFAULT_N[args.operator]
    cfg = RunConfig(command=args.command, operator=args.operator, n=n)
    cfg.N = args.N
    cfg.seed = args.seed
    cfg.jobs = args.jobs
    cfg.out = args.out
    if hasattr(args, "path"):
        cfg.path = args.path
    if hasattr(args, "L"):
        cfg.L_grid = parse_range(args.L)
    if hasattr(args, "ell_max"):
        cfg.ell_max = args.ell_max
    if hasattr(args, "tolerance"):
        cfg.validation_tol = args.tolerance
    if hasattr(args, "j_index"):
        cfg.j_index = args.j_index
    if hasattr(args, "c_values"):
        cfg.c_values = parse_range(args.c_values)
    if hasattr(args, "N_grid"):
        cfg.N_grid = parse_int_list(args.N_grid)
    if getattr(args, "cylinder_lengths", None):
        cfg.cylinder_lengths = parse_range(args.cylinder_lengths)
    return cfg


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_env_overrides(parser)
        args = parser.parse_args(argv)
        cfg = _config_from_args(args)
        _make_operator(cfg)  # dimension constraints checked up front
        return _COMMANDS[args.command](cfg)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
