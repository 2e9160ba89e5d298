"""Command-line front end.

Commands:
  constants  print the closed-form constant table for (n, alpha)
  solve      run a single-q experiment, write solution CSV + metadata
  sweep      run a q-schedule, write the per-q diagnostics CSV
  verify     run a sweep and grade every configured check, PASS/FAIL report

Exit codes: 0 success, 1 verification failure, 2 config error,
3 solver non-convergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace as dc_replace
from pathlib import Path

from .analytic import (
    ParameterError,
    bubble_integrals,
    derive_exponents,
    pin_bubble,
    sharp_constant,
    sigma_const,
)
from .blowup import write_sweep_csv
from .config import ConfigError, ExperimentConfig, load_config, resolve_config_path
from .harness import evaluate_checks, format_report, run_single, run_sweep
from .solver import ConvergenceError, write_solution_csv

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3
EXIT_IO = 4


def _fmt6(x: float) -> str:
    """Six-decimal fixed point with trailing zeros stripped (`0.5`, not `0.500000`)."""
    s = f"{x:.6f}".rstrip("0").rstrip(".")
    return s if s else "0"


def cmd_constants(args) -> int:
    n, alpha = args.n, args.alpha
    sigma = sigma_const(n, alpha)   # validates n >= 1, alpha > 1, alpha != n
    q_crit = 2.0 * n / (n + alpha)
    p_crit = 2.0 * n / (n - alpha)
    prof = pin_bubble(n, alpha)
    full, reduced = bubble_integrals(prof)
    rows = [
        ("q_crit", q_crit),
        ("p_crit", p_crit),
        ("sigma", sigma),
        ("xi_sharp", sharp_constant(n, alpha)),
        ("c1", prof.c1),
        ("c2", prof.c2),
        ("bubble_full_integral", full),
        ("bubble_reduced_integral", reduced),
    ]
    for name, value in rows:
        print(f"{name}={_fmt6(value)}")
    return EXIT_OK


def _load(args) -> ExperimentConfig:
    cfg = load_config(resolve_config_path(args.config))
    if args.out is not None:
        cfg = dc_replace(cfg, out_dir=args.out)
    if args.threads is not None:
        cfg = dc_replace(cfg, threads=args.threads)
    return cfg


def _ensure_out(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args) -> int:
    cfg = _load(args)
    if len(cfg.q_schedule) != 1:
        raise ConfigError(
            f"`solve` expects a single-entry q_schedule, got {len(cfg.q_schedule)} entries"
        )
    sol = run_single(cfg)
    out = _ensure_out(cfg)
    write_solution_csv(sol, out / "solution.csv")
    if not sol.converged:
        print(f"non-converged: residual {sol.residual:.3e} after {sol.iterations} "
              f"iterations", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    print(f"solution written to {out / 'solution.csv'} "
          f"(residual {sol.residual:.3e}, {sol.iterations} iterations)")
    return EXIT_OK


def _run_checked_sweep(cfg: ExperimentConfig):
    analysis = run_sweep(cfg)
    for sol in analysis.solutions:
        if not sol.converged:
            raise ConvergenceError(
                f"q={sol.exponents.q}: residual {sol.residual:.3e} after "
                f"{sol.iterations} iterations"
            )
    if analysis.truncated_qs:
        print("resolvability guard truncated q = "
              + ", ".join(f"{q:g}" for q in analysis.truncated_qs), file=sys.stderr)
    return analysis


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if len(cfg.q_schedule) < 3:
        raise ConfigError(
            f"`sweep` expects a q_schedule of length >= 3, got {len(cfg.q_schedule)}"
        )
    analysis = _run_checked_sweep(cfg)
    out = _ensure_out(cfg)
    write_sweep_csv(analysis.records, out / "sweep.csv", dim=analysis.grid.dim)
    print(f"{len(analysis.records)} rows written to {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load(args)
    if len(cfg.q_schedule) < 3:
        raise ConfigError(
            f"`verify` expects a q_schedule of length >= 3, got {len(cfg.q_schedule)}"
        )
    analysis = _run_checked_sweep(cfg)
    results = evaluate_checks(analysis)
    report = format_report(results, analysis.truncated_qs)
    out = _ensure_out(cfg)
    write_sweep_csv(analysis.records, out / "sweep.csv", dim=analysis.grid.dim)
    (out / "report.txt").write_text(report)
    print(report, end="")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rieszlab",
        description="Solver and verification laboratory for subcritical "
                    "Riesz-kernel integral equations on bounded domains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_const = sub.add_parser("constants", help="print the closed-form constant table")
    p_const.add_argument("--n", type=int, required=True, help="space dimension")
    p_const.add_argument("--alpha", type=float, required=True, help="kernel order")
    p_const.set_defaults(func=cmd_constants)

    for name, func, desc in (
        ("solve", cmd_solve, "single-q solve, writes solution CSV + metadata"),
        ("sweep", cmd_sweep, "q-schedule sweep, writes per-q diagnostics CSV"),
        ("verify", cmd_verify, "sweep + PASS/FAIL report for all configured checks"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True,
                       help="config file path or shipped name (desk_1d_reversed, desk_2d_hls)")
        p.add_argument("--out", default=None, help="override the config's output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for independent q-solves (needs warm_start=false)")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as err:
        print(f"solver failed to converge: {err}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO


def console_main() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()
