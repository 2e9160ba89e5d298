"""Experiment orchestration: runs configured solves and sweeps, applies the
resolvability guard, evaluates the configured verdict checks, and emits the
CSV/report artifacts."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analytic import derive_exponents, sigma_const
from .blowup import (
    MonotonicityReport,
    SweepRecord,
    boundary_monotonicity_check,
    build_records,
    dirac_limit_check,
    envelope_check,
    mu_power_check,
    smooth_bump,
)
from .config import ExperimentConfig
from .discretization import DomainSpec, Grid, assemble_kernel, build_grid
from .solver import (
    ExtremalSolution,
    SolverOptions,
    continuation_sweep,
    solve,
)

RESOLVABILITY_CELLS = 4.0   # keep records only while mu >= 4 h


@dataclass(frozen=True)
class SweepAnalysis:
    config: ExperimentConfig
    domain: DomainSpec
    grid: Grid
    solutions: list[ExtremalSolution]
    records: list[SweepRecord]
    x0: np.ndarray
    sigma: float
    truncated_qs: tuple[float, ...]
    envelope_constants: tuple[float, ...]
    mu_powers: tuple[float, ...]
    dirac_values: tuple[float, ...]
    dirac_target: float | None
    monotonicity: MonotonicityReport | None


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: str
    bound: str
    tol: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: measured={self.measured} bound={self.bound} tol={self.tol}"


def solver_options(cfg: ExperimentConfig) -> SolverOptions:
    return SolverOptions(tol_residual=cfg.tol_residual, max_iter=cfg.max_iter,
                         damping=cfg.damping)


def run_single(cfg: ExperimentConfig) -> ExtremalSolution:
    """Solve the one-entry schedule of a `solve`-command config."""
    domain = cfg.make_domain()
    grid = build_grid(domain, cfg.resolution)
    exps = derive_exponents(cfg.n, cfg.alpha, cfg.q_schedule[0])
    K = assemble_kernel(grid, exps, storage="auto")
    return solve(K, exps, solver_options(cfg))


def _solve_schedule(cfg: ExperimentConfig, guard):
    """Solutions along the schedule, truncated by the resolvability guard.

    Warm-started runs are sequential and stop at the first unresolvable q;
    with warm_start = false the q-solves are independent and may be spread
    over a thread pool, truncation applied afterwards in schedule order.
    """
    domain = cfg.make_domain()
    grid = build_grid(domain, cfg.resolution)
    exps0 = derive_exponents(cfg.n, cfg.alpha, cfg.q_schedule[0])
    kernel = assemble_kernel(grid, exps0, storage="auto")
    opts = solver_options(cfg)
    truncated: list[float] = []

    if cfg.warm_start:
        def stop_when(sol: ExtremalSolution) -> bool:
            if guard(sol):
                return False
            truncated.append(sol.exponents.q)
            return True

        kept = continuation_sweep(domain, cfg.n, cfg.alpha, cfg.q_schedule,
                                  cfg.resolution, opts, kernel=kernel,
                                  stop_when=stop_when)
        truncated.extend(cfg.q_schedule[len(kept) + len(truncated):])
    else:
        all_exps = [derive_exponents(cfg.n, cfg.alpha, q) for q in cfg.q_schedule]
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                sols = list(pool.map(lambda e: solve(kernel, e, opts), all_exps))
        else:
            sols = [solve(kernel, e, opts) for e in all_exps]
        # keep the resolvable prefix: everything at and past the first
        # unresolvable q is dropped
        kept = []
        for sol in sols:
            if not truncated and guard(sol):
                kept.append(sol)
            else:
                truncated.append(sol.exponents.q)
    return domain, grid, kept, truncated


def run_sweep(cfg: ExperimentConfig) -> SweepAnalysis:
    """Full sweep pipeline: solve, truncate by mu >= 4h, assemble records,
    evaluate envelope/Dirac/monotonicity diagnostics."""
    sigma = sigma_const(cfg.n, cfg.alpha)

    def resolvable(sol: ExtremalSolution) -> bool:
        from .blowup import concentration_scale, extremal_index
        idx = extremal_index(sol)
        mu = concentration_scale(sol, float(sol.u[idx]))
        return mu >= RESOLVABILITY_CELLS * sol.grid.h

    domain, grid, solutions, truncated = _solve_schedule(cfg, resolvable)
    if not solutions:
        raise RuntimeError(
            "the whole q-schedule is unresolvable at this resolution "
            f"(mu < {RESOLVABILITY_CELLS} h for every q)"
        )
    records, x0 = build_records(
        solutions, sigma,
        probe_distances=cfg.probe_distances,
        fit_r_max=cfg.fit_window,
        r_min=cfg.probe_exclusion,
    )
    envelope = tuple(envelope_check(s, r) for s, r in zip(solutions, records))
    p_crit = solutions[0].exponents.p_crit
    mu_powers = tuple(mu_power_check(records, p_crit)) if len(records) >= 3 else ()

    dirac_values: tuple[float, ...] = ()
    dirac_target = None
    if cfg.bump_width is not None:
        center = x0.copy()
        center[0] += cfg.bump_offset
        dirac_values = tuple(dirac_limit_check(solutions, sigma, center, cfg.bump_width))
        dirac_target = sigma * float(smooth_bump(x0[None, :], center, cfg.bump_width)[0])

    monotonicity = None
    if cfg.monotone_fraction_min is not None:
        t0 = cfg.boundary_t0 if cfg.boundary_t0 is not None else 0.45 * domain.inradius
        monotonicity = boundary_monotonicity_check(
            solutions[-1], t0=t0, aperture=cfg.boundary_aperture,
            rel_tol=cfg.monotone_rel_tol,
        )

    return SweepAnalysis(
        config=cfg, domain=domain, grid=grid, solutions=solutions,
        records=records, x0=x0, sigma=sigma, truncated_qs=tuple(truncated),
        envelope_constants=envelope, mu_powers=mu_powers,
        dirac_values=dirac_values, dirac_target=dirac_target,
        monotonicity=monotonicity,
    )


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.6g}"


def evaluate_checks(analysis: SweepAnalysis) -> list[CheckResult]:
    """Grade the sweep against every tolerance named in the config."""
    cfg = analysis.config
    records = analysis.records
    reversed_regime = analysis.solutions[0].exponents.is_reversed
    out: list[CheckResult] = []

    # solver contract on every kept record
    worst_res = max(s.residual for s in analysis.solutions)
    out.append(CheckResult(
        "solver_residual", worst_res <= cfg.tol_residual,
        _fmt(worst_res), f"<={_fmt(cfg.tol_residual)}", "relative sup-norm"))

    u_ext = [r.u_extreme for r in records]
    if len(records) >= 2:
        if reversed_regime:
            trend_ok = all(b < a for a, b in zip(u_ext, u_ext[1:]))
            direction = "strictly decreasing"
        else:
            trend_ok = all(b > a for a, b in zip(u_ext, u_ext[1:]))
            direction = "strictly increasing"
        out.append(CheckResult(
            "u_extreme_trend", trend_ok,
            "[" + ", ".join(_fmt(v) for v in u_ext) + "]", direction, "strict"))
        mus = [r.mu for r in records]
        mu_ok = all(b < a for a, b in zip(mus, mus[1:]))
        out.append(CheckResult(
            "mu_trend", mu_ok,
            "[" + ", ".join(_fmt(v) for v in mus) + "]", "strictly decreasing", "strict"))

    if cfg.u_growth_min is not None and len(records) >= 2:
        factor = (u_ext[0] / u_ext[-1]) if reversed_regime else (u_ext[-1] / u_ext[0])
        out.append(CheckResult(
            "u_extreme_growth", factor >= cfg.u_growth_min,
            _fmt(factor), f">={_fmt(cfg.u_growth_min)}x", "ratio finest/coarsest"))

    if cfg.interior_delta is not None:
        worst = min(r.boundary_dist for r in records)
        out.append(CheckResult(
            "interior_localization", worst >= cfg.interior_delta,
            _fmt(worst), f">={_fmt(cfg.interior_delta)}", "min over records"))

    if cfg.mu_power_final_min is not None and analysis.mu_powers:
        vals = analysis.mu_powers
        increasing = all(b >= a * (1.0 - 1e-9) for a, b in zip(vals, vals[1:]))
        final_ok = vals[-1] >= cfg.mu_power_final_min
        out.append(CheckResult(
            "mu_power_limit", increasing and final_ok,
            "[" + ", ".join(_fmt(v) for v in vals) + "]",
            f"final>={_fmt(cfg.mu_power_final_min)}, trend toward 1", "1e-9 slack"))

    if cfg.constraint_dev_max is not None:
        fit = records[-1].fit
        if fit is None:
            out.append(CheckResult("bubble_fit", False, "no fit (window too thin)",
                                   f"dev<={_fmt(cfg.constraint_dev_max)}", "-"))
        else:
            ok = fit.constraint_dev <= cfg.constraint_dev_max
            note = f"rms={_fmt(fit.rms_residual)}"
            if cfg.fit_rms_max is not None:
                ok = ok and fit.rms_residual <= cfg.fit_rms_max
                note += f"<={_fmt(cfg.fit_rms_max)}"
            out.append(CheckResult(
                "bubble_fit", ok, f"dev={_fmt(fit.constraint_dev)}",
                f"<={_fmt(cfg.constraint_dev_max)}", note))

    if cfg.sigma_ratio_band is not None and records[-1].sigma_ratios:
        ratios = records[-1].sigma_ratios
        lo, hi = 1.0 - cfg.sigma_ratio_band, 1.0 + cfg.sigma_ratio_band
        ok = all(lo <= r <= hi for r in ratios)
        out.append(CheckResult(
            "product_limit_ratios", ok,
            f"[{_fmt(min(ratios))}, {_fmt(max(ratios))}]",
            f"within [{_fmt(lo)}, {_fmt(hi)}]", "finest q"))

    if cfg.dirac_band is not None and analysis.dirac_values:
        target = analysis.dirac_target
        final = analysis.dirac_values[-1]
        rel = abs(final - target) / abs(target)
        out.append(CheckResult(
            "dirac_mass", rel <= cfg.dirac_band,
            f"{_fmt(final)} vs {_fmt(target)}",
            f"rel err<={_fmt(cfg.dirac_band)}", f"rel={_fmt(rel)}"))

    if cfg.envelope_spread_max is not None and analysis.envelope_constants:
        consts = analysis.envelope_constants
        med = float(np.median(consts))
        if reversed_regime:
            ok = min(consts) >= med / cfg.envelope_spread_max
            measured = f"min/median={_fmt(min(consts) / med)}"
            bound = f">={_fmt(1.0 / cfg.envelope_spread_max)}"
        else:
            worst = max(max(consts) / med, med / min(consts))
            ok = worst <= cfg.envelope_spread_max
            measured = f"worst factor={_fmt(worst)}"
            bound = f"<={_fmt(cfg.envelope_spread_max)}"
        out.append(CheckResult("envelope_constants", ok, measured, bound,
                               "across sweep vs median"))

    if cfg.monotone_fraction_min is not None and analysis.monotonicity is not None:
        rep = analysis.monotonicity
        out.append(CheckResult(
            "boundary_monotonicity", rep.fraction_monotone >= cfg.monotone_fraction_min,
            f"fraction={_fmt(rep.fraction_monotone)} worst={_fmt(rep.worst_violation)}",
            f">={_fmt(cfg.monotone_fraction_min)}",
            f"rel tol {_fmt(cfg.monotone_rel_tol)}"))

    return out


def format_report(results: list[CheckResult], truncated_qs=()) -> str:
    lines = [r.line() for r in results]
    if truncated_qs:
        lines.append(f"# truncated (mu < {RESOLVABILITY_CELLS:g} h): "
                     + ", ".join(_fmt(q) for q in truncated_qs))
    verdict = "ALL PASS" if all(r.passed for r in results) else "FAILURES PRESENT"
    lines.append(f"# verdict: {verdict}")
    return "\n".join(lines) + "\n"
