"""Normalized fixed-point solver for the stationarity equation f^{q-1} = Kf.

The iteration keeps ||f||_q = 1 and updates

    f  <-  normalize( f^{1-theta} * (Kf)^{theta/(q-1)} )

which ascends the energy quotient when the kernel order is below the
dimension (maximizer regime, q > 1) and descends it in the growing-kernel
regime (q < 1, where the exponent 1/(q-1) is negative and the update map is
order-reversing; damping theta < 1 suppresses the resulting two-cycles).

Convergence is certified by the relative sup-norm residual of the
multiplier-scaled equation xi * f^{q-1} = Kf; the returned solution is
rescaled by xi^{1/(q-2)} so that f^{q-1} = Kf holds on the nose, which makes
||f||_q = xi^{1/(q-2)} an identity rather than a separate estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .analytic import Exponents, ParameterError, derive_exponents
from .discretization import (
    DomainSpec,
    Grid,
    KernelOperator,
    apply_kernel,
    assemble_kernel,
    build_grid,
    lq_norm,
)

_LOG_SPACE_FLOOR = 1e-200   # below this, powers of Kf are taken in log space
_THETA_FLOOR = 1.0 / 64.0


class ConvergenceError(RuntimeError):
    """The iteration could not be stabilized (or produced non-finite values)."""


@dataclass(frozen=True)
class SolverOptions:
    tol_residual: float = 1e-9
    max_iter: int = 20000
    damping: float = 1.0
    init: np.ndarray | None = None    # None = constant start

    def __post_init__(self):
        if not self.tol_residual > 0.0:
            raise ParameterError(f"tol_residual must be positive, got {self.tol_residual}")
        if not 0.0 < self.damping <= 1.0:
            raise ParameterError(f"damping must lie in (0, 1], got {self.damping}")
        if self.max_iter < 1:
            raise ParameterError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class ExtremalSolution:
    """Converged extremal: f solves f^{q-1} = Kf, u = f^{q-1} pointwise."""

    f: np.ndarray
    u: np.ndarray
    xi_est: float
    residual: float
    iterations: int
    exponents: Exponents
    grid: Grid
    converged: bool
    theta_final: float
    quotient_trace: np.ndarray = field(repr=False, default=None)

    @property
    def f_normalized(self) -> np.ndarray:
        """The unit-q-norm iterate the solver actually worked with."""
        return self.f / self.xi_est ** (1.0 / (self.exponents.q - 2.0))


def _power_update(f: np.ndarray, Kf: np.ndarray, q: float, theta: float) -> np.ndarray:
    """One un-normalized update f^{1-theta} * (Kf)^{theta/(q-1)}.

    Kf is rescaled by its maximum before powering (the normalization step
    absorbs constants), and the computation drops to log space when Kf
    underflows toward zero.  Non-finite output aborts with diagnostics.
    """
    expo = theta / (q - 1.0)
    kf_max = float(np.max(Kf))
    kf_min = float(np.min(Kf))
    if not (np.isfinite(kf_max) and kf_min > 0.0):
        raise ConvergenceError(
            f"kernel image left the positive cone: min(Kf)={kf_min}, max(Kf)={kf_max}"
        )
    with np.errstate(over="ignore", under="ignore"):
        if kf_min < _LOG_SPACE_FLOOR:
            out = np.exp((1.0 - theta) * np.log(f) + expo * (np.log(Kf) - np.log(kf_max)))
        else:
            out = f ** (1.0 - theta) * (Kf / kf_max) ** expo
    if not np.all(np.isfinite(out)):
        raise ConvergenceError(
            f"non-finite iterate (overflow/underflow): min(Kf)={kf_min}, "
            f"max(Kf)={kf_max}, theta={theta}, q={q}"
        )
    return out


def iterate_once(K: KernelOperator, f: np.ndarray, q: float, theta: float = 1.0) -> np.ndarray:
    """One damped fixed-point step, renormalized to ||f||_q = 1."""
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0.0):
        raise ParameterError("iterate_once requires a strictly positive vector")
    out = _power_update(f, apply_kernel(K, f), q, theta)
    return out / lq_norm(K.grid.weights, out, q)


def _residual(f: np.ndarray, Kf: np.ndarray, xi: float, q: float) -> float:
    """Relative sup-norm of xi f^{q-1} - Kf; identical to the residual of the
    EL-rescaled solution f^{q-1} = Kf."""
    return float(np.max(np.abs(xi * f ** (q - 1.0) - Kf)) / np.max(np.abs(Kf)))


def solve(K: KernelOperator, exponents: Exponents, opts: SolverOptions | None = None) -> ExtremalSolution:
    """Run the normalized iteration to the residual tolerance.

    Oscillation (residual escaping to twice its best value) halves the
    damping factor and restarts from the best iterate seen; below
    theta = 1/64 the run is abandoned.  Hitting max_iter returns the best
    iterate flagged as non-converged.
    """
    opts = opts or SolverOptions()
    q = exponents.q
    w = K.grid.weights
    if opts.init is not None:
        f = np.asarray(opts.init, dtype=float).copy()
        if f.shape != (K.m,):
            raise ParameterError(f"init vector has shape {f.shape}, expected ({K.m},)")
        if np.any(f <= 0.0):
            raise ParameterError("init vector must be strictly positive")
    else:
        f = np.ones(K.m)
    f /= lq_norm(w, f, q)

    theta = opts.damping
    best_f, best_res, best_xi, best_it = f, np.inf, np.nan, 0
    quotients = []
    iterations = 0
    while iterations < opts.max_iter:
        iterations += 1
        Kf = apply_kernel(K, f)
        xi = float(np.dot(w * f, Kf))        # E[f] = quotient at unit q-norm
        res = _residual(f, Kf, xi, q)
        quotients.append(xi)
        if res < best_res:
            best_f, best_res, best_xi, best_it = f, res, xi, iterations
        if res <= opts.tol_residual:
            break
        # noise floor keeps machine-precision plateaus from reading as oscillation
        if res > 2.0 * best_res + 100.0 * np.finfo(float).eps and iterations > best_it + 4:
            # oscillation: geometric damping, restart from the best iterate
            theta *= 0.5
            if theta < _THETA_FLOOR:
                raise ConvergenceError(
                    f"iteration still oscillating at theta={theta:.4g} "
                    f"(best residual {best_res:.3e} after {iterations} steps)"
                )
            f = best_f
            continue
        out = _power_update(f, Kf, q, theta)
        f = out / lq_norm(w, out, q)

    converged = best_res <= opts.tol_residual
    xi_est = best_xi
    scale = xi_est ** (1.0 / (q - 2.0))
    f_el = scale * best_f
    return ExtremalSolution(
        f=f_el,
        u=f_el ** (q - 1.0),
        xi_est=xi_est,
        residual=best_res,
        iterations=iterations,
        exponents=exponents,
        grid=K.grid,
        converged=converged,
        theta_final=theta,
        quotient_trace=np.array(quotients),
    )


def continuation_sweep(
    domain: DomainSpec,
    n: int,
    alpha: float,
    q_schedule,
    resolution: int,
    opts: SolverOptions | None = None,
    kernel: KernelOperator | None = None,
    stop_when=None,
) -> list[ExtremalSolution]:
    """Solve along a q-schedule marching toward the critical exponent,
    warm-starting each solve from the previous normalized iterate.

    `stop_when(sol)` may truncate the sweep (used by the resolution guard);
    the triggering solution is not included.  Solver failures are re-raised
    annotated with the q at which they occurred.
    """
    opts = opts or SolverOptions()
    exps = [derive_exponents(n, alpha, q) for q in q_schedule]
    _validate_schedule(exps)
    if kernel is None:
        grid = build_grid(domain, resolution)
        kernel = assemble_kernel(grid, exps[0])
    solutions: list[ExtremalSolution] = []
    current = opts
    for e in exps:
        try:
            sol = solve(kernel, e, current)
        except (ConvergenceError, ParameterError) as err:
            raise type(err)(f"at q={e.q}: {err}") from err
        if stop_when is not None and stop_when(sol):
            break
        solutions.append(sol)
        current = replace(current, init=sol.f_normalized)
    return solutions


def _validate_schedule(exps: list[Exponents]) -> None:
    if not exps:
        raise ParameterError("empty q-schedule")
    qs = [e.q for e in exps]
    reversed_regime = exps[0].is_reversed
    for e in exps:
        if e.is_reversed != reversed_regime:
            raise ParameterError("q-schedule crosses the critical exponent")
    if len(qs) > 1:
        diffs = np.diff(qs)
        if reversed_regime:
            ok = np.all(diffs > 0.0)    # increasing toward q_crit from below
        else:
            ok = np.all(diffs < 0.0)    # decreasing toward q_crit from above
        if not ok:
            raise ParameterError(
                f"q-schedule must be strictly monotone toward q_crit={exps[0].q_crit:.6g}, "
                f"got {qs}"
            )


def write_solution_csv(sol: ExtremalSolution, path) -> None:
    """Solution export: `index,x1[,x2],f,u` plus a plain-text metadata sidecar
    `<path>.meta` with q=, alpha=, n=, xi_est=, residual=, iterations=."""
    grid = sol.grid
    cols = ["index"] + [f"x{k + 1}" for k in range(grid.dim)] + ["f", "u"]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(grid.m):
            vals = [str(i)]
            vals += [repr(float(v)) for v in grid.nodes[i]]
            vals += [repr(float(sol.f[i])), repr(float(sol.u[i]))]
            fh.write(",".join(vals) + "\n")
    meta = [
        f"q={repr(float(sol.exponents.q))}",
        f"alpha={repr(float(sol.exponents.alpha))}",
        f"n={sol.exponents.n}",
        f"xi_est={repr(float(sol.xi_est))}",
        f"residual={repr(float(sol.residual))}",
        f"iterations={sol.iterations}",
    ]
    with open(str(path) + ".meta", "w", newline="\n") as fh:
        fh.write("\n".join(meta) + "\n")
