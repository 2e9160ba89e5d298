"""Concentration diagnostics for continuation sweeps: extremum tracking,
profile rescaling, bubble fitting, envelope and product-limit checks, the
Dirac-mass quadrature, the Kelvin transform, and boundary monotonicity.

The zoom scale is mu = u(x_q)^{-(p-2)/alpha}, where x_q is the node where u
attains its max (decaying kernel) or min (growing kernel).  Rescaled values
v(z) = u(x_q + mu z) / u(x_q) equal 1 exactly at z = 0 and live in (0, 1]
resp. [1, inf) depending on the regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial import cKDTree

from .analytic import Exponents, ParameterError, pin_bubble
from .discretization import Disk, DomainSpec, Interval, Rectangle
from .solver import ExtremalSolution


@dataclass(frozen=True)
class BubbleFit:
    c1: float
    c2: float
    rms_residual: float
    constraint_dev: float
    window_radius: float


@dataclass(frozen=True)
class SweepRecord:
    """Per-q concentration diagnostics extracted from a converged solution."""

    q: float
    p: float
    x_q: np.ndarray
    u_extreme: float
    mu: float
    boundary_dist: float
    xi_est: float
    fit: BubbleFit | None
    sigma_ratios: tuple[float, ...]
    mu_power: float


class RescaledProfile(NamedTuple):
    z: np.ndarray    # (m, dim) zoomed coordinates (x - x_q) / mu
    v: np.ndarray    # (m,) rescaled values, v = 1 exactly at the extremal node


class MonotonicityReport(NamedTuple):
    fraction_monotone: float
    worst_violation: float
    rays: int


# ---------------------------------------------------------------------------
# extremum bookkeeping
# ---------------------------------------------------------------------------

def extremal_index(sol: ExtremalSolution) -> int:
    """Node index of the regime extremum of u; ties broken by the smallest
    lexicographic coordinate so symmetric domains give a deterministic pick."""
    u = sol.u
    extreme = np.min(u) if sol.exponents.is_reversed else np.max(u)
    candidates = np.flatnonzero(u == extreme)
    if len(candidates) == 1:
        return int(candidates[0])
    coords = sol.grid.nodes[candidates]
    order = np.lexsort(coords.T[::-1])   # primary sort on x1, then x2
    return int(candidates[order[0]])


def concentration_scale(sol: ExtremalSolution, u_extreme: float) -> float:
    """mu = u(x_q)^{-(p-2)/alpha}."""
    e = sol.exponents
    return float(u_extreme ** (-(e.p - 2.0) / e.alpha))


def rescale_profile(sol: ExtremalSolution, x_q: np.ndarray | None = None,
                    mu: float | None = None) -> RescaledProfile:
    """Zoomed profile; v equals u / u(x_q), which is the mu^{alpha/(p-2)}
    rescaling evaluated without rounding, so v(0) = 1 exactly."""
    idx = extremal_index(sol)
    if x_q is None:
        x_q = sol.grid.nodes[idx]
    if mu is None:
        mu = concentration_scale(sol, float(sol.u[idx]))
    if not mu > 0.0:
        raise ParameterError(f"concentration scale must be positive, got {mu}")
    z = (sol.grid.nodes - x_q) / mu
    v = sol.u / sol.u[idx]
    return RescaledProfile(z=z, v=v)


# ---------------------------------------------------------------------------
# bubble fit
# ---------------------------------------------------------------------------

def fit_bubble(profile: RescaledProfile, exponents: Exponents, r_fit: float) -> BubbleFit:
    """Least-squares fit of log v against the whole-space profile
    log c1 - ((n-alpha)/2) log(c2 + |z|^2) over the window |z| <= r_fit."""
    radii = np.linalg.norm(profile.z, axis=1)
    mask = radii <= r_fit
    if int(np.count_nonzero(mask)) < 20:
        raise ParameterError(
            f"bubble fit needs >= 20 samples with |z| <= {r_fit}, "
            f"got {int(np.count_nonzero(mask))}"
        )
    r2 = radii[mask] ** 2
    logv = np.log(profile.v[mask])
    slope = -(exponents.n - exponents.alpha) / 2.0

    def resid(params):
        log_c1, log_c2 = params
        return logv - (log_c1 + slope * np.log(np.exp(log_c2) + r2))

    start = pin_bubble(exponents.n, exponents.alpha)
    result = least_squares(resid, x0=[math.log(start.c1), math.log(start.c2)],
                           method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    c1, c2 = float(np.exp(result.x[0])), float(np.exp(result.x[1]))
    rms = float(np.sqrt(np.mean(result.fun ** 2)))
    dev = abs(c1 * c2 ** ((exponents.alpha - exponents.n) / 2.0) - 1.0)
    return BubbleFit(c1=c1, c2=c2, rms_residual=rms, constraint_dev=dev,
                     window_radius=float(r_fit))


def fit_window(mu: float, domain: DomainSpec, r_max: float = 8.0) -> float:
    """Default window min(r_max, 0.5 diameter / mu): beyond it the tails are
    contaminated by domain truncation."""
    return min(r_max, 0.5 * domain.diameter / mu)


# ---------------------------------------------------------------------------
# envelope / trend / limit checks
# ---------------------------------------------------------------------------

def envelope_check(sol: ExtremalSolution, record: SweepRecord) -> float:
    """Best envelope constant over the grid for the bubble-shaped bound
    (mu / (mu^2 + |x - x_q|^2))^{(n-alpha)/2}: the max of u/envelope in the
    decaying-kernel regime (upper bound), the min in the growing-kernel one
    (lower bound)."""
    e = sol.exponents
    d2 = np.sum((sol.grid.nodes - record.x_q) ** 2, axis=1)
    env = (record.mu / (record.mu ** 2 + d2)) ** ((e.n - e.alpha) / 2.0)
    ratios = sol.u / env
    return float(np.min(ratios) if e.is_reversed else np.max(ratios))


def mu_power_check(records: list[SweepRecord], p_crit: float) -> list[float]:
    """mu^{|p - p_crit|} per record; the sequence should drift toward 1 as the
    schedule approaches the critical exponent."""
    if len(records) < 3:
        raise ParameterError(f"need a sweep of >= 3 records, got {len(records)}")
    return [float(r.mu ** abs(r.p - p_crit)) for r in records]


def product_limit_check(
    sol: ExtremalSolution,
    record: SweepRecord,
    sigma: float,
    probes: np.ndarray,
    r_min: float | None = None,
) -> list[float]:
    """Ratios u(x_q) u(x) |x - x_q|^{n-alpha} / sigma at the probe points
    (nearest-node evaluation).  Probes closer than r_min to x_q are rejected;
    r_min defaults to a tenth of the domain diameter."""
    e = sol.exponents
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if r_min is None:
        r_min = 0.1 * sol.grid.domain.diameter
    dists = np.linalg.norm(probes - record.x_q, axis=1)
    if np.any(dists < r_min):
        bad = probes[dists < r_min]
        raise ParameterError(
            f"probe(s) {bad.tolist()} inside the exclusion radius {r_min:.4g} of x_q"
        )
    tree = cKDTree(sol.grid.nodes)
    _, idx = tree.query(probes)
    ratios = []
    for k, j in enumerate(np.atleast_1d(idx)):
        ratios.append(float(
            record.u_extreme * sol.u[j] * dists[k] ** (e.n - e.alpha) / sigma
        ))
    return ratios


def smooth_bump(points: np.ndarray, center: np.ndarray, width: float) -> np.ndarray:
    """Standard mollifier scaled to height 1: exp(1 - 1/(1 - t^2)) for
    t = |x - center| / width < 1, zero outside."""
    t2 = np.sum((np.atleast_2d(points) - center) ** 2, axis=1) / width ** 2
    out = np.zeros(t2.shape[0])
    inside = t2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t2[inside]))
    return out


def _support_inside(domain: DomainSpec, center: np.ndarray, width: float) -> bool:
    if isinstance(domain, Interval):
        return domain.a < center[0] - width and center[0] + width < domain.b
    if isinstance(domain, Rectangle):
        return (domain.a1 < center[0] - width and center[0] + width < domain.b1
                and domain.a2 < center[1] - width and center[1] + width < domain.b2)
    if isinstance(domain, Disk):
        return np.linalg.norm(center - domain.center) + width < domain.radius
    raise ParameterError(f"unsupported domain {domain!r}")


def dirac_limit_check(
    sols: list[ExtremalSolution],
    sigma: float,
    bump_center: np.ndarray,
    bump_width: float,
    phi: Callable[[np.ndarray], np.ndarray] | None = None,
) -> list[float]:
    """Quadrature of u^{p-1} u(x_q) phi per solution; along the sweep the
    values should approach sigma * phi(x_0) (the target is left to the
    caller, this returns the raw sequence)."""
    bump_center = np.atleast_1d(np.asarray(bump_center, dtype=float))
    if phi is None:
        domain = sols[0].grid.domain
        if not _support_inside(domain, bump_center, bump_width):
            raise ParameterError(
                f"bump support B({bump_center.tolist()}, {bump_width}) is not "
                f"inside the domain"
            )
        phi = lambda pts: smooth_bump(pts, bump_center, bump_width)
    values = []
    for sol in sols:
        e = sol.exponents
        idx = extremal_index(sol)
        phi_vals = np.asarray(phi(sol.grid.nodes), dtype=float)
        values.append(float(np.sum(
            sol.grid.weights * sol.u ** (e.p - 1.0) * sol.u[idx] * phi_vals
        )))
    return values


# ---------------------------------------------------------------------------
# Kelvin transform
# ---------------------------------------------------------------------------

def kelvin_transform(
    points: np.ndarray,
    values: np.ndarray,
    center,
    radius: float,
    exponents: Exponents,
    domain: DomainSpec | None = None,
):
    """Inversion in the sphere of the given center and radius:
    image x* = c + rho^2 (x-c)/|x-c|^2 with w(x*) = (rho/|x-c|)^{alpha-n} u(x).

    This is the unit-ball formula w(x) = |x|^{alpha-n} u(x/|x|^2) after
    translating/scaling so the inversion ball is B(0,1).  The inversion
    center must lie outside the closed domain.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.asarray(values, dtype=float)
    if not radius > 0.0:
        raise ParameterError(f"inversion radius must be positive, got {radius}")
    if domain is not None and bool(domain.contains(center[None, :])[0]):
        raise ParameterError(
            f"inversion center {center.tolist()} lies inside the closed domain"
        )
    rel = points - center
    r = np.linalg.norm(rel, axis=1)
    if np.any(r == 0.0):
        raise ParameterError("a sample point coincides with the inversion center")
    images = center + radius ** 2 * rel / r[:, None] ** 2
    w = (radius / r) ** (exponents.alpha - exponents.n) * values
    return images, w


# ---------------------------------------------------------------------------
# boundary monotonicity
# ---------------------------------------------------------------------------

def boundary_monotonicity_check(
    sol: ExtremalSolution,
    t0: float,
    aperture: float,
    rel_tol: float = 0.0,
    n_boundary: int = 32,
    n_directions: int = 5,
) -> MonotonicityReport:
    """Walk inward rays x - t nu from boundary samples, nu in the cone
    (nu, outward normal) >= aperture, and grade the nearest-node values of u:
    increasing in t for the decaying kernel, decreasing for the growing one.
    Ties are allowed; a ray fails when a step moves the wrong way by more
    than rel_tol relative."""
    domain = sol.grid.domain
    if not 0.0 < t0 < domain.inradius / 2.0:
        raise ParameterError(
            f"t0={t0} too large: must be below half the inradius "
            f"{domain.inradius / 2.0:.4g}"
        )
    if not 0.0 < aperture <= 1.0:
        raise ParameterError(f"aperture must lie in (0, 1], got {aperture}")
    pts, normals = domain.boundary_samples(n_boundary)
    tree = cKDTree(sol.grid.nodes)
    n_steps = max(8, int(math.ceil(2.0 * t0 / sol.grid.h)))
    ts = np.linspace(0.0, t0, n_steps + 1)
    decreasing = sol.exponents.is_reversed
    worst = 0.0
    monotone_rays = 0
    total_rays = 0
    for x_b, nrm in zip(pts, normals):
        if sol.grid.dim == 1:
            dirs = [nrm]
        else:
            phi_max = math.acos(min(aperture, 1.0))
            angles = np.linspace(-phi_max, phi_max, n_directions) * 0.999
            base = math.atan2(nrm[1], nrm[0])
            dirs = [np.array([math.cos(base + a), math.sin(base + a)]) for a in angles]
        for nu in dirs:
            ray = x_b[None, :] - ts[:, None] * nu[None, :]
            inside = domain.contains(ray)
            ray = ray[inside]
            if ray.shape[0] < 2:
                continue
            _, idx = tree.query(ray)
            samples = sol.u[np.atleast_1d(idx)]
            steps = np.diff(samples) / samples[:-1]
            viol = np.maximum(0.0, steps) if decreasing else np.maximum(0.0, -steps)
            ray_worst = float(np.max(viol)) if viol.size else 0.0
            worst = max(worst, ray_worst)
            total_rays += 1
            if ray_worst <= rel_tol:
                monotone_rays += 1
    if total_rays == 0:
        raise ParameterError("no admissible rays; check t0/aperture against the domain")
    return MonotonicityReport(
        fraction_monotone=monotone_rays / total_rays,
        worst_violation=worst,
        rays=total_rays,
    )


# ---------------------------------------------------------------------------
# record assembly and export
# ---------------------------------------------------------------------------

def axis_probes(x0: np.ndarray, distances, domain: DomainSpec) -> np.ndarray:
    """Probe points x0 +/- d e_k along each axis, kept if inside the domain.
    Raises if a requested distance yields no admissible probe at all."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    dim = x0.shape[0]
    probes = []
    for d in distances:
        found = False
        for k in range(dim):
            for sign in (1.0, -1.0):
                cand = x0.copy()
                cand[k] += sign * d
                if bool(domain.contains(cand[None, :])[0]):
                    probes.append(cand)
                    found = True
        if not found:
            raise ParameterError(f"no probe at distance {d} fits inside the domain")
    return np.array(probes)


def build_records(
    solutions: list[ExtremalSolution],
    sigma: float,
    probe_distances=(),
    fit_r_max: float = 8.0,
    r_min: float | None = None,
) -> tuple[list[SweepRecord], np.ndarray]:
    """Assemble per-q records for a (already truncated) sweep.

    The concentration point x_0 is estimated as x_q of the finest record; the
    probe set is placed around it and shared by all records.
    """
    if not solutions:
        raise ParameterError("no solutions to analyze")
    basics = []
    for sol in solutions:
        idx = extremal_index(sol)
        u_ext = float(sol.u[idx])
        basics.append((sol, idx, u_ext, concentration_scale(sol, u_ext)))
    x0 = solutions[-1].grid.nodes[basics[-1][1]].copy()
    domain = solutions[0].grid.domain
    probes = axis_probes(x0, probe_distances, domain) if len(tuple(probe_distances)) else None

    records = []
    for sol, idx, u_ext, mu in basics:
        e = sol.exponents
        x_q = sol.grid.nodes[idx]
        profile = rescale_profile(sol, x_q=x_q, mu=mu)
        r_fit = fit_window(mu, domain, r_max=fit_r_max)
        try:
            fit = fit_bubble(profile, e, r_fit)
        except ParameterError:
            fit = None
        record = SweepRecord(
            q=e.q, p=e.p, x_q=x_q, u_extreme=u_ext, mu=mu,
            boundary_dist=float(sol.grid.boundary_dist[idx]),
            xi_est=sol.xi_est, fit=fit, sigma_ratios=(),
            mu_power=float(mu ** abs(e.p - e.p_crit)),
        )
        if probes is not None:
            ratios = product_limit_check(sol, record, sigma, probes, r_min=r_min)
            record = replace(record, sigma_ratios=tuple(ratios))
        records.append(record)
    return records, x0


def write_sweep_csv(records: list[SweepRecord], path, dim: int) -> None:
    """Sweep export: one row per resolvable q."""
    cols = ["q", "p"] + [f"xq_{k + 1}" for k in range(dim)] + [
        "u_extreme", "mu", "boundary_dist", "xi_est", "c1", "c2",
        "fit_rms", "constraint_dev", "mu_power", "min_sigma_ratio", "max_sigma_ratio",
    ]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for r in records:
            vals = [repr(float(r.q)), repr(float(r.p))]
            vals += [repr(float(v)) for v in r.x_q]
            vals += [repr(float(r.u_extreme)), repr(float(r.mu)),
                     repr(float(r.boundary_dist)), repr(float(r.xi_est))]
            if r.fit is not None:
                vals += [repr(float(r.fit.c1)), repr(float(r.fit.c2)),
                         repr(float(r.fit.rms_residual)), repr(float(r.fit.constraint_dev))]
            else:
                vals += ["nan", "nan", "nan", "nan"]
            vals.append(repr(float(r.mu_power)))
            if r.sigma_ratios:
                vals += [repr(float(min(r.sigma_ratios))), repr(float(max(r.sigma_ratios)))]
            else:
                vals += ["nan", "nan"]
            fh.write(",".join(vals) + "\n")
