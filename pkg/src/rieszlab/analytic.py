"""Closed-form layer: exponent bundles, Gamma machinery, sharp constants,
and the whole-space bubble profile with its radial integrals.

Everything here is exact arithmetic on top of a Lanczos Gamma evaluation,
so the rest of the package can be tested against this module as an oracle.

Conventions:
  q_crit = 2n/(n+alpha) and p_crit = 2n/(n-alpha) are conjugate exponents.
  For 1 < alpha < n the admissible exponents are q in (q_crit, 2) and the
  energy quotient is maximized; for alpha > n they are q in (0, q_crit)
  and the quotient is minimized.
  omega_n = 2 pi^{n/2} / Gamma(n/2) is the area of the unit sphere in R^n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class ParameterError(ValueError):
    """Invalid mathematical parameters (bad exponent range, alpha = n, ...)."""


class Regime(Enum):
    """Which side of the critical kernel order alpha = n we are on."""

    HLS = "hls"                  # 1 < alpha < n, decaying kernel, quotient sup
    REVERSED_HLS = "reversed"    # alpha > n, growing kernel, quotient inf


# Lanczos approximation, g = 7, 9 coefficients (Godfrey's set, as used by
# Boost and the GSL).  Worst relative error below 3e-14 on (0, 50].
_LANCZOS_G = 7.0
_LANCZOS_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_fn(x: float) -> float:
    """Gamma function for positive real argument (Lanczos, g=7, n=9)."""
    if not x > 0.0:
        raise ParameterError(f"gamma_fn requires x > 0, got x={x}")
    if x < 0.5:
        # reflection formula keeps the series argument in its sweet spot
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
    y = x - 1.0
    acc = _LANCZOS_COEFFS[0]
    for i in range(1, len(_LANCZOS_COEFFS)):
        acc += _LANCZOS_COEFFS[i] / (y + i)
    t = y + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (y + 0.5) * math.exp(-t) * acc


@dataclass(frozen=True)
class Exponents:
    """Parameter bundle (n, alpha, q) with the derived conjugate exponents.

    Satisfies 1/p + 1/q = 1 and carries the regime flag implied by the
    sign of n - alpha.
    """

    n: int
    alpha: float
    q: float
    p: float
    q_crit: float
    p_crit: float
    regime: Regime

    @property
    def is_reversed(self) -> bool:
        return self.regime is Regime.REVERSED_HLS


def _validate_n_alpha(n: int, alpha: float) -> None:
    if not (isinstance(n, (int,)) and n >= 1):
        raise ParameterError(f"dimension n must be a positive integer, got {n!r}")
    if not alpha > 1.0:
        raise ParameterError(f"kernel order alpha must exceed 1, got alpha={alpha}")
    if alpha == n:
        raise ParameterError(
            f"alpha = n = {n} is the critical kernel order (p_crit undefined)"
        )


def derive_exponents(n: int, alpha: float, q: float) -> Exponents:
    """Build the exponent bundle for dimension n, kernel order alpha, exponent q.

    Raises ParameterError when q falls outside the subcritical window of the
    regime implied by (n, alpha), naming the expected interval.
    """
    _validate_n_alpha(n, alpha)
    q_crit = 2.0 * n / (n + alpha)
    p_crit = 2.0 * n / (n - alpha)
    if alpha < n:
        regime = Regime.HLS
        if not (q_crit < q < 2.0):
            raise ParameterError(
                f"HLS regime (1 < alpha={alpha} < n={n}) requires q in "
                f"({q_crit:.6g}, 2), got q={q}"
            )
    else:
        regime = Regime.REVERSED_HLS
        if not (0.0 < q < q_crit):
            raise ParameterError(
                f"reversed regime (alpha={alpha} > n={n}) requires q in "
                f"(0, {q_crit:.6g}), got q={q}"
            )
    p = q / (q - 1.0)
    return Exponents(n=n, alpha=float(alpha), q=float(q), p=p,
                     q_crit=q_crit, p_crit=p_crit, regime=regime)


def radial_integral(n: int, s: float) -> float:
    """Closed form of the radial tail integral int_0^inf r^{n-1} (1+r^2)^{-s} dr.

    Equals Gamma(n/2) Gamma(s - n/2) / (2 Gamma(s)); requires s > n/2.
    """
    if not n >= 1:
        raise ParameterError(f"dimension n must be >= 1, got {n}")
    if not s > n / 2.0:
        raise ParameterError(
            f"radial integral diverges for s <= n/2 (n={n}, s={s})"
        )
    return gamma_fn(n / 2.0) * gamma_fn(s - n / 2.0) / (2.0 * gamma_fn(s))


def unit_sphere_area(n: int) -> float:
    """Area of the unit sphere in R^n: omega_n = 2 pi^{n/2} / Gamma(n/2)."""
    if not n >= 1:
        raise ParameterError(f"dimension n must be >= 1, got {n}")
    return 2.0 * math.pi ** (n / 2.0) / gamma_fn(n / 2.0)


def sigma_const(n: int, alpha: float) -> float:
    """The concentration-limit constant (pi^{n/2} Gamma(a/2)/Gamma((n+a)/2))^{(a-n)/a}."""
    _validate_n_alpha(n, alpha)
    base = math.pi ** (n / 2.0) * gamma_fn(alpha / 2.0) / gamma_fn((n + alpha) / 2.0)
    return base ** ((alpha - n) / alpha)


def sharp_constant(n: int, alpha: float) -> float:
    """Whole-space sharp quotient value at the critical exponent.

    pi^{(n-alpha)/2} * Gamma(alpha/2)/Gamma((n+alpha)/2) * (Gamma(n/2)/Gamma(n))^{-alpha/n}.
    The same expression is used in both regimes; the growing-kernel case is
    cross-validated in the test suite through the bubble-integral identity
    rather than taken on faith.
    """
    _validate_n_alpha(n, alpha)
    return (
        math.pi ** ((n - alpha) / 2.0)
        * gamma_fn(alpha / 2.0) / gamma_fn((n + alpha) / 2.0)
        * (gamma_fn(n / 2.0) / gamma_fn(float(n))) ** (-alpha / n)
    )


@dataclass(frozen=True)
class BubbleProfile:
    """Whole-space extremal profile v(z) = c1 (c2 + |z|^2)^{-(n-alpha)/2}."""

    c1: float
    c2: float
    n: int
    alpha: float

    def __call__(self, r):
        """Evaluate the profile at radius r = |z| (scalar or array)."""
        return self.c1 * (self.c2 + r * r) ** (-(self.n - self.alpha) / 2.0)

    @property
    def constraint_dev(self) -> float:
        """Deviation |c1 * c2^{(alpha-n)/2} - 1| of the unit-height constraint."""
        return abs(self.c1 * self.c2 ** ((self.alpha - self.n) / 2.0) - 1.0)


def pin_bubble(n: int, alpha: float) -> BubbleProfile:
    """The unique profile with v(0) = 1 whose critical-power integral matches
    the sharp constant: int v^{p_crit} = xi^{-n/alpha}.

    c2 = (xi^{-n/alpha} / (omega_n * radial_integral(n, n)))^{2/n},
    c1 = c2^{(n-alpha)/2}.
    """
    _validate_n_alpha(n, alpha)
    xi = sharp_constant(n, alpha)
    mass = xi ** (-n / alpha)
    c2 = (mass / (unit_sphere_area(n) * radial_integral(n, float(n)))) ** (2.0 / n)
    c1 = c2 ** ((n - alpha) / 2.0)
    return BubbleProfile(c1=c1, c2=c2, n=n, alpha=float(alpha))


def bubble_integrals(profile: BubbleProfile) -> tuple[float, float]:
    """Whole-space integrals (int v^{p_crit}, int v^{p_crit - 1}) in closed form.

    For unit-height profiles (c1 * c2^{(alpha-n)/2} = 1) both collapse to
    c2^{n/2} * omega_n * radial_integral(n, s) with s = n and s = (n+alpha)/2;
    the general c1 powers are kept so the formula stays exact for fitted
    profiles that miss the constraint slightly.
    """
    n, alpha = profile.n, profile.alpha
    c1, c2 = profile.c1, profile.c2
    p_crit = 2.0 * n / (n - alpha)
    omega = unit_sphere_area(n)
    full = c1 ** p_crit * c2 ** (n / 2.0 - n) * omega * radial_integral(n, float(n))
    reduced = (
        c1 ** (p_crit - 1.0) * c2 ** (-alpha / 2.0)
        * omega * radial_integral(n, (n + alpha) / 2.0)
    )
    return full, reduced
