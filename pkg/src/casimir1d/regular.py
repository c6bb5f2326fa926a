"""Bulk subtraction schemes for the coincidence limit of the Green functions.

Two subtractions are available:

* :class:`StandardLifshitz` removes the bulk Green function of a homogeneous
  medium with the local ``eps(x), mu(x)``.
* :class:`WkbLocal` removes the WKB approximation

      g0(x, x') = -1/2 A(x) A(x') exp(-|int_{x'}^{x} w|),  A = sqrt(m / w),

  with ``m = mu`` (TE) or ``eps`` (TM), which also absorbs the leading effect
  of a slowly varying medium.

:class:`HardCutoff` is not a subtraction: it truncates the ``u`` integral and
wraps one of the above (or nothing).

Everything the stress integrand needs reduces to the excesses ``d_L, d_R`` of
the left/right solutions carried by :class:`~casimir1d.greens.GreenSolution`;
:func:`stress_kernel` forms the regularized combination directly from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .greens import GreenEval, GreenSolution, Polarization, Side, TransferSolution, _cached_solution, green_homogeneous
from .medium import (
    DegenerateSpectralPointError,
    ExponentialCore,
    Multilayer,
    Profile,
    SpectralPoint,
    ThreeLayer,
    deps_dx,
    epsilon_at,
    mu_at,
)

__all__ = [
    "HardCutoff",
    "KinkRemovalError",
    "RegMode",
    "RegularizedGreen",
    "StandardLifshitz",
    "WkbLocal",
    "g0_wkb",
    "parse_reg_mode",
    "regularize_at",
    "stress_kernel",
    "subtraction_of",
    "u_limit",
    "wkb_log_slope",
    "wkb_phase",
]

SIDE_TOL = 1e-7


@dataclass(frozen=True)
class StandardLifshitz:
    pass


@dataclass(frozen=True)
class WkbLocal:
    pass


@dataclass(frozen=True)
class HardCutoff:
    """Integrate ``u`` only up to ``u_max``; ``inner`` is the subtraction (or ``None``)."""

    u_max: float
    inner: Optional[Union[StandardLifshitz, WkbLocal]] = StandardLifshitz()

    def __post_init__(self):
        if not (self.u_max > 0 and math.isfinite(self.u_max)):
            raise ValueError("u_max must be positive and finite")
        if isinstance(self.inner, HardCutoff):
            raise ValueError("cutoffs do not nest")


RegMode = Union[StandardLifshitz, WkbLocal, HardCutoff]


def subtraction_of(mode: RegMode) -> Optional[str]:
    """``'standard'``, ``'wkb'`` or ``None``."""
    if isinstance(mode, HardCutoff):
        mode = mode.inner
    if mode is None:
        return None
    if isinstance(mode, StandardLifshitz):
        return "standard"
    if isinstance(mode, WkbLocal):
        return "wkb"
    raise TypeError(f"not a regularization mode: {mode!r}")


def u_limit(mode: RegMode) -> float:
    return mode.u_max if isinstance(mode, HardCutoff) else math.inf


def parse_reg_mode(name: str, u_max: Optional[float] = None) -> RegMode:
    """Build a mode from the CLI spelling ``standard | wkb | none`` plus an optional cutoff."""
    key = name.strip().lower()
    table = {"standard": StandardLifshitz(), "wkb": WkbLocal(), "none": None}
    if key not in table:
        raise ValueError(f"unknown regularization {name!r}; expected standard, wkb or none")
    base = table[key]
    if u_max is None:
        if base is None:
            raise ValueError("reg=none is only meaningful together with a u cutoff")
        return base
    return HardCutoff(float(u_max), base)


class KinkRemovalError(ArithmeticError):
    """The one-sided coincidence limits of the regularized mixed derivative disagree."""


@dataclass(frozen=True)
class RegularizedGreen:
    value: float
    mixed: float
    side_spread: float


# ---------------------------------------------------------------------------
# WKB pieces


def _phase_core(z1: float, z2: float, u: float, q: float, b: float) -> float:
    """``int_{z1}^{z2} sqrt(u^2 + q e^{-b z}) dz`` in closed form."""
    e1, e2 = math.exp(-b * z1), math.exp(-b * z2)
    w1 = math.sqrt(u * u + q * e1)
    w2 = math.sqrt(u * u + q * e2)
    dw = q * (e2 - e1) / (w1 + w2)
    out = -2.0 / b * dw + u * (z2 - z1)
    if u > 0:
        out += 2.0 * u / b * math.log1p(dw / (w1 + u))
    return out


def _breakpoints(profile: Profile) -> list[float]:
    if isinstance(profile, ExponentialCore):
        return [0.0, profile.x_right]
    if isinstance(profile, ThreeLayer):
        return [profile.x_left, profile.x_right]
    return list(profile.boundaries)


def wkb_phase(x: float, xp: float, sp: SpectralPoint, profile: Profile, c: float = 1.0) -> float:
    """``|int_{x'}^{x} w(z) dz|``, piecewise in closed form."""
    if sp.degenerate:
        raise DegenerateSpectralPointError("u = xi = 0")
    lo, hi = (x, xp) if x <= xp else (xp, x)
    if lo == hi:
        return 0.0
    cuts = [lo] + [z for z in _breakpoints(profile) if lo < z < hi] + [hi]
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        mid = 0.5 * (a + b)
        if isinstance(profile, ExponentialCore) and 0.0 <= mid <= profile.x_right:
            q = profile.eps_left * sp.xi**2 / c**2
            total += _phase_core(a, b, sp.u, q, profile.b)
        else:
            eps, mu = epsilon_at(profile, mid), mu_at(profile, mid)
            total += math.sqrt(sp.u**2 + eps * mu * sp.xi**2 / c**2) * (b - a)
    return total


def wkb_log_slope(pol: Polarization, x: float, xi, w, profile: Profile, c: float = 1.0):
    """``A'/A`` of the WKB amplitude ``A = sqrt(m/w)``; vectorised over ``xi, w``.

    Uses the core-side derivative of ``eps`` at the corners of an exponential
    core; zero wherever the medium is locally constant.
    """
    de = deps_dx(profile, x)
    if de == 0.0:
        return np.zeros_like(np.asarray(w, dtype=float))
    eps, mu = epsilon_at(profile, x), mu_at(profile, x)
    dw = de * mu * np.asarray(xi) ** 2 / (2.0 * np.asarray(w) * c**2)
    dm = 0.0 if pol is Polarization.TE else de / eps
    return 0.5 * (dm - dw / w)


def g0_wkb(
    pol: Polarization,
    sp: SpectralPoint,
    x: float,
    xp: float,
    profile: Profile,
    c: float = 1.0,
    side: Side = Side.BELOW,
) -> GreenEval:
    """The WKB Green function and its partials."""
    if sp.degenerate:
        raise DegenerateSpectralPointError("u = xi = 0")

    def local(z):
        m = mu_at(profile, z) if pol is Polarization.TE else epsilon_at(profile, z)
        w = math.sqrt(sp.u**2 + epsilon_at(profile, z) * mu_at(profile, z) * sp.xi**2 / c**2)
        slope = float(wkb_log_slope(pol, z, sp.xi, w, profile, c))
        return m, w, slope

    m1, w1, l1 = local(x)
    m2, w2, l2 = local(xp)
    g = -0.5 * math.sqrt(m1 * m2 / (w1 * w2)) * math.exp(-wkb_phase(x, xp, sp, profile, c))
    above = x > xp or (x == xp and side is Side.BELOW)
    sgn = 1.0 if above else -1.0  # sign of (x - x')
    dx = g * (l1 - sgn * w1)
    dxp = g * (l2 + sgn * w2)
    coincident = x == xp
    return GreenEval(g, dx, dxp, g * (l1 - sgn * w1) * (l2 + sgn * w2), coincident,
                     side if coincident else Side.NOT_COINCIDENT)


# ---------------------------------------------------------------------------
# regularized coincidence data


def stress_kernel(pol: Polarization, solution, x: float, subtraction: Optional[str], profile: Profile, c: float = 1.0):
    """``(w^2 g_reg - d_x d_x' g_reg) / m`` at ``x' = x`` over the solution's ``(u, xi)`` grid.

    ``solution`` is a :class:`GreenSolution` or :class:`TransferSolution`.
    """
    d_l, d_r, _, w = solution.coincidence(x)
    spread = -2.0 * w + d_r - d_l  # beta - a
    if subtraction is None:
        return (w * w - (w + d_l) * (d_r - w)) / spread
    out = -d_l * d_r / spread
    if subtraction == "wkb":
        xi = solution.xi.reshape(solution.shape)
        slope = wkb_log_slope(pol, x, xi, w, profile, c)
        out = out - slope * slope / (2.0 * w)
    return out


def regularize_at(
    pol: Polarization,
    x: float,
    sp: SpectralPoint,
    profile: Profile,
    c: float = 1.0,
    mode: RegMode = StandardLifshitz(),
    check: bool = True,
) -> RegularizedGreen:
    """Regularized value and mixed derivative at ``x' = x``.

    The mixed derivative is formed from both one-sided limits; their mean is
    returned and their difference reported as ``side_spread``.  With
    ``check`` a spread above ``1e-7 * max(1, |mixed|)`` raises
    :class:`KinkRemovalError`.
    """
    if sp.degenerate:
        raise DegenerateSpectralPointError("u = xi = 0")
    sub = subtraction_of(mode)
    sol = _cached_solution(pol, profile, sp.u, sp.xi, c)
    d_l, d_r, p, w = (np.asarray(q, dtype=float).reshape(()) for q in sol.coincidence(x))
    d_l, d_r, w = float(d_l), float(d_r), float(w)
    m = 1.0 / float(p)
    spread = -2.0 * w + d_r - d_l
    if sub is None:
        value = m / spread
        mixed = m * (w + d_l) * (d_r - w) / spread
    else:
        # exact minus -m/(2w) and minus m w/2, rearranged to avoid cancellation
        value = m * (d_r - d_l) / (2.0 * w * spread)
        mixed = m * (w * (d_r - d_l) + 2.0 * d_l * d_r) / (2.0 * spread)
        if sub == "wkb":
            slope = float(wkb_log_slope(pol, x, sp.xi, w, profile, c))
            mixed += m * slope * slope / (2.0 * w)
    below = [q for q in sol.evaluate(x, x, Side.BELOW)]
    above = [q for q in sol.evaluate(x, x, Side.ABOVE)]
    side_spread = abs(float(below[3]) - float(above[3]))
    if sub == "wkb":
        g0b = g0_wkb(pol, sp, x, x, profile, c, Side.BELOW).d_x_d_xp
        g0a = g0_wkb(pol, sp, x, x, profile, c, Side.ABOVE).d_x_d_xp
        side_spread = abs((float(below[3]) - g0b) - (float(above[3]) - g0a))
    elif sub == "standard":
        eps, mu = epsilon_at(profile, x), mu_at(profile, x)
        hb = green_homogeneous(pol, sp, x, x, eps, mu, c, Side.BELOW).d_x_d_xp
        ha = green_homogeneous(pol, sp, x, x, eps, mu, c, Side.ABOVE).d_x_d_xp
        side_spread = abs((float(below[3]) - hb) - (float(above[3]) - ha))
    if check and side_spread > SIDE_TOL * max(1.0, abs(mixed)):
        raise KinkRemovalError(f"one-sided limits differ by {side_spread:.3g} at x={x}")
    return RegularizedGreen(value, mixed, side_spread)


# ---------------------------------------------------------------------------
# large-w behaviour of the WKB-subtracted kernel inside an exponential core
#
# Carrying the WKB series of both Riccati solutions two orders past the
# subtracted term leaves, with s = eps xi^2 / (c^2 w^2),
#     kernel ~ b^4 P(s) / (2048 w^3),
# summed over polarizations.  The remainder is O(b^6 / w^5).

_TAIL_POLY = {
    Polarization.TE: np.array([0.0, 0.0, 16.0, -112.0, 105.0]),
    Polarization.TM: np.array([-48.0, -32.0, 376.0, -392.0, 105.0]),
}
_TAIL_SUM = _TAIL_POLY[Polarization.TE] + _TAIL_POLY[Polarization.TM]


def _core_interior(profile: Profile, x: float) -> bool:
    return isinstance(profile, ExponentialCore) and 0.0 < x < profile.x_right


def wkb_tail_kernel(x: float, u, xi, profile: ExponentialCore, c: float = 1.0, pol: Optional[Polarization] = None):
    """Leading large-``w`` form of the WKB-subtracted stress integrand (factor ``u`` included).

    Valid inside the core once ``w`` exceeds both ``b`` and the inverse
    distance to the interfaces; ``pol=None`` sums both polarizations.
    """
    if not _core_interior(profile, x):
        raise ValueError("the tail form holds strictly inside an exponential core")
    u = np.asarray(u, dtype=float)
    q = epsilon_at(profile, x) * np.asarray(xi, dtype=float) ** 2 / c**2
    w2 = u * u + q
    poly = _TAIL_SUM if pol is None else _TAIL_POLY[pol]
    return u * profile.b**4 * np.polynomial.polynomial.polyval(q / w2, poly) / (2048.0 * w2 * np.sqrt(w2))


def wkb_tail_integral(x: float, u_c: float, xi, profile: ExponentialCore, c: float = 1.0):
    """``int_{u_c}^inf wkb_tail_kernel du`` in closed form."""
    if not _core_interior(profile, x):
        raise ValueError("the tail form holds strictly inside an exponential core")
    q = epsilon_at(profile, x) * np.asarray(xi, dtype=float) ** 2 / c**2
    w_c = np.sqrt(u_c * u_c + q)
    s_c = q / (w_c * w_c)
    k = np.arange(_TAIL_SUM.size)
    return profile.b**4 * np.polynomial.polynomial.polyval(s_c, _TAIL_SUM / (2 * k + 1)) / (2048.0 * w_c)


def wkb_log_coefficient(x: float, profile: Profile, c: float = 1.0) -> float:
    """Limit of ``xi * int_0^inf s(x, u, xi) du`` as ``xi -> inf`` under the WKB subtraction.

    Non-zero means the ``xi`` integral diverges logarithmically.  Zero outside
    an exponential core.
    """
    if not _core_interior(profile, x):
        return 0.0
    k = np.arange(_TAIL_SUM.size)
    moment = float(np.sum(_TAIL_SUM / (k + 0.5)))  # -868/15
    return profile.b**4 * c * moment / (4096.0 * math.sqrt(epsilon_at(profile, x)))


def wkb_tail_onset(x: float, profile: ExponentialCore, c: float = 1.0) -> float:
    """A ``u`` beyond which :func:`wkb_tail_kernel` is accurate to about ``1e-6`` relative."""
    gap = min(x, profile.x_right - x)
    return max(1000.0 * profile.b, 20.0 / gap)


__all__ += ["wkb_log_coefficient", "wkb_tail_integral", "wkb_tail_kernel", "wkb_tail_onset"]
