"""Scalar TE/TM Green functions of a planar medium at imaginary frequency.

Both polarizations solve a Sturm-Liouville problem ``(p g')' - q g = delta``
with ``p = 1/mu, q = u^2/mu + eps xi^2/c^2`` (TE) or ``p = 1/eps,
q = u^2/eps + mu xi^2/c^2`` (TM).  The solution is assembled as

    g(x, x') = phi_L(x_<) phi_R(x_>) / C,   C = p (phi_L phi_R' - phi_L' phi_R),

where ``phi_L`` decays towards ``-inf`` and ``phi_R`` towards ``+inf``.  Both
are carried region by region as a logarithmic derivative plus an accumulated
log-amplitude, so no exponentially large number is ever formed.  Across an
interface ``p * phi'/phi`` is continuous, which is exactly continuity of
``g`` and ``p dg/dx``.

In the exponential core the two independent solutions are ``I_nu(s)``,
``K_nu(s)`` with ``nu = 2u/b`` (TE) and ``s I_nu(s)``, ``s K_nu(s)`` with
``nu = sqrt(1 + 4u^2/b^2)`` (TM), where ``s = 2 xi sqrt(eps_left) e^{-bx/2}/(b c)``.
On the ``xi = 0`` line the core solutions are plain exponentials.

:func:`match_interfaces` solves the same problem the textbook way, as a 4x4
linear system for the core and half-space amplitudes with the delta source
carried by a particular solution.  It is kept as an independent route and is
well conditioned only for moderate ``u``.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .medium import (
    DegenerateSpectralPointError,
    ExponentialCore,
    Layer,
    Multilayer,
    Profile,
    SpectralPoint,
    ThreeLayer,
    epsilon_at,
    mu_at,
)
from .specfun import log_bessel_ik

__all__ = [
    "CoreBasis",
    "GreenEval",
    "GreenSolution",
    "MatchedCoefficients",
    "Polarization",
    "Side",
    "SingularMatrixError",
    "TransferSolution",
    "green_core_basis",
    "green_full",
    "green_homogeneous",
    "green_multilayer",
    "match_interfaces",
    "s_of_x",
    "slice_to_multilayer",
]


class Polarization(enum.Enum):
    TE = "TE"
    TM = "TM"


class Side(enum.Enum):
    """Which one-sided limit is taken when ``x == x'``."""

    BELOW = "below"  # x' -> x from below, i.e. x > x'
    ABOVE = "above"  # x' -> x from above, i.e. x < x'
    NOT_COINCIDENT = "none"


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, msg: str, condition: float):
        super().__init__(f"{msg} (condition number {condition:.3g})")
        self.condition = condition


@dataclass(frozen=True)
class GreenEval:
    value: float
    d_x: float
    d_xp: float
    d_x_d_xp: float
    coincident: bool
    side: Side


def s_of_x(x, xi, eps_left: float, b: float, c: float = 1.0):
    """Bessel variable of the exponential core."""
    if np.any(np.asarray(xi) <= 0):
        raise DegenerateSpectralPointError("s(x) is degenerate at xi = 0; use the xi = 0 closed forms")
    return 2.0 * np.asarray(xi) * math.sqrt(eps_left) * np.exp(-0.5 * b * np.asarray(x)) / (b * c)


def _p_weight(pol: Polarization, eps: float, mu: float) -> float:
    return 1.0 / mu if pol is Polarization.TE else 1.0 / eps


def _core_order(pol: Polarization, u, b: float):
    if pol is Polarization.TE:
        return 2.0 * np.asarray(u) / b
    return np.sqrt(1.0 + 4.0 * np.asarray(u) ** 2 / b**2)


# ---------------------------------------------------------------------------
# closed forms in a homogeneous medium


def green_homogeneous(
    pol: Polarization,
    sp: SpectralPoint,
    x: float,
    xp: float,
    eps: float,
    mu: float = 1.0,
    c: float = 1.0,
    side: Side = Side.BELOW,
) -> GreenEval:
    """Bulk Green function ``-m exp(-w|x-x'|)/(2w)`` with ``m = mu`` (TE) or ``eps`` (TM)."""
    if sp.degenerate:
        raise DegenerateSpectralPointError("u = xi = 0")
    w = math.sqrt(sp.u**2 + eps * mu * sp.xi**2 / c**2)
    m = mu if pol is Polarization.TE else eps
    g = -m / (2.0 * w) * math.exp(-w * abs(x - xp))
    if x > xp or (x == xp and side is Side.BELOW):
        sgn = 1.0  # dg/dx = -w g sign(x - x')
    else:
        sgn = -1.0
    coincident = x == xp
    return GreenEval(
        value=g,
        d_x=-w * sgn * g,
        d_xp=w * sgn * g,
        d_x_d_xp=-w * w * g,
        coincident=coincident,
        side=side if coincident else Side.NOT_COINCIDENT,
    )


# ---------------------------------------------------------------------------
# region propagation (vectorised over u, xi)
#
# The left solution phi_L is carried as its excess d = phi_L'/phi_L - w and
# the right solution as d = phi_R'/phi_R + w.  Both excesses are O(1) while
# w grows without bound in the tails, so carrying them directly keeps the
# regularized kernels free of cancellation.


@dataclass(frozen=True)
class _Homog:
    lo: float
    hi: float
    eps: float
    mu: float


@dataclass(frozen=True)
class _Core:
    lo: float
    hi: float
    eps_left: float
    b: float


def _regions(profile: Profile) -> list:
    if isinstance(profile, ExponentialCore):
        return [
            _Homog(-math.inf, 0.0, profile.eps_left, 1.0),
            _Core(0.0, profile.x_right, profile.eps_left, profile.b),
            _Homog(profile.x_right, math.inf, profile.eps_right, 1.0),
        ]
    if isinstance(profile, ThreeLayer):
        profile = profile.as_multilayer()
    bounds = [-math.inf, *profile.boundaries, math.inf]
    return [_Homog(bounds[j], bounds[j + 1], lay.eps, lay.mu) for j, lay in enumerate(profile.layers)]


def _locate(profile: Profile, x: float) -> int:
    if isinstance(profile, ExponentialCore):
        return profile.region(x)
    if isinstance(profile, ThreeLayer):
        profile = profile.as_multilayer()
    return profile.layer_index(x)


def _pair_forward(r_dom, gap, off, d0, dx):
    """Two-exponential solution, rates ``r_dom`` and ``r_dom - gap``, moved by ``dx >= 0``.

    ``off = r_dom - w``; excesses are relative to ``+w``.
    """
    dev0 = d0 - off
    m1 = -np.expm1(-gap * dx)  # 1 - e^{-gap dx}
    den = 1.0 + dev0 * m1 / gap
    return dev0 * np.exp(-gap * dx) / den + off, r_dom * dx + np.log(den)


def _pair_backward(r_dom, gap, off, d0, dx):
    """Mirror of :func:`_pair_forward` for ``dx <= 0``; ``off = r_dom + w``."""
    dev0 = d0 - off
    m1 = -np.expm1(gap * dx)
    den = 1.0 - dev0 * m1 / gap
    return dev0 * np.exp(gap * dx) / den + off, r_dom * dx + np.log(den)


class _HomogOps:
    def __init__(self, region: _Homog, pol: Polarization, u, xi, c: float):
        self.eps, self.mu = region.eps, region.mu
        self.p = _p_weight(pol, region.eps, region.mu)
        self._w = np.sqrt(u**2 + region.eps * region.mu * xi**2 / c**2)

    def medium(self, x: float):
        return self.eps, self.mu, self.p

    def w(self, x: float):
        return self._w

    def forward(self, x0: float, d0, x: float):
        return _pair_forward(self._w, 2.0 * self._w, 0.0, d0, x - x0)

    def backward(self, x0: float, d0, x: float):
        return _pair_backward(-self._w, 2.0 * self._w, 0.0, d0, x - x0)


class _CoreOps:
    """Exponential core: Bessel solutions for xi > 0, exponentials on xi = 0."""

    def __init__(self, region: _Core, pol: Polarization, u: np.ndarray, xi: np.ndarray, c: float):
        self.region = region
        self.pol = pol
        self.u = u
        self.xi = xi
        self.c = c
        self.kappa = 0.0 if pol is Polarization.TE else 1.0
        # eps xi^2 below rounding of u^2: the xi = 0 forms are exact and s may underflow
        self.static = (xi == 0) | (math.sqrt(region.eps_left) * xi <= 1e-17 * c * u)
        self.dyn = ~self.static
        self.any_static = bool(np.any(self.static))
        self.any_dyn = bool(np.any(self.dyn))
        self.nu = _core_order(pol, u[self.dyn], region.b)
        self._cache: dict[float, tuple] = {}
        b = region.b
        if self.any_static:
            us = u[self.static]
            if pol is Polarization.TE:
                self.r_up, self.gap = us, 2.0 * us
                self.off_up = self.off_dn = np.zeros_like(us)
            else:
                root = np.sqrt(0.25 * b * b + us * us)
                tilt = 0.25 * b * b / (root + us)  # root - u
                self.r_up, self.gap = -0.5 * b + root, 2.0 * root
                self.off_up = -0.5 * b + tilt
                self.off_dn = -0.5 * b - tilt

    def medium(self, x: float):
        eps = self.region.eps_left * math.exp(-self.region.b * x)
        return eps, 1.0, 1.0 if self.pol is Polarization.TE else 1.0 / eps

    def w(self, x: float):
        eps = self.region.eps_left * math.exp(-self.region.b * x)
        return np.sqrt(self.u**2 + eps * self.xi**2 / self.c**2)

    def basis(self, x: float):
        """Bessel data at ``x`` for the xi > 0 entries.

        Returns ``(s, log_ie, log_ke, w, e_i, e_k)`` where ``e_k`` is the excess
        of the K-type solution's x-log-derivative over ``+w`` and ``e_i`` that
        of the I-type solution over ``-w``.
        """
        hit = self._cache.get(x)
        if hit is not None:
            return hit
        r = self.region
        s = 2.0 * self.xi[self.dyn] * math.sqrt(r.eps_left) * math.exp(-0.5 * r.b * x) / (r.b * self.c)
        lb = log_bessel_ik(self.nu, s)
        h = np.hypot(self.nu, s)
        k = self.kappa
        root = np.sqrt(h * h - k)
        w = 0.5 * r.b * root
        bend = k / (h + root)
        e_k = -0.5 * r.b * (lb.excess_k + k - bend)
        e_i = -0.5 * r.b * (lb.excess_i + k + bend)
        out = (s, lb.log_ie, lb.log_ke, w, e_i, e_k)
        self._cache[x] = out
        return out

    def _growth(self, x0: float, x: float):
        s0, li0, lk0, w0, ei0, ek0 = self.basis(x0)
        s, li, lk, w, ei, ek = self.basis(x)
        tilt = 0.0 if self.kappa == 0 else np.log(s / s0)
        d1 = li - li0 + (s - s0) + tilt
        d2 = lk - lk0 - (s - s0) + tilt
        top = np.maximum(d1, d2)
        return (w0, ei0, ek0), (w, ei, ek), np.exp(d1 - top), np.exp(d2 - top), top

    def forward(self, x0: float, d0, x: float):
        return self._move(x0, d0, x, True)

    def backward(self, x0: float, d0, x: float):
        return self._move(x0, d0, x, False)

    def _move(self, x0: float, d0, x: float, fwd: bool):
        d = np.empty(self.u.shape)
        grow = np.empty(self.u.shape)
        if x == x0:
            return d0.copy(), np.zeros(self.u.shape)
        if self.any_static:
            mv = _pair_forward if fwd else _pair_backward
            if fwd:
                r, off = self.r_up, self.off_up
            else:
                r, off = self.r_up - self.gap, self.off_dn
            d[self.static], grow[self.static] = mv(r, self.gap, off, d0[self.static], x - x0)
        if self.any_dyn:
            (w0, ei0, ek0), (w, ei, ek), g1, g2, top = self._growth(x0, x)
            dd0 = d0[self.dyn]
            split0 = -2.0 * w0 + ei0 - ek0  # a_I - a_K at x0
            split = -2.0 * w + ei - ek
            if fwd:  # a0 = w0 + d0, K-type dominant
                amp_i = g1 * (dd0 - ek0)
                amp_k = g2 * (2.0 * w0 + dd0 - ei0)
                diff = amp_i - amp_k
                d[self.dyn] = ek + amp_i * split / diff
            else:  # a0 = -w0 + d0, I-type dominant
                amp_i = g1 * (dd0 - 2.0 * w0 - ek0)
                amp_k = g2 * (dd0 - ei0)
                diff = amp_i - amp_k
                d[self.dyn] = ei + amp_k * split / diff
            grow[self.dyn] = top + np.log(diff / split0)
        return d, grow


def _ops(region, pol, u, xi, c):
    return _CoreOps(region, pol, u, xi, c) if isinstance(region, _Core) else _HomogOps(region, pol, u, xi, c)


def _cross(u, xi, c, old, new, ratio):
    """``w_old * ratio - w_new`` at an interface, without cancellation."""
    (eo, mo, _), (en, mn, _) = old, new
    w_o = np.sqrt(u**2 + eo * mo * xi**2 / c**2)
    w_n = np.sqrt(u**2 + en * mn * xi**2 / c**2)
    num = u**2 * (ratio * ratio - 1.0) + xi**2 / c**2 * (eo * mo * ratio * ratio - en * mn)
    return num / (w_o * ratio + w_n)


class GreenSolution:
    """Solved Green function of one polarization, vectorised over ``(u, xi)``.

    ``u`` and ``xi`` broadcast; every returned array has their broadcast
    shape.  Construction sweeps the left solution rightwards and the right
    solution leftwards once; later evaluations are local to one region.
    """

    def __init__(self, pol: Polarization, profile: Profile, u, xi, c: float = 1.0):
        u_a, xi_a = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(xi, dtype=float))
        if np.any((u_a == 0) & (xi_a == 0)):
            raise DegenerateSpectralPointError("u = xi = 0")
        self.pol = pol
        self.profile = profile
        self.c = c
        self.shape = u_a.shape
        self.u = u_a.ravel().copy()
        self.xi = xi_a.ravel().copy()
        self.regions = _regions(profile)
        self.ops = [_ops(r, pol, self.u, self.xi, c) for r in self.regions]
        n = len(self.regions)
        self.ref_left = self.regions[0].hi if n > 1 else 0.0
        self.ref_right = self.regions[-1].lo if n > 1 else 0.0
        self.d_start = [None] * n  # left excess at regions[j].lo (inside j)
        self.lam_start = [None] * n
        self.d_end = [None] * n  # right excess at regions[j].hi (inside j)
        self.lam_end = [None] * n
        zero = np.zeros_like(self.u)
        d, lam = zero, zero
        for j in range(1, n):
            z = self.regions[j].lo
            if j > 1:
                d, grow = self.ops[j - 1].forward(self.regions[j - 1].lo, d, z)
                lam = lam + grow
            old, new = self.ops[j - 1].medium(z), self.ops[j].medium(z)
            ratio = old[2] / new[2]
            d = d * ratio + _cross(self.u, self.xi, c, old, new, ratio)
            self.d_start[j], self.lam_start[j] = d, lam
        d, lam = zero, zero
        for j in range(n - 2, -1, -1):
            z = self.regions[j].hi
            if j < n - 2:
                d, grow = self.ops[j + 1].backward(self.regions[j + 1].hi, d, z)
                lam = lam + grow
            old, new = self.ops[j + 1].medium(z), self.ops[j].medium(z)
            ratio = old[2] / new[2]
            d = d * ratio - _cross(self.u, self.xi, c, old, new, ratio)
            self.d_end[j], self.lam_end[j] = d, lam

    def region_of(self, x: float) -> int:
        return _locate(self.profile, x)

    def state(self, x: float):
        """``(d_left, d_right, log phi_L, log phi_R, p, w)`` at ``x`` as flat arrays."""
        j = self.region_of(x)
        n = len(self.regions)
        op = self.ops[j]
        w = op.w(x)
        if j == 0:
            d_l = np.zeros_like(self.u)
            lam_l = w * (x - self.ref_left)
        else:
            d_l, grow = op.forward(self.regions[j].lo, self.d_start[j], x)
            lam_l = self.lam_start[j] + grow
        if j == n - 1:
            d_r = np.zeros_like(self.u)
            lam_r = -w * (x - self.ref_right)
        else:
            d_r, grow = op.backward(self.regions[j].hi, self.d_end[j], x)
            lam_r = self.lam_end[j] + grow
        return d_l, d_r, lam_l, lam_r, op.medium(x)[2], w

    def evaluate(self, x: float, xp: float, side: Side = Side.BELOW):
        """``(value, d_x, d_xp, d_x_d_xp)`` arrays at ``(x, x')``."""
        if x == xp:
            d_l, d_r, _, _, p, w = self.state(x)
            a, beta = w + d_l, -w + d_r
            g = 1.0 / (p * (beta - a))
            if side is Side.ABOVE:
                dx, dxp = a * g, beta * g
            else:
                dx, dxp = beta * g, a * g
            out = (g, dx, dxp, a * beta * g)
        else:
            lo, hi = (x, xp) if x < xp else (xp, x)
            dl_lo, _, lam_lo, _, _, w_lo = self.state(lo)
            dl_hi, dr_hi, lam_hi, _, p_hi, w_hi = self.state(hi)
            a_lo = w_lo + dl_lo
            a_hi, b_hi = w_hi + dl_hi, -w_hi + dr_hi
            g = np.exp(lam_lo - lam_hi) / (p_hi * (b_hi - a_hi))
            if x < xp:
                out = (g, a_lo * g, b_hi * g, a_lo * b_hi * g)
            else:
                out = (g, b_hi * g, a_lo * g, b_hi * a_lo * g)
        return tuple(o.reshape(self.shape) for o in out)

    def coincidence(self, x: float):
        """Left/right excesses, ``p`` and ``w`` at ``x' = x`` in the broadcast shape."""
        d_l, d_r, _, _, p, w = self.state(x)
        return d_l.reshape(self.shape), d_r.reshape(self.shape), p, w.reshape(self.shape)


@functools.lru_cache(maxsize=512)
def _cached_solution(pol: Polarization, profile: Profile, u: float, xi: float, c: float) -> GreenSolution:
    return GreenSolution(pol, profile, u, xi, c)


def _as_eval(vals, x: float, xp: float, side: Side) -> GreenEval:
    v, dx, dxp, dd = (float(q) for q in vals)
    coincident = x == xp
    return GreenEval(v, dx, dxp, dd, coincident, side if coincident else Side.NOT_COINCIDENT)


def green_full(
    pol: Polarization,
    sp: SpectralPoint,
    x: float,
    xp: float,
    profile: Profile,
    c: float = 1.0,
    side: Side = Side.BELOW,
) -> GreenEval:
    """Exact (unregularized) Green function with first and mixed partials."""
    if sp.degenerate:
        raise DegenerateSpectralPointError("u = xi = 0")
    return _as_eval(_cached_solution(pol, profile, sp.u, sp.xi, c).evaluate(x, xp, side), x, xp, side)


# ---------------------------------------------------------------------------
# layered stacks: amplitude transfer matrices


class TransferSolution:
    """Layer-stack Green function from per-layer amplitudes of ``e^{+-w_j t}``.

    In layer ``j`` the left solution is ``A e^{w t} + B e^{-w t}`` with
    ``t = x - x_start[j]`` (``t = x - x_start[1]`` in the first layer);
    amplitudes are renormalised after every interface and the discarded
    scale is kept as a logarithm.  Vectorised over ``(u, xi)`` like
    :class:`GreenSolution`, but shares none of its propagation code.
    """

    def __init__(self, pol: Polarization, layers: Multilayer, u, xi, c: float = 1.0):
        u_a, xi_a = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(xi, dtype=float))
        if np.any((u_a == 0) & (xi_a == 0)):
            raise DegenerateSpectralPointError("u = xi = 0")
        self.layers = layers
        self.shape = u_a.shape
        uu, xx = u_a.ravel(), xi_a.ravel()
        lays = layers.layers
        n = len(lays)
        self.z = list(layers.boundaries)
        self.origin = [self.z[0] if n > 1 else 0.0] + self.z
        self.width = [0.0] + [self.z[j] - self.z[j - 1] for j in range(1, n - 1)] + [math.inf]
        self.w = [np.sqrt(uu**2 + lay.eps * lay.mu * xx**2 / c**2) for lay in lays]
        self.p = [_p_weight(pol, lay.eps, lay.mu) for lay in lays]
        one, nil = np.ones_like(uu), np.zeros_like(uu)
        # left solution: (A, B, log scale) per layer
        self.left = [(one, nil, nil)]
        for j in range(1, n):
            a_, b_, lg = self.left[-1]
            h = self.width[j - 1]
            wo = self.w[j - 1]
            e = np.exp(-2.0 * wo * h)
            val = a_ + b_ * e  # times e^{wo h}
            flux = self.p[j - 1] * wo * (a_ - b_ * e) / (self.p[j] * self.w[j])
            na, nb = 0.5 * (val + flux), 0.5 * (val - flux)
            norm = np.maximum(np.abs(na), np.abs(nb))
            self.left.append((na / norm, nb / norm, lg + wo * h + np.log(norm)))
        # right solution: phi_R = e^L (A e^{w(t-h)} + B e^{-w(t-h)}), referenced to
        # the right end t = h of each layer (h = 0 for the semi-infinite ends)
        self.h = [0.0 if not math.isfinite(wd) else wd for wd in self.width]
        self.h[-1] = 0.0
        right = [(nil, one, nil)]
        for j in range(n - 2, -1, -1):
            a_, b_, lg = right[0]
            wn, hn = self.w[j + 1], self.h[j + 1]
            e = np.exp(-2.0 * wn * hn)
            val = a_ * e + b_  # times e^{wn hn}, at the start of layer j+1
            flux = self.p[j + 1] * wn * (a_ * e - b_) / (self.p[j] * self.w[j])
            na, nb = 0.5 * (val + flux), 0.5 * (val - flux)
            norm = np.maximum(np.abs(na), np.abs(nb))
            right.insert(0, (na / norm, nb / norm, lg + wn * hn + np.log(norm)))
        self.right = right

    def _layer(self, x: float) -> int:
        return self.layers.layer_index(x)

    def state(self, x: float):
        """``(d_left, d_right, log phi_L, log phi_R, p, w)`` at ``x``."""
        j = self._layer(x)
        w = self.w[j]
        t = x - self.origin[j]
        a_, b_, lg = self.left[j]
        e = np.exp(-2.0 * w * max(t, 0.0))  # the first layer has B = 0
        den = a_ + b_ * e
        d_l = -2.0 * w * b_ * e / den
        lam_l = lg + w * t + np.log(den)
        a_, b_, lg = self.right[j]
        rel = t - self.h[j]
        e = np.exp(2.0 * w * min(rel, 0.0))  # the last layer has A = 0
        den = a_ * e + b_
        d_r = 2.0 * w * a_ * e / den
        lam_r = lg - w * rel + np.log(den)
        return d_l, d_r, lam_l, lam_r, self.p[j], w

    def evaluate(self, x: float, xp: float, side: Side = Side.BELOW):
        if x == xp:
            d_l, d_r, _, _, p, w = self.state(x)
            a, beta = w + d_l, -w + d_r
            g = 1.0 / (p * (beta - a))
            if side is Side.ABOVE:
                dx, dxp = a * g, beta * g
            else:
                dx, dxp = beta * g, a * g
            out = (g, dx, dxp, a * beta * g)
        else:
            lo, hi = (x, xp) if x < xp else (xp, x)
            dl_lo, _, lam_lo, _, _, w_lo = self.state(lo)
            dl_hi, dr_hi, lam_hi, _, p_hi, w_hi = self.state(hi)
            a_lo = w_lo + dl_lo
            a_hi, b_hi = w_hi + dl_hi, -w_hi + dr_hi
            g = np.exp(lam_lo - lam_hi) / (p_hi * (b_hi - a_hi))
            if x < xp:
                out = (g, a_lo * g, b_hi * g, a_lo * b_hi * g)
            else:
                out = (g, b_hi * g, a_lo * g, b_hi * a_lo * g)
        return tuple(o.reshape(self.shape) for o in out)

    def coincidence(self, x: float):
        d_l, d_r, _, _, p, w = self.state(x)
        return d_l.reshape(self.shape), d_r.reshape(self.shape), p, w.reshape(self.shape)


@functools.lru_cache(maxsize=64)
def _cached_transfer(pol: Polarization, layers: Multilayer, u: float, xi: float, c: float) -> TransferSolution:
    return TransferSolution(pol, layers, u, xi, c)


def green_multilayer(
    pol: Polarization,
    sp: SpectralPoint,
    x: float,
    xp: float,
    layers: Multilayer | ThreeLayer,
    c: float = 1.0,
    side: Side = Side.BELOW,
) -> GreenEval:
    """Green function of a stack of homogeneous layers by transfer matrices."""
    if sp.degenerate:
        raise DegenerateSpectralPointError("u = xi = 0")
    if isinstance(layers, ThreeLayer):
        layers = layers.as_multilayer()
    elif not isinstance(layers, Multilayer):
        layers = Multilayer(tuple(layers))
    sol = _cached_transfer(pol, layers, sp.u, sp.xi, c)
    return _as_eval(sol.evaluate(x, xp, side), x, xp, side)


def slice_to_multilayer(profile: ExponentialCore, n_layers: int) -> Multilayer:
    """Staircase of ``n_layers`` equal slabs, each at the permittivity of its midpoint."""
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1")
    h = profile.x_right / n_layers
    layers = [Layer(-math.inf, profile.eps_left)]
    for k in range(n_layers):
        x0 = k * h
        layers.append(Layer(x0, epsilon_at(profile, x0 + 0.5 * h)))
    layers.append(Layer(profile.x_right, profile.eps_right))
    return Multilayer(tuple(layers))



# ---------------------------------------------------------------------------
# core basis and the explicit 4x4 matching


class CoreBasis(NamedTuple):
    """Core solutions in log form: ``f = exp(log_f)``, ``df/dx = f * dlog_f``."""

    log_f1: float
    log_f2: float
    dlog_f1: float
    dlog_f2: float

    @property
    def f1(self) -> float:
        return math.exp(self.log_f1)

    @property
    def f2(self) -> float:
        return math.exp(self.log_f2)

    @property
    def df1(self) -> float:
        return self.f1 * self.dlog_f1

    @property
    def df2(self) -> float:
        return self.f2 * self.dlog_f2


def green_core_basis(pol: Polarization, sp: SpectralPoint, x: float, profile: ExponentialCore, c: float = 1.0) -> CoreBasis:
    """``I``-type (f1) and ``K``-type (f2) solutions of the core equation at ``x``."""
    if not 0 <= x <= profile.x_right:
        raise ValueError("x must lie in the core")
    s = float(s_of_x(x, sp.xi, profile.eps_left, profile.b, c))
    nu = float(_core_order(pol, sp.u, profile.b))
    lb = log_bessel_ik(nu, s)
    log1, log2 = float(lb.log_ie) + s, float(lb.log_ke) - s
    f1, f2 = float(lb.dlog_i), float(lb.dlog_k)
    if pol is Polarization.TM:
        log1 += math.log(s)
        log2 += math.log(s)
        f1 += 1.0 / s
        f2 += 1.0 / s
    ds_dx = -0.5 * profile.b * s
    return CoreBasis(log1, log2, f1 * ds_dx, f2 * ds_dx)


@dataclass(frozen=True)
class MatchedCoefficients:
    """Amplitudes of the matched solution, stored column-scaled.

    The physical amplitude is ``scaled * exp(-log_norm)`` for each of
    ``t_left`` (``e^{w_L x}``), ``c1`` (``I``-type), ``c2`` (``K``-type) and
    ``t_right`` (``e^{-w_R x}``).
    """

    pol: Polarization
    sp: SpectralPoint
    source_x: float
    profile: ExponentialCore
    c: float
    scaled: tuple[float, float, float, float]
    log_norm: tuple[float, float, float, float]
    residual: float
    condition: float

    def amplitude(self, name: str) -> float:
        k = ("t_left", "c1", "c2", "t_right").index(name)
        return self.scaled[k] * math.exp(-self.log_norm[k])

    t_left = property(lambda self: self.amplitude("t_left"))
    c1 = property(lambda self: self.amplitude("c1"))
    c2 = property(lambda self: self.amplitude("c2"))
    t_right = property(lambda self: self.amplitude("t_right"))

    def value_at(self, x: float) -> tuple[float, float]:
        """``(g, dg/dx)`` of the matched solution at ``x`` (``x != source_x``)."""
        prof, sp, c = self.profile, self.sp, self.c
        region = prof.region(x)
        xs = self.source_x
        src_region = prof.region(xs)
        if region == 0:
            w = math.sqrt(sp.u**2 + prof.eps_left * sp.xi**2 / c**2)
            g = self.t_left * math.exp(w * x)
            dg = w * g
            if src_region == 0:
                bulk = green_homogeneous(self.pol, sp, x, xs, prof.eps_left, 1.0, c)
                g, dg = g + bulk.value, dg + bulk.d_x
            return g, dg
        if region == 2:
            w = math.sqrt(sp.u**2 + prof.eps_right * sp.xi**2 / c**2)
            g = self.t_right * math.exp(-w * x)
            dg = -w * g
            if src_region == 2:
                bulk = green_homogeneous(self.pol, sp, x, xs, prof.eps_right, 1.0, c)
                g, dg = g + bulk.value, dg + bulk.d_x
            return g, dg
        basis = green_core_basis(self.pol, sp, x, prof, c)
        t1 = self.scaled[1] * math.exp(basis.log_f1 - self.log_norm[1])
        t2 = self.scaled[2] * math.exp(basis.log_f2 - self.log_norm[2])
        g = t1 + t2
        dg = t1 * basis.dlog_f1 + t2 * basis.dlog_f2
        if src_region == 1:
            pg, pdg = _particular(self.pol, sp, x, xs, prof, c)
            g, dg = g + pg, dg + pdg
        return g, dg


def _particular(
    pol: Polarization, sp: SpectralPoint, x: float, xs: float, prof: ExponentialCore, c: float, inclusive: bool = False
):
    """Core particular solution carrying the delta source, and its x-derivative.

    It is supported on ``x < x'``.  ``inclusive`` also switches it on at
    ``x == x'``; the matching at ``x = 0`` needs that so a source sitting on
    the interface still puts its jump between the half-space and the core.
    """
    if x > xs or (x == xs and not inclusive):
        return 0.0, 0.0
    here = green_core_basis(pol, sp, x, prof, c)
    src = green_core_basis(pol, sp, xs, prof, c)
    # prefactor/(W of the basis) chosen so that p * jump of dg/dx = 1:
    # phi = [f1(x) f2(x') - f1(x') f2(x)] / (p(x') * Wx), Wx = f1 f2' - f1' f2 at x'
    eps_s = prof.eps_left * math.exp(-prof.b * xs)
    p_s = 1.0 if pol is Polarization.TE else 1.0 / eps_s
    wr = math.exp(src.log_f1 + src.log_f2) * (src.dlog_f2 - src.dlog_f1)
    e12 = math.exp(here.log_f1 + src.log_f2)
    e21 = math.exp(src.log_f1 + here.log_f2)
    g = (e12 - e21) / (p_s * wr)
    dg = (e12 * here.dlog_f1 - e21 * here.dlog_f2) / (p_s * wr)
    return g, dg


def match_interfaces(
    pol: Polarization,
    sp: SpectralPoint,
    source_x: float,
    profile: ExponentialCore,
    c: float = 1.0,
) -> MatchedCoefficients:
    """Solve continuity of ``g`` and ``p dg/dx`` at ``x = 0`` and ``x = x_R``.

    Columns are scaled by the dominant size of each basis function so only
    ratios of Bessel values enter; the system is solved with partial pivoting
    plus one step of iterative refinement.
    """
    if not isinstance(profile, ExponentialCore):
        raise TypeError("match_interfaces needs an ExponentialCore profile")
    if sp.xi <= 0:
        raise DegenerateSpectralPointError("the Bessel matching needs xi > 0")
    xr = profile.x_right
    wl = math.sqrt(sp.u**2 + profile.eps_left * sp.xi**2 / c**2)
    wr = math.sqrt(sp.u**2 + profile.eps_right * sp.xi**2 / c**2)
    b0 = green_core_basis(pol, sp, 0.0, profile, c)
    b1 = green_core_basis(pol, sp, xr, profile, c)
    p_l = _p_weight(pol, profile.eps_left, 1.0)
    p_r = _p_weight(pol, profile.eps_right, 1.0)
    log_norm = (0.0, b0.log_f1, b1.log_f2, -wr * xr)
    r1_at_r = math.exp(b1.log_f1 - b0.log_f1)  # f1(x_R)/f1(0)
    r2_at_0 = math.exp(b0.log_f2 - b1.log_f2)  # f2(0)/f2(x_R)
    mat = np.array(
        [
            [1.0, -1.0, -r2_at_0, 0.0],
            [p_l * wl, -p_l * b0.dlog_f1, -p_l * r2_at_0 * b0.dlog_f2, 0.0],
            [0.0, r1_at_r, 1.0, -1.0],
            [0.0, p_r * r1_at_r * b1.dlog_f1, p_r * b1.dlog_f2, p_r * wr],
        ]
    )
    rhs = np.zeros(4)
    region = profile.region(source_x)
    if region == 1:
        pg, pdg = _particular(pol, sp, 0.0, source_x, profile, c, inclusive=True)
        rhs[0], rhs[1] = pg, p_l * pdg
        pg, pdg = _particular(pol, sp, xr, source_x, profile, c)
        rhs[2], rhs[3] = -pg, -p_r * pdg
    elif region == 0:
        bulk = green_homogeneous(pol, sp, 0.0, source_x, profile.eps_left, 1.0, c)
        rhs[0], rhs[1] = -bulk.value, -p_l * bulk.d_x
    else:
        bulk = green_homogeneous(pol, sp, xr, source_x, profile.eps_right, 1.0, c)
        rhs[2], rhs[3] = bulk.value, p_r * bulk.d_x
    cond = float(np.linalg.cond(mat))
    if not math.isfinite(cond) or cond > 1e15:
        raise SingularMatrixError("interface matching system is singular", cond)
    sol = np.linalg.solve(mat, rhs)
    sol = sol + np.linalg.solve(mat, rhs - mat @ sol)
    scale = max(float(np.max(np.abs(mat))), 1e-300)
    resid = float(np.max(np.abs(mat @ sol - rhs))) / scale
    return MatchedCoefficients(
        pol, sp, float(source_x), profile, c, tuple(float(v) for v in sol), log_norm, resid, cond
    )
