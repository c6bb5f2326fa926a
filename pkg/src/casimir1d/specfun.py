"""Modified Bessel functions I_nu, K_nu of real order in log-scaled form.

Everything downstream works with logarithms of the function values and with
logarithmic derivatives, which is what keeps the large-order tails finite:
``I_nu(s)`` underflows and ``K_nu(s)`` overflows long before their product
``I_nu(s) K_nu(s) ~ 1/(2 nu)`` becomes unrepresentable.

Evaluation regimes
------------------
* ``nu >= NU_DEBYE``: Debye uniform asymptotic expansion in ``z = s/nu``,
  valid for every ``s > 0``.
* ``nu < NU_DEBYE``: exponentially scaled AMOS routines (``scipy.special.ive``,
  ``kve``) at orders ``nu`` and ``nu + 1``; where those leave the double range
  (tiny ``s``) the ascending power series is used for ``I`` and stable forward
  recurrence from the fractional order for ``K``.

In the band ``NU_DEBYE <= nu < NU_DEBYE + OVERLAP`` both regimes are evaluated
and compared; disagreement above ``AGREEMENT_TOL`` raises a
:class:`BesselAccuracyWarning`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy import special

__all__ = [
    "BesselAccuracyWarning",
    "BesselDomainError",
    "BesselPair",
    "LogBessel",
    "bessel_iv_scaled",
    "bessel_kv_scaled",
    "bessel_pair",
    "log_bessel_ik",
]

NU_DEBYE = 50.0
OVERLAP = 5.0
AGREEMENT_TOL = 1e-8
N_DEBYE_TERMS = 14

_LOG_TINY = math.log(1e-300)
_LOG_HUGE = math.log(1e300)


class BesselDomainError(ValueError):
    """Raised for a non-positive argument or a negative order."""


class BesselAccuracyWarning(RuntimeWarning):
    """Two evaluation methods disagree beyond ``AGREEMENT_TOL``."""


class LogBessel(NamedTuple):
    """Scaled logs ``log(e^-s I)``, ``log(e^s K)`` and log-derivatives ``I'/I``, ``K'/K``.

    ``excess_i = s I'/I - h`` and ``excess_k = s K'/K + h`` with
    ``h = sqrt(nu^2 + s^2)`` are the departures from the leading uniform
    behaviour, returned without the cancellation of forming them by hand.
    """

    log_ie: np.ndarray
    log_ke: np.ndarray
    dlog_i: np.ndarray
    dlog_k: np.ndarray
    excess_i: np.ndarray
    excess_k: np.ndarray


@dataclass(frozen=True)
class BesselPair:
    """Scaled values and derivatives of ``I_nu(s)`` and ``K_nu(s)``.

    The true scaled quantities are ``exp(-s) I_nu(s) = i_scaled * exp(log_shift)``
    and ``exp(s) K_nu(s) = k_scaled * exp(-log_shift)`` (derivatives alike).
    ``log_shift`` is zero whenever both are representable doubles; otherwise
    it balances the two magnitudes.  Products ``I * K`` and the Wronskian are
    independent of the shift.
    """

    nu: float
    s: float
    i_scaled: float
    k_scaled: float
    di_scaled: float
    dk_scaled: float
    log_shift: float = 0.0

    @property
    def wronskian(self) -> float:
        """``I K' - I' K``, equal to ``-1/s``."""
        return self.i_scaled * self.dk_scaled - self.di_scaled * self.k_scaled


# ---------------------------------------------------------------------------
# Debye polynomials u_k(t), v_k(t) (exact rational coefficients, built once)


def _poly_deriv(c: list[Fraction]) -> list[Fraction]:
    return [k * c[k] for k in range(1, len(c))] or [Fraction(0)]


def _poly_mul(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] += ai * bj
    return out


def _poly_add(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    n = max(len(a), len(b))
    a = a + [Fraction(0)] * (n - len(a))
    b = b + [Fraction(0)] * (n - len(b))
    return [x + y for x, y in zip(a, b)]


def _poly_integral(c: list[Fraction]) -> list[Fraction]:
    return [Fraction(0)] + [ck / (k + 1) for k, ck in enumerate(c)]


def _debye_polynomials(n: int) -> tuple[list[np.ndarray], list[np.ndarray], list[np.ndarray]]:
    """``u_k``, ``v_k`` and ``q_k`` with ``v_k - u_k = (t^2 - 1) q_k``."""
    u = [[Fraction(1)]]
    half_t2_1mt2 = [Fraction(0), Fraction(0), Fraction(1, 2), Fraction(0), Fraction(-1, 2)]
    one_m5t2 = [Fraction(1), Fraction(0), Fraction(-5)]
    for _ in range(1, n):
        prev = u[-1]
        term1 = _poly_mul(half_t2_1mt2, _poly_deriv(prev))
        term2 = [c / 8 for c in _poly_integral(_poly_mul(one_m5t2, prev))]
        u.append(_poly_add(term1, term2))
    v = [[Fraction(1)]]
    q = [[Fraction(0)]]
    t_t2m1 = [Fraction(0), Fraction(-1), Fraction(0), Fraction(1)]
    for k in range(1, n):
        inner = _poly_add([c / 2 for c in u[k - 1]], _poly_mul([Fraction(0), Fraction(1)], _poly_deriv(u[k - 1])))
        v.append(_poly_add(u[k], _poly_mul(t_t2m1, inner)))
        q.append(_poly_mul([Fraction(0), Fraction(1)], inner))
    # highest power first for np.polyval
    as_arr = lambda c: np.array([float(x) for x in reversed(c)])  # noqa: E731
    return [as_arr(c) for c in u], [as_arr(c) for c in v], [as_arr(c) for c in q]


_U_POLY, _V_POLY, _Q_POLY = _debye_polynomials(N_DEBYE_TERMS)


def _debye(nu: np.ndarray, s: np.ndarray) -> LogBessel:
    z = s / nu
    root = np.hypot(1.0, z)  # sqrt(1 + z^2)
    p = 1.0 / root
    big = nu * root
    # nu*eta - s, with log(z/(1+root)) = -asinh(1/z)
    eta_s = nu * nu / (big + s) - nu * np.arcsinh(1.0 / z)
    su = np.zeros_like(z)
    sk = np.zeros_like(z)
    sv = np.zeros_like(z)
    sw = np.zeros_like(z)
    dd = np.zeros_like(z)
    de = np.zeros_like(z)
    inv = 1.0 / nu
    fac = np.ones_like(z)
    for k in range(N_DEBYE_TERMS):
        uk = np.polyval(_U_POLY[k], p) * fac
        vk = np.polyval(_V_POLY[k], p) * fac
        sgn = -1.0 if k % 2 else 1.0
        su += uk
        sk += sgn * uk
        sv += vk
        sw += sgn * vk
        dk = np.polyval(_Q_POLY[k], p) * fac
        dd += dk
        de += sgn * dk
        fac = fac * inv
    common = -0.25 * np.log1p(z * z)
    log_i = eta_s - 0.5 * np.log(2.0 * np.pi * nu) + common + np.log(su)
    log_k = -eta_s + 0.5 * np.log(np.pi / (2.0 * nu)) + common + np.log(sk)
    slope = big / s  # sqrt(nu^2+s^2)/s
    dlog_i = slope * sv / su
    dlog_k = -slope * sw / sk
    # 1 - p^2 = z^2/(1+z^2), formed without cancellation
    gap = big * (z * z / (1.0 + z * z))
    return LogBessel(log_i, log_k, dlog_i, dlog_k, -gap * dd / su, gap * de / sk)


# ---------------------------------------------------------------------------
# small/moderate order


def _series_log_i(nu: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """log I_nu(s) and I_{nu+1}/I_nu from the ascending series (small s)."""
    q = 0.25 * s * s
    s0 = np.ones_like(s)
    s1 = np.ones_like(s)
    t0 = np.ones_like(s)
    t1 = np.ones_like(s)
    for k in range(1, 200):
        t0 = t0 * q / (k * (nu + k))
        t1 = t1 * q / (k * (nu + 1 + k))
        s0 += t0
        s1 += t1
        if np.all(t0 < 1e-17 * s0) and np.all(t1 < 1e-17 * s1):
            break
    log_i = nu * np.log(0.5 * s) - special.gammaln(nu + 1.0) + np.log(s0)
    ratio = 0.5 * s / (nu + 1.0) * s1 / s0
    return log_i, ratio


def _recurrence_log_k(nu: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """log(e^s K_nu(s)) and K_{nu+1}/K_nu by forward recurrence from the fractional order."""
    m = np.floor(nu)
    mu = nu - m
    k0 = special.kve(mu, s)
    k1 = special.kve(mu + 1.0, s)
    if not (np.all(np.isfinite(k1)) and np.all(k0 > 0)):
        raise OverflowError("K at the fractional order is not representable; argument too small")
    log_k = np.log(k0)
    r = k1 / k0
    for j in range(int(np.max(m, initial=0))):
        active = j < m
        log_k = np.where(active, log_k + np.log(r), log_k)
        r = np.where(active, 1.0 / r + 2.0 * (mu + j + 1.0) / s, r)
    return log_k, r


def _amos(nu: np.ndarray, s: np.ndarray) -> LogBessel:
    with np.errstate(all="ignore"):
        i0 = special.ive(nu, s)
        i1 = special.ive(nu + 1.0, s)
        k0 = special.kve(nu, s)
        k1 = special.kve(nu + 1.0, s)
        log_i = np.log(i0)
        ratio_i = i1 / i0
        log_k = np.log(k0)
        ratio_k = k1 / k0
    bad_i = ~((i0 > 1e-290) & (i1 > 1e-290) & np.isfinite(log_i))
    if np.any(bad_i):
        li, ri = _series_log_i(nu[bad_i], s[bad_i])
        log_i[bad_i] = li - s[bad_i]
        ratio_i[bad_i] = ri
    bad_k = ~(np.isfinite(k0) & np.isfinite(k1) & (k0 < 1e290) & (k1 < 1e290))
    if np.any(bad_k):
        lk, rk = _recurrence_log_k(nu[bad_k], s[bad_k])
        log_k[bad_k] = lk
        ratio_k[bad_k] = rk
    h_nu = np.hypot(nu, s) + nu
    excess_i = s * (ratio_i - s / h_nu)
    excess_k = -s * ratio_k + h_nu
    return LogBessel(log_i, log_k, ratio_i + nu / s, -ratio_k + nu / s, excess_i, excess_k)


def log_bessel_ik(nu, s) -> LogBessel:
    """Vectorised ``log(e^-s I_nu(s))``, ``log(e^s K_nu(s))`` and s-log-derivatives.

    ``nu`` and ``s`` broadcast against each other.  Results are arrays with
    the broadcast shape (0-d for scalar input).
    """
    nu_a, s_a = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(s, dtype=float))
    if np.any(~np.isfinite(s_a)) or np.any(s_a <= 0):
        raise BesselDomainError("argument s must be finite and positive")
    if np.any(~np.isfinite(nu_a)) or np.any(nu_a < 0):
        raise BesselDomainError("order nu must be finite and non-negative")
    shape = nu_a.shape
    nu_f = nu_a.ravel().copy()
    s_f = s_a.ravel().copy()
    # scipy's kve breaks on subnormal orders; the change is far below rounding
    nu_f[nu_f < 1e-300] = 0.0
    out = [np.empty_like(nu_f) for _ in LogBessel._fields]

    large = nu_f >= NU_DEBYE
    if np.any(large):
        res = _debye(nu_f[large], s_f[large])
        for o, r in zip(out, res):
            o[large] = r
        band = large & (nu_f < NU_DEBYE + OVERLAP)
        if np.any(band):
            _cross_check(nu_f[band], s_f[band], _debye(nu_f[band], s_f[band]))
    small = ~large
    if np.any(small):
        res = _amos(nu_f[small], s_f[small])
        for o, r in zip(out, res):
            o[small] = r
    return LogBessel(*(o.reshape(shape) for o in out))


def _cross_check(nu: np.ndarray, s: np.ndarray, ref: LogBessel) -> None:
    # only where the scaled AMOS values are ordinary doubles
    with np.errstate(all="ignore"):
        ok = (np.abs(ref.log_ie) < 600) & (np.abs(ref.log_ke) < 600)
    if not np.any(ok):
        return
    alt = _amos(nu[ok], s[ok])
    err = max(
        float(np.max(np.abs(alt.log_ie - ref.log_ie[ok]))),
        float(np.max(np.abs(alt.log_ke - ref.log_ke[ok]))),
        float(np.max(np.abs(alt.dlog_i / ref.dlog_i[ok] - 1.0))),
        float(np.max(np.abs(alt.dlog_k / ref.dlog_k[ok] - 1.0))),
    )
    if err > AGREEMENT_TOL:
        warnings.warn(
            f"Bessel methods disagree by {err:.3g} (relative) near nu={float(nu[0]):.6g}",
            BesselAccuracyWarning,
            stacklevel=3,
        )


# ---------------------------------------------------------------------------
# scalar front ends


def _check_scalar(nu: float, s: float) -> None:
    if not (math.isfinite(s) and s > 0):
        raise BesselDomainError(f"argument s must be finite and positive, got {s!r}")
    if not (math.isfinite(nu) and nu >= 0):
        raise BesselDomainError(f"order nu must be finite and non-negative, got {nu!r}")


def bessel_iv_scaled(nu: float, s: float) -> float:
    """``exp(-s) * I_nu(s)``.  Underflows to 0.0 only for extreme ``nu/s``."""
    _check_scalar(nu, s)
    lb = log_bessel_ik(nu, s)
    return math.exp(float(lb.log_ie))


def bessel_kv_scaled(nu: float, s: float) -> float:
    """``exp(s) * K_nu(s)``; the order is replaced by ``|nu|`` (K is even in nu).

    Raises :class:`OverflowError` when the value exceeds the double range; use
    :func:`bessel_pair` or :func:`log_bessel_ik` there.
    """
    nu = abs(nu)
    _check_scalar(nu, s)
    lb = log_bessel_ik(nu, s)
    val = float(lb.log_ke)
    if val > _LOG_HUGE:
        raise OverflowError(f"exp(s)K_nu(s) = exp({val:.6g}) is out of range")
    return math.exp(val)


def bessel_pair(nu: float, s: float) -> BesselPair:
    """Scaled ``I``, ``K`` and their s-derivatives at one point."""
    _check_scalar(nu, s)
    lb = log_bessel_ik(nu, s)
    li = float(lb.log_ie)
    lk = float(lb.log_ke)
    shift = 0.0
    if not (_LOG_TINY < li < _LOG_HUGE and _LOG_TINY < lk < _LOG_HUGE):
        shift = 0.5 * (li - lk)
    iv = math.exp(li - shift)
    kv = math.exp(lk + shift)
    return BesselPair(
        nu=float(nu),
        s=float(s),
        i_scaled=iv,
        k_scaled=kv,
        di_scaled=iv * float(lb.dlog_i),
        dk_scaled=kv * float(lb.dlog_k),
        log_shift=shift,
    )
