"""Casimir stress sigma_xx, forces, and divergence detection.

The double integral

    sigma_xx(x) = -(hbar / 4 pi^2) int_0^inf du int_0^inf dxi  s(x, u, xi)

is evaluated with nested adaptive Gauss-Kronrod quadrature after mapping both
half-lines onto ``(0, 1)``.  Before integrating, the tails are classified:

* along ``u`` at fixed ``xi`` (probes ``U, 2U, 4U``): a constant non-zero
  limit of ``s`` is a linear divergence;
* along ``xi`` (probes ``X, 2X, 4X``): if ``xi * J(xi)`` with
  ``J = int s du`` is constant and non-zero the ``xi`` integral diverges
  logarithmically.

Both yield :class:`DivergentTail`, recorded as data rather than as an error.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from numpy.polynomial import Polynomial

from ._adaptive import BudgetExceeded, integrate_batch
from .greens import GreenSolution, Polarization, SingularMatrixError, TransferSolution
from .medium import (
    DegenerateSpectralPointError,
    ExponentialCore,
    Multilayer,
    Profile,
    SpectralPoint,
    ThreeLayer,
    epsilon_at,
    mu_at,
)
from .regular import (
    RegMode,
    StandardLifshitz,
    stress_kernel,
    subtraction_of,
    u_limit,
    wkb_tail_integral,
    wkb_tail_kernel,
    wkb_tail_onset,
)

__all__ = [
    "Converged",
    "DivergenceReport",
    "DivergentTail",
    "InconclusiveTailError",
    "InsufficientDataError",
    "PointFailure",
    "QuadratureSpec",
    "SlabForce",
    "StressOutcome",
    "fit_force_density",
    "force_per_area",
    "force_per_volume",
    "integrand_derivative_scan",
    "integrand_grid",
    "integrand_sigma_xx",
    "sigma_xx",
    "stress_profile",
    "three_layer_stress",
    "worker_count",
]

_TRANSFORMS = ("rational", "tangent")


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature and tail-classification settings.

    ``tail_probe`` are the ``u`` probes (examined at each ``tail_xi``) and
    ``xi_probe`` the ``xi`` probes.  When a probe triple is inconclusive it is
    doubled up to ``probe_doublings`` times before giving up.
    """

    u_transform: str = "rational"
    xi_transform: str = "rational"
    rel_tol: float = 1e-6
    abs_tol: float = 1e-10
    max_evals: int = 4_000_000
    tail_probe: tuple = (40.0, 80.0, 160.0)
    tail_xi: tuple = (0.5,)
    xi_probe: tuple = (64.0, 128.0, 256.0)
    plateau_tol: float = 0.01
    probe_doublings: int = 10

    def __post_init__(self):
        object.__setattr__(self, "tail_probe", tuple(float(v) for v in self.tail_probe))
        object.__setattr__(self, "tail_xi", tuple(float(v) for v in self.tail_xi))
        object.__setattr__(self, "xi_probe", tuple(float(v) for v in self.xi_probe))
        if self.u_transform not in _TRANSFORMS or self.xi_transform not in _TRANSFORMS:
            raise ValueError(f"transforms must be one of {_TRANSFORMS}")
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.plateau_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_evals < 1000:
            raise ValueError("max_evals must be at least 1000")
        for probes in (self.tail_probe, self.xi_probe):
            if len(probes) < 2 or any(q <= p for p, q in zip(probes, probes[1:])) or probes[0] <= 0:
                raise ValueError("probes must be positive and strictly increasing")
        if not self.tail_xi or min(self.tail_xi) <= 0:
            raise ValueError("tail_xi must list positive frequencies")


@dataclass(frozen=True)
class Converged:
    value: float
    err_est: float
    evals: int = 0


@dataclass(frozen=True)
class DivergentTail:
    """``axis='u'``: ``plateau`` is the limit of the integrand at large ``u``.

    ``axis='xi'``: ``plateau`` is the limit of ``xi * J(xi)``; the stress
    diverges like ``-plateau * log(xi_max) / (4 pi^2)``.  A tail that grows
    without bound is reported with an infinite ``plateau`` of its sign.
    """

    plateau: float
    direction: int
    evidence: tuple
    axis: str = "u"


StressOutcome = Union[Converged, DivergentTail]


@dataclass(frozen=True)
class PointFailure:
    """A per-point error inside a sweep."""

    kind: str
    message: str


class InconclusiveTailError(ArithmeticError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class SlabForce:
    value: float
    err_est: float


@dataclass(frozen=True)
class DivergenceReport:
    """Force on a slab is infinite; ``endpoints`` lists the divergent ends."""

    endpoints: tuple
    outcomes: tuple


# ---------------------------------------------------------------------------
# integrand


def _solution_type(engine: str):
    if engine == "analytic":
        return GreenSolution
    if engine == "transfer":
        return TransferSolution
    raise ValueError(f"unknown engine {engine!r}")


def integrand_grid(x: float, u, xi, profile: Profile, c: float = 1.0, subtraction: Optional[str] = "standard",
                   engine: str = "analytic") -> np.ndarray:
    """Vectorised stress integrand (factor ``u`` included); zero where ``u = 0``."""
    u = np.asarray(u, dtype=float)
    xi = np.asarray(xi, dtype=float)
    u, xi = np.broadcast_arrays(u, xi)
    safe_u = np.where(u > 0, u, 1.0)  # u = 0 contributes nothing and may be degenerate
    if engine == "transfer" and isinstance(profile, ThreeLayer):
        profile = profile.as_multilayer()
    cls = _solution_type(engine)
    total = np.zeros(u.shape)
    for pol in Polarization:
        sol = cls(pol, profile, safe_u, xi, c)
        total = total + stress_kernel(pol, sol, x, subtraction, profile, c)
    return np.where(u > 0, u * total, 0.0)


def integrand_sigma_xx(x: float, sp: SpectralPoint, profile: Profile, c: float = 1.0,
                       mode: RegMode = StandardLifshitz()) -> float:
    if sp.degenerate:
        raise DegenerateSpectralPointError("u = xi = 0")
    if sp.u == 0:
        return 0.0
    return float(integrand_grid(x, sp.u, sp.xi, profile, c, subtraction_of(mode)))


def integrand_derivative_scan(x: float, sp: SpectralPoint, profile: Profile, c: float = 1.0,
                              step: float = 1e-4) -> float:
    """Central difference in ``x`` of the standard-subtraction integrand (not certified as integrable)."""
    if not step > 0:
        raise ValueError("step must be positive")
    hi = integrand_sigma_xx(x + step, sp, profile, c, StandardLifshitz())
    lo = integrand_sigma_xx(x - step, sp, profile, c, StandardLifshitz())
    return (hi - lo) / (2.0 * step)


# ---------------------------------------------------------------------------
# transforms


def _map(kind: str, t, scale: float):
    """Map ``t in (0,1)`` to ``[0, inf)``; returns the value and its derivative."""
    if kind == "rational":
        one = 1.0 - t
        return scale * t / one, scale / (one * one)
    arg = 0.5 * math.pi * t
    cos = np.cos(arg)
    return scale * np.tan(arg), scale * 0.5 * math.pi / (cos * cos)


def _inverse_map(kind: str, u: float, scale):
    if kind == "rational":
        return u / (scale + u)
    return np.arctan(u / scale) * (2.0 / math.pi)


def _interface_distance(profile: Profile, x: float) -> float:
    if isinstance(profile, ExponentialCore):
        cuts = (0.0, profile.x_right)
    elif isinstance(profile, ThreeLayer):
        cuts = (profile.x_left, profile.x_right)
    else:
        cuts = profile.boundaries
    return min((abs(x - z) for z in cuts), default=math.inf)


def _index(profile: Profile, x: float) -> float:
    return math.sqrt(epsilon_at(profile, x) * mu_at(profile, x))


# ---------------------------------------------------------------------------
# tail classification


def _classify(values, floor: float, plateau_tol: float) -> str:
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        return "inconclusive"
    if np.all(np.abs(v) <= floor):
        return "decaying"
    mean = float(np.mean(v))
    if abs(mean) > floor and np.max(np.abs(v - mean)) < plateau_tol * abs(mean):
        return "plateau"
    if abs(v[-1]) <= 0.5 * abs(v[0]):
        return "decaying"
    mag = np.abs(v)
    if abs(v[-1]) > floor and np.all(np.diff(mag) > 0) and np.all(np.sign(v) == np.sign(v[-1])) \
            and mag[-1] >= 2.0 * mag[0]:
        return "growing"
    return "inconclusive"


class _Stress:
    """One ``sigma_xx`` evaluation: integrand, inner ``u`` integrals, probes."""

    def __init__(self, x, profile, c, mode, quad, hbar, engine):
        self.x, self.profile, self.c, self.quad, self.engine = x, profile, c, quad, engine
        self.sub = subtraction_of(mode)
        self.u_max = u_limit(mode)
        self.prefactor = -hbar / (4.0 * math.pi**2)
        self.index = _index(profile, x)
        self.evals = 0
        self.reach = _interface_distance(profile, x)
        # WKB inside a core: once w passes the onset the kernel is rounding noise on top
        # of a known closed form, so that form is used there; without a cutoff the
        # u integral is also closed analytically from u_c on
        self.w_model = math.inf
        if self.sub == "wkb" and isinstance(profile, ExponentialCore) and 0.0 < x < profile.x_right:
            self.w_model = wkb_tail_onset(x, profile, c)
        self.u_c = self.w_model if not math.isfinite(self.u_max) else math.inf

    def raw_sigma(self, u, xi):
        self.evals += np.size(u)
        return integrand_grid(self.x, u, xi, self.profile, self.c, self.sub, self.engine)

    def sigma(self, u, xi):
        if not math.isfinite(self.w_model):
            return self.raw_sigma(u, xi)
        u, xi = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(xi, dtype=float))
        far = u * u + (self.index * xi / self.c) ** 2 >= self.w_model**2
        out = np.empty(u.shape)
        if np.any(far):
            out[far] = wkb_tail_kernel(self.x, u[far], xi[far], self.profile, self.c)
        if not np.all(far):
            near = ~far
            out[near] = self.raw_sigma(u[near], xi[near])
        self.evals += int(np.count_nonzero(far))
        return out

    def u_of(self, t, xi):
        if math.isfinite(self.u_max):
            return self.u_max * t, np.full_like(t, self.u_max)
        scale = 1.0 + self.index * xi / self.c
        if math.isfinite(self.u_c):
            top = _inverse_map(self.quad.u_transform, self.u_c, scale)
            u, du = _map(self.quad.u_transform, t * top, scale)
            return u, du * top
        return _map(self.quad.u_transform, t, scale)

    def xi_of(self, r):
        return _map(self.quad.xi_transform, r, self.c / self.index)

    def u_integrals(self, xis, weights, rtol, atol, budget):
        """``weights[k] * int s(u, xis[k]) du`` for every ``k``."""
        xis = np.asarray(xis, dtype=float)
        weights = np.asarray(weights, dtype=float)

        def inner(t, owner):
            xi = xis[owner]
            u, du = self.u_of(t, xi)
            return self.sigma(u, xi) * du * weights[owner], None

        res = integrate_batch(inner, xis.size, rtol, atol, budget)
        if math.isfinite(self.u_c):
            tail = wkb_tail_integral(self.x, self.u_c, xis, self.profile, self.c)
            edge = np.full_like(xis, self.u_c)
            gap = np.abs(self.raw_sigma(edge, xis) - wkb_tail_kernel(self.x, edge, xis, self.profile, self.c))
            res.value = res.value + weights * tail
            res.error = res.error + np.abs(weights) * 0.5 * gap * self.u_c
        return res

    def _settled(self, rate: float) -> bool:
        """Whether decay rate ``rate`` has left reflections from the nearest interface behind."""
        return self.reach == 0.0 or rate * self.reach >= 10.0

    def u_tail(self):
        """Classification along ``u`` (skipped under a hard cutoff)."""
        if math.isfinite(self.u_max):
            return "decaying", ()
        floor = 10.0 * self.quad.abs_tol
        evidence = []
        verdict = "decaying"
        for xi in self.quad.tail_xi:
            probes = np.array(self.quad.tail_probe)
            for _ in range(self.quad.probe_doublings + 1):
                vals = self.sigma(probes, np.full_like(probes, xi))
                kind = _classify(vals, floor, self.quad.plateau_tol)
                evidence.append((xi, tuple(probes), tuple(float(v) for v in vals), kind))
                if kind in ("plateau", "growing") or (kind == "decaying" and self._settled(probes[0])):
                    break
                probes = probes * 2.0
            if kind in ("plateau", "growing"):
                return kind, tuple(evidence)
            if kind == "inconclusive":
                verdict = "inconclusive"
        return verdict, tuple(evidence)

    def xi_tail(self):
        """Classification of ``xi * J(xi)`` along ``xi``."""
        floor = self.quad.abs_tol
        evidence = []
        probes = np.array(self.quad.xi_probe)
        kind = "inconclusive"
        for _ in range(self.quad.probe_doublings + 1):
            res = self.u_integrals(probes, probes, 1e-3 * self.quad.plateau_tol, 0.1 * floor, self.quad.max_evals)
            vals = res.value
            kind = _classify(vals, floor, self.quad.plateau_tol)
            evidence.append((tuple(probes), tuple(float(v) for v in vals), kind))
            if kind in ("plateau", "growing") or (kind == "decaying" and self._settled(probes[0] * self.index / self.c)):
                break
            probes = probes * 2.0
        return kind, tuple(evidence)

    def integrate(self) -> Converged:
        q = self.quad
        scale = abs(1.0 / self.prefactor)
        rtol, atol = q.rel_tol, q.abs_tol * scale
        for _ in range(3):
            def outer(r, owner, rtol=rtol, atol=atol):
                xi, dxi = self.xi_of(r)
                remaining = q.max_evals - self.evals
                if remaining <= 0:
                    raise BudgetExceeded(np.array([math.nan]), np.array([math.inf]), self.evals)
                res = self.u_integrals(xi, dxi, 0.2 * rtol, 0.2 * atol, remaining)
                return res.value, res.error

            try:
                res = integrate_batch(outer, 1, 0.5 * rtol, 0.5 * atol, q.max_evals)
            except BudgetExceeded as exc:
                raise InconclusiveTailError(
                    "evaluation budget exhausted before the stress integral converged",
                    {"x": self.x, "evals": self.evals},
                ) from exc
            value = float(res.value[0]) * self.prefactor + 0.0  # no negative zero
            err = float(res.error[0]) * abs(self.prefactor)
            if err <= q.rel_tol * abs(value) + q.abs_tol:
                return Converged(value, err, self.evals)
            rtol, atol = rtol / 4.0, atol / 4.0
        raise InconclusiveTailError("error estimate did not meet the tolerance",
                                    {"x": self.x, "value": value, "err_est": err, "evals": self.evals})


def _divergent(values, kind, evidence, axis) -> DivergentTail:
    # a growing tail has no finite plateau; report it as a signed infinity
    plateau = float(np.mean(values)) if kind == "plateau" else math.copysign(math.inf, values[-1])
    return DivergentTail(plateau, int(np.sign(plateau)), evidence, axis)


def sigma_xx(x: float, profile: Profile, c: float = 1.0, mode: RegMode = StandardLifshitz(),
             quad: QuadratureSpec = QuadratureSpec(), hbar: float = 1.0, engine: str = "analytic") -> StressOutcome:
    """Regularized ``sigma_xx`` at ``x``, or the divergent tail that prevents it."""
    job = _Stress(x, profile, c, mode, quad, hbar, engine)
    verdict, evidence = job.u_tail()
    if verdict in ("plateau", "growing"):
        return _divergent(evidence[-1][2], verdict, evidence, "u")
    if verdict == "inconclusive":
        raise InconclusiveTailError("u tail neither decays nor settles on a plateau", {"x": x, "evidence": evidence})
    kind, xi_evidence = job.xi_tail()
    if kind in ("plateau", "growing"):
        return _divergent(xi_evidence[-1][1], kind, xi_evidence, "xi")
    if kind == "inconclusive":
        raise InconclusiveTailError("xi tail neither decays nor settles on a plateau",
                                    {"x": x, "evidence": xi_evidence})
    return job.integrate()


# ---------------------------------------------------------------------------
# sweeps


def worker_count(requested: Optional[int] = None) -> int:
    if requested is not None:
        if requested < 1:
            raise ValueError("worker count must be positive")
        return requested
    env = os.environ.get("CASIMIR1D_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("CASIMIR1D_THREADS must be positive")
        return n
    return os.cpu_count() or 1


def _one_point(args):
    x, profile, c, mode, quad, engine = args
    try:
        return sigma_xx(x, profile, c, mode, quad, engine=engine)
    except InconclusiveTailError as exc:
        return PointFailure("inconclusive", str(exc))
    except (SingularMatrixError, ArithmeticError, ValueError) as exc:
        return PointFailure(type(exc).__name__, str(exc))


def stress_profile(xs: Sequence[float], profile: Profile, c: float = 1.0, mode: RegMode = StandardLifshitz(),
                   quad: QuadratureSpec = QuadratureSpec(), workers: Optional[int] = None,
                   engine: str = "analytic") -> list:
    """``[(x, outcome)]`` in input order; failures are carried as :class:`PointFailure`."""
    xs = [float(v) for v in xs]
    if any(b < a for a, b in zip(xs, xs[1:])):
        raise ValueError("xs must be sorted")
    jobs = [(x, profile, c, mode, quad, engine) for x in xs]
    n = min(worker_count(workers), max(len(jobs), 1))
    if n == 1:
        results = [_one_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_one_point, jobs))
    return list(zip(xs, results))


def force_per_area(x1: float, x2: float, profile: Profile, c: float = 1.0, mode: RegMode = StandardLifshitz(),
                   quad: QuadratureSpec = QuadratureSpec(), workers: Optional[int] = 1):
    """``sigma_xx(x2) - sigma_xx(x1)``, or a :class:`DivergenceReport`.

    Swapping the endpoints flips the sign exactly.
    """
    (_, o1), (_, o2) = _pair_profile(x1, x2, profile, c, mode, quad, workers)
    bad = tuple(x for x, o in ((x1, o1), (x2, o2)) if not isinstance(o, Converged))
    if bad:
        return DivergenceReport(bad, (o1, o2))
    return SlabForce(o2.value - o1.value, o1.err_est + o2.err_est)


def _pair_profile(x1, x2, profile, c, mode, quad, workers):
    lo, hi = sorted((x1, x2))
    (_, a), (_, b) = stress_profile([lo, hi], profile, c, mode, quad, workers)
    return ((x1, a), (x2, b)) if x1 <= x2 else ((x1, b), (x2, a))


def fit_force_density(points: Sequence[tuple], fit_degree: int = 8, window: Optional[tuple] = None) -> Polynomial:
    """Least-squares polynomial through ``(x, sigma_xx)`` data, differentiated.

    Returns ``f = d sigma_xx / dx`` as a :class:`numpy.polynomial.Polynomial`.
    """
    data = [(float(x), float(v)) for x, v in points if window is None or window[0] <= x <= window[1]]
    if len(data) < fit_degree + 1:
        raise InsufficientDataError(f"need at least {fit_degree + 1} converged points, have {len(data)}")
    xs, vs = np.array(data).T
    return Polynomial.fit(xs, vs, fit_degree).deriv()


def _fit_window(profile: Profile) -> Optional[tuple]:
    if isinstance(profile, ExponentialCore):
        margin = 0.02 * profile.x_right
        return (margin, profile.x_right - margin)
    return None


def force_per_volume(xs: Sequence[float], profile: Profile, c: float = 1.0, mode: RegMode = StandardLifshitz(),
                     quad: QuadratureSpec = QuadratureSpec(), fit_degree: int = 8, workers: Optional[int] = None,
                     outcomes: Optional[list] = None) -> list:
    """``[(x, f)]`` from a degree-``fit_degree`` fit of the converged stresses.

    Points within ``0.02 * x_right`` of an exponential core's interfaces are
    left out of the fit.  Precomputed ``outcomes`` from :func:`stress_profile`
    may be supplied.
    """
    if outcomes is None:
        outcomes = stress_profile(xs, profile, c, mode, quad, workers)
    good = [(x, o.value) for x, o in outcomes if isinstance(o, Converged)]
    deriv = fit_force_density(good, fit_degree, _fit_window(profile))
    return [(float(x), float(deriv(x))) for x in xs]


def three_layer_stress(eps_l: float, eps_c: float, eps_r: float, gap: float, c: float = 1.0,
                       quad: QuadratureSpec = QuadratureSpec(), at: float = 0.5) -> float:
    """``sigma_xx`` inside the gap of a three-layer system, from the layered transfer solution.

    ``at`` is the fractional position in the gap.
    """
    if not gap > 0:
        raise ValueError("gap must be positive")
    if not 0 < at < 1:
        raise ValueError("at must lie strictly inside the gap")
    layers = ThreeLayer(eps_l, eps_c, eps_r, 0.0, gap).as_multilayer()
    out = sigma_xx(at * gap, layers, c, StandardLifshitz(), quad, engine="transfer")
    if not isinstance(out, Converged):
        raise InconclusiveTailError("three-layer gap stress did not converge", {"outcome": out})
    return out.value
