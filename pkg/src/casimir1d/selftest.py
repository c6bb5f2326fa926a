"""Reduced-size invariant checks, runnable from the command line.

Each suite returns a list of ``(check name, passed, detail)`` triples.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .greens import Polarization, Side, green_full, green_homogeneous, green_multilayer, slice_to_multilayer
from .medium import ExponentialCore, Layer, Multilayer, SpectralPoint, epsilon_at, named_profile, w_local
from .regular import StandardLifshitz, WkbLocal, regularize_at
from .specfun import bessel_iv_scaled, bessel_kv_scaled, bessel_pair
from .stress import Converged, DivergentTail, QuadratureSpec, integrand_sigma_xx, sigma_xx, three_layer_stress

FIG3 = named_profile("fig3")
_SPECTRAL = [SpectralPoint(0.5, 0.5), SpectralPoint(2.0, 0.3), SpectralPoint(0.1, 1.5), SpectralPoint(5.0, 0.0)]


def _check(name, ok, detail) -> tuple:
    return (name, bool(ok), detail)


def suite_bessel(rng) -> list:
    nus = rng.uniform(0.0, 100.0, 200)
    ss = 10.0 ** rng.uniform(-2.0, 3.0, 200)
    worst = max(abs(bessel_pair(n, s).wronskian * s + 1.0) for n, s in zip(nus, ss))
    half = max(
        abs(bessel_iv_scaled(0.5, s) / (math.sqrt(2 / (math.pi * s)) * math.sinh(s) * math.exp(-s)) - 1.0)
        for s in (0.1, 1.0, 2.0, 10.0)
    )
    half = max(half, max(abs(bessel_kv_scaled(0.5, s) / math.sqrt(math.pi / (2 * s)) - 1.0) for s in (0.1, 2.0, 50.0)))
    grid = np.linspace(0.0, 20.0, 41)
    mono = all(np.all(np.diff([bessel_kv_scaled(n, 3.0) for n in grid]) > 0)
               and np.all(np.diff([bessel_iv_scaled(n, 3.0) for n in grid]) < 0) for _ in (0,))
    return [
        _check("wronskian", worst < 1e-10, {"max_rel": worst}),
        _check("half_integer", half < 1e-12, {"max_rel": half}),
        _check("order_monotonicity", mono, {}),
    ]


def suite_medium(rng) -> list:
    cont = epsilon_at(FIG3, 0.0) == epsilon_at(FIG3, -0.0) and abs(epsilon_at(FIG3, 0.5) - FIG3.eps_right) == 0.0
    stack = slice_to_multilayer(FIG3, 16)
    mids = [FIG3.x_right * (k + 0.5) / 16 for k in range(16)]
    mid_ok = all(epsilon_at(stack, m) == epsilon_at(FIG3, m) for m in mids)
    us = np.linspace(0, 5, 11)
    w_ok = all(np.all(np.diff([w_local(FIG3, x, SpectralPoint(u, 0.7)) for u in us]) >= 0) for x in (-1, 0.25, 1))
    return [
        _check("continuity", cont, {}),
        _check("staircase_midpoints", mid_ok, {}),
        _check("w_monotone", w_ok, {}),
    ]


def suite_greens(rng) -> list:
    recip = 0.0
    jump = 0.0
    cont = 0.0
    for sp in _SPECTRAL[:3]:
        for pol in Polarization:
            a = green_full(pol, sp, 0.1, 0.4, FIG3).value
            b = green_full(pol, sp, 0.4, 0.1, FIG3).value
            recip = max(recip, abs(a - b) / abs(a))
            below = green_full(pol, sp, 0.25, 0.25, FIG3, side=Side.BELOW)
            above = green_full(pol, sp, 0.25, 0.25, FIG3, side=Side.ABOVE)
            p = 1.0 if pol is Polarization.TE else 1.0 / epsilon_at(FIG3, 0.25)
            jump = max(jump, abs(p * (below.d_x - above.d_x) - 1.0))
            for z in (0.0, FIG3.x_right):
                inside = green_full(pol, sp, z, 0.25, FIG3).value
                outside = green_full(pol, sp, math.nextafter(z, -math.inf if z == 0 else math.inf), 0.25, FIG3).value
                cont = max(cont, abs(inside - outside) / abs(inside))
    return [
        _check("reciprocity", recip < 1e-8, {"max_rel": recip}),
        _check("source_jump", jump < 1e-8, {"max_abs": jump}),
        _check("interface_continuity", cont < 1e-9, {"max_rel": cont}),
    ]


def suite_regular(rng) -> list:
    world = Multilayer((Layer(-math.inf, 2.0),))
    zero = 0.0
    for _ in range(10):
        x = rng.uniform(-2, 2)
        sp = SpectralPoint(rng.uniform(0.01, 5), rng.uniform(0, 5))
        for pol in Polarization:
            for mode in (StandardLifshitz(), WkbLocal()):
                r = regularize_at(pol, x, sp, world, mode=mode)
                zero = max(zero, abs(r.value), abs(r.mixed))
    agree = max(
        abs(integrand_sigma_xx(x, sp, FIG3, mode=StandardLifshitz()) - integrand_sigma_xx(x, sp, FIG3, mode=WkbLocal()))
        for x in (-1.0, -0.3, 0.7, 1.5)
        for sp in _SPECTRAL
    )
    spread = max(
        regularize_at(pol, x, sp, FIG3, mode=WkbLocal()).side_spread
        for x in (0.1, 0.3)
        for sp in _SPECTRAL[:3]
        for pol in Polarization
    )
    return [
        _check("homogeneous_annihilation", zero < 1e-12, {"max_abs": zero}),
        _check("half_space_mode_agreement", agree < 1e-9, {"max_abs": agree}),
        _check("kink_removal", spread < 1e-7, {"max_spread": spread}),
    ]


def suite_stress(rng) -> list:
    quad = QuadratureSpec(rel_tol=1e-4, abs_tol=1e-8)
    zeros = [sigma_xx(x, FIG3, 1.0, StandardLifshitz(), quad) for x in (-1.0, 1.0)]
    zero_ok = all(isinstance(o, Converged) and abs(o.value) < 1e-8 for o in zeros)
    tail = sigma_xx(0.25, FIG3, 1.0, StandardLifshitz(), quad)
    gaps = [three_layer_stress(3.0, 2.0, 1.5, 1.0, quad=quad, at=a) for a in (0.2, 0.5, 0.8)]
    spread = (max(gaps) - min(gaps)) / abs(np.mean(gaps))
    return [
        _check("half_space_zero", zero_ok, {"values": [getattr(o, "value", None) for o in zeros]}),
        _check("standard_interior_tail", isinstance(tail, DivergentTail) and tail.axis == "u",
               {"plateau": getattr(tail, "plateau", None)}),
        _check("gap_constancy", spread < 1e-6, {"spread": spread}),
    ]


def suite_oracle(rng, layers: int = 500) -> list:
    errs = []
    for sp in (SpectralPoint(0.5, 0.5), SpectralPoint(2.0, 1.0)):
        stack = slice_to_multilayer(FIG3, layers)
        for pol in Polarization:
            for x, xp in ((0.1, 0.3), (0.37, 0.21)):
                exact = green_full(pol, sp, x, xp, FIG3).value
                approx = green_multilayer(pol, sp, x, xp, stack).value
                errs.append(abs(approx - exact) / abs(exact))
    # staircase error falls like 1/N^2; allow a generous constant
    bound = 40.0 / layers**2
    return [_check("staircase_vs_analytic", max(errs) < bound, {"layers": layers, "max_rel": max(errs), "bound": bound})]


SUITES: dict[str, Callable] = {
    "bessel": suite_bessel,
    "medium": suite_medium,
    "greens": suite_greens,
    "regular": suite_regular,
    "stress": suite_stress,
    "oracle": suite_oracle,
}


def run(suites=None, layers: int = 500, seed: int = 20240601) -> dict:
    """Run the named suites (all by default) and return a JSON-ready report."""
    names = list(SUITES) if not suites else list(suites)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}")
    report = {"suites": {}, "passed": True}
    for name in names:
        rng = np.random.default_rng(seed)
        try:
            checks = SUITES[name](rng, layers) if name == "oracle" else SUITES[name](rng)
            entries = [{"check": c, "passed": ok, "detail": d} for c, ok, d in checks]
            passed = all(e["passed"] for e in entries)
        except Exception as exc:  # a crashing suite is a failed suite, not a crashed run
            entries = [{"check": "run", "passed": False, "detail": {"error": repr(exc)}}]
            passed = False
        report["suites"][name] = {"passed": passed, "checks": entries}
        report["passed"] = report["passed"] and passed
    return report
