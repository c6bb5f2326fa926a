import itertools
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from casimir1d.greens import (
    GreenSolution,
    Polarization,
    Side,
    TransferSolution,
    green_core_basis,
    green_full,
    green_homogeneous,
    green_multilayer,
    match_interfaces,
    slice_to_multilayer,
)
from casimir1d.medium import (
    DegenerateSpectralPointError,
    ExponentialCore,
    Layer,
    Multilayer,
    SpectralPoint,
    ThreeLayer,
    epsilon_at,
    mu_at,
    named_profile,
)

FIG3 = named_profile("fig3")
POLS = list(Polarization)
SPECTRAL = [SpectralPoint(u, xi) for u, xi in [(0.7, 0.9), (3.0, 0.5), (0.5, 0.0), (0.0, 1.2), (40.0, 0.5), (120.0, 3.0)]]


def weights(pol, profile, x, sp, c=1.0):
    eps, mu = epsilon_at(profile, x), mu_at(profile, x)
    if pol is Polarization.TE:
        return 1.0 / mu, sp.u**2 / mu + eps * sp.xi**2 / c**2
    return 1.0 / eps, sp.u**2 / eps + mu * sp.xi**2 / c**2


def ode_residual(pol, sp, x, xp, profile, h=1e-4):
    """Relative residual of (p g')' - q g from a 4th-order difference of the flux."""
    def flux(z):
        return weights(pol, profile, z, sp)[0] * green_full(pol, sp, z, xp, profile).d_x

    dflux = (-flux(x + 2 * h) + 8 * flux(x + h) - 8 * flux(x - h) + flux(x - 2 * h)) / (12 * h)
    q = weights(pol, profile, x, sp)[1]
    g = green_full(pol, sp, x, xp, profile).value
    return abs(dflux - q * g) / abs(q * g)


@pytest.mark.parametrize("pol", POLS)
@pytest.mark.parametrize("sp", SPECTRAL[:4], ids=str)
def test_ode_residual_away_from_source_and_interfaces(pol, sp):
    xs = [-0.3, -0.05, 0.07, 0.18, 0.33, 0.44, 0.61, 0.9]
    worst = max(ode_residual(pol, sp, x, xp, FIG3) for x, xp in itertools.product(xs, [-0.2, 0.26, 0.7]) if abs(x - xp) > 1e-3)
    assert worst < 1e-6


@pytest.mark.parametrize("pol", POLS)
@pytest.mark.parametrize("sp", SPECTRAL, ids=str)
def test_source_jump_and_reciprocity(pol, sp):
    for xp in (-0.4, 0.0, 0.13, 0.5, 1.1):
        below = green_full(pol, sp, xp, xp, FIG3, side=Side.BELOW)
        above = green_full(pol, sp, xp, xp, FIG3, side=Side.ABOVE)
        assert below.value == above.value
        p = weights(pol, FIG3, xp, sp)[0]
        assert p * (below.d_x - above.d_x) == pytest.approx(1.0, abs=1e-8)
        assert below.coincident and below.side is Side.BELOW
    for x, xp in [(0.1, 0.4), (-0.3, 0.2), (0.45, 0.9), (-1.0, 2.0)]:
        a = green_full(pol, sp, x, xp, FIG3)
        b = green_full(pol, sp, xp, x, FIG3)
        assert a.value == pytest.approx(b.value, rel=1e-8)
        assert a.d_x == pytest.approx(b.d_xp, rel=1e-8)
        assert not a.coincident and a.side is Side.NOT_COINCIDENT


@pytest.mark.parametrize("pol", POLS)
@pytest.mark.parametrize("sp", SPECTRAL, ids=str)
def test_interface_continuity_of_value_and_flux(pol, sp):
    for z, xp in itertools.product((0.0, 0.5), (-0.2, 0.25, 0.8)):
        out = math.nextafter(z, -math.inf if z == 0.0 else math.inf)
        gi, go = green_full(pol, sp, z, xp, FIG3), green_full(pol, sp, out, xp, FIG3)
        assert gi.value == pytest.approx(go.value, rel=1e-9)
        fi = weights(pol, FIG3, z, sp)[0] * gi.d_x
        fo = weights(pol, FIG3, out, sp)[0] * go.d_x
        assert fi == pytest.approx(fo, rel=1e-9)


@pytest.mark.parametrize("pol", POLS)
def test_two_half_spaces_match_reflection_formula(pol):
    e1, e2, mu1, mu2 = 4.0, 1.5, 1.0, 2.0
    ml = Multilayer((Layer(-math.inf, e1, mu1), Layer(0.0, e2, mu2)))
    sp = SpectralPoint(0.8, 1.3)
    w1, w2 = math.sqrt(0.64 + e1 * mu1 * 1.69), math.sqrt(0.64 + e2 * mu2 * 1.69)
    p1, p2 = (1 / mu1, 1 / mu2) if pol is Polarization.TE else (1 / e1, 1 / e2)
    r = (p1 * w1 - p2 * w2) / (p1 * w1 + p2 * w2)
    for x, xp in [(-0.3, -0.1), (-1.0, -0.7), (-0.2, -0.2)]:
        ref = -1 / (2 * p1 * w1) * (math.exp(-w1 * abs(x - xp)) + r * math.exp(w1 * (x + xp)))
        assert green_multilayer(pol, sp, x, xp, ml).value == pytest.approx(ref, rel=1e-13)
        assert green_full(pol, sp, x, xp, ml).value == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize("pol", POLS)
def test_homogeneous_closed_form(pol):
    world = Multilayer((Layer(-math.inf, 2.0, 1.3),))
    sp = SpectralPoint(0.4, 0.9)
    for x, xp, side in [(0.1, 0.6, Side.BELOW), (0.6, 0.1, Side.BELOW), (0.3, 0.3, Side.ABOVE), (0.3, 0.3, Side.BELOW)]:
        a = green_full(pol, sp, x, xp, world, side=side)
        b = green_homogeneous(pol, sp, x, xp, 2.0, 1.3, side=side)
        for f in ("value", "d_x", "d_xp", "d_x_d_xp"):
            assert getattr(a, f) == pytest.approx(getattr(b, f), rel=1e-13)


@pytest.mark.parametrize("pol", POLS)
def test_vanishing_gradient_recovers_bulk(pol):
    flat = ExponentialCore(3.0, 1e-8, 0.5)
    for sp in (SpectralPoint(0.5, 0.5), SpectralPoint(2.0, 0.1)):
        for x, xp in [(0.1, 0.3), (0.25, 0.25), (-0.2, 0.7)]:
            a = green_full(pol, sp, x, xp, flat).value
            b = green_homogeneous(pol, sp, x, xp, 3.0).value
            assert a == pytest.approx(b, rel=1e-6)


@pytest.mark.parametrize("pol", POLS)
@pytest.mark.parametrize("sp", [s for s in SPECTRAL if s.xi > 0 and s.u < 10], ids=str)
def test_explicit_matching_agrees(pol, sp):
    for xs in (-0.2, 0.0, 0.1, 0.3, 0.5, 0.8):
        m = match_interfaces(pol, sp, xs, FIG3)
        for x in (-0.5, 0.0, 0.2, 0.45, 0.5, 0.7):
            if x == xs:
                continue
            g = green_full(pol, sp, x, xs, FIG3)
            v, dv = m.value_at(x)
            assert v == pytest.approx(g.value, rel=1e-9)
            assert dv == pytest.approx(g.d_x, rel=1e-8, abs=1e-12)


def test_matching_rejects_zero_frequency_and_stacks():
    with pytest.raises(DegenerateSpectralPointError):
        match_interfaces(Polarization.TE, SpectralPoint(1.0, 0.0), 0.2, FIG3)
    with pytest.raises(TypeError):
        match_interfaces(Polarization.TE, SpectralPoint(1.0, 1.0), 0.2, ThreeLayer(1, 2, 3, 0, 1))


@pytest.mark.parametrize("pol", POLS)
def test_transfer_route_equals_riccati_route_on_stacks(pol):
    ml = Multilayer((Layer(-math.inf, 3.0), Layer(0.0, 2.0, 1.5), Layer(0.4, 5.0), Layer(1.0, 1.2, 0.7), Layer(1.3, 2.0)))
    for u, xi in [(0.7, 0.9), (3.0, 0.5), (0.5, 0.0), (0.0, 1.2), (40.0, 0.5)]:
        sp = SpectralPoint(u, xi)
        for x, xp in itertools.product([-0.5, 0.0, 0.4, 0.9, 1.3, 2.0], repeat=2):
            for side in (Side.BELOW, Side.ABOVE):
                a = green_multilayer(pol, sp, x, xp, ml, side=side)
                b = green_full(pol, sp, x, xp, ml, side=side)
                for f in ("value", "d_x", "d_xp", "d_x_d_xp"):
                    va, vb = getattr(a, f), getattr(b, f)
                    assert abs(va - vb) <= 1e-10 * max(abs(va), abs(vb), 1e-300)


def mp_green(pol, u, xi, x, xp, eps_left=3.0, b=1.0, x_right=0.5, dps=30):
    """g(x, x') for x, x' in the core from mpmath Bessel functions and numeric differentiation."""
    with mp.workdps(dps):
        u, xi, b, el = (mp.mpf(v) for v in (u, xi, b, eps_left))
        s = lambda z: 2 * xi * mp.sqrt(el) * mp.e ** (-b * z / 2) / b
        eps = lambda z: el * mp.e ** (-b * z)
        if pol is Polarization.TE:
            nu = 2 * u / b
            f1, f2 = (lambda z: mp.besseli(nu, s(z))), (lambda z: mp.besselk(nu, s(z)))
            p = lambda z: mp.mpf(1)
        else:
            nu = mp.sqrt(1 + 4 * u**2 / b**2)
            f1, f2 = (lambda z: s(z) * mp.besseli(nu, s(z))), (lambda z: s(z) * mp.besselk(nu, s(z)))
            p = lambda z: 1 / eps(z)
        w = lambda z: mp.sqrt(u**2 + eps(z) * xi**2)
        xr = mp.mpf(x_right)
        a = -(mp.diff(f2, 0) - w(0) * f2(0)) / (mp.diff(f1, 0) - w(0) * f1(0))
        left = lambda z: f2(z) + a * f1(z)
        c = -(mp.diff(f1, xr) + w(xr) * f1(xr)) / (mp.diff(f2, xr) + w(xr) * f2(xr))
        right = lambda z: f1(z) + c * f2(z)
        lo, hi = min(x, xp), max(x, xp)
        wr = p(hi) * (left(hi) * mp.diff(right, hi) - mp.diff(left, hi) * right(hi))
        return float(left(lo) * right(hi) / wr)


@pytest.mark.parametrize("pol", POLS)
@pytest.mark.parametrize("u,xi", [(0.5, 0.5), (4.0, 0.2), (0.1, 3.0)])
def test_core_green_matches_mpmath(pol, u, xi):
    for x, xp in [(0.1, 0.3), (0.25, 0.25), (0.45, 0.05)]:
        ref = mp_green(pol, u, xi, x, xp)
        assert green_full(pol, SpectralPoint(u, xi), x, xp, FIG3).value == pytest.approx(ref, rel=1e-10)


def test_core_basis_satisfies_equation():
    sp = SpectralPoint(1.3, 0.8)
    for pol in POLS:
        for x in (0.1, 0.3):
            h = 1e-4
            for which in ("f1", "f2"):
                def flux(z):
                    bz = green_core_basis(pol, sp, z, FIG3)
                    return weights(pol, FIG3, z, sp)[0] * getattr(bz, "d" + which)
                d = (flux(x + h) - flux(x - h)) / (2 * h)
                val = getattr(green_core_basis(pol, sp, x, FIG3), which)
                assert d == pytest.approx(weights(pol, FIG3, x, sp)[1] * val, rel=1e-6)
    with pytest.raises(ValueError):
        green_core_basis(Polarization.TE, sp, -0.1, FIG3)


def test_zero_frequency_is_continuous_limit():
    for pol in POLS:
        a = green_full(pol, SpectralPoint(0.8, 0.0), 0.1, 0.35, FIG3).value
        b = green_full(pol, SpectralPoint(0.8, 1e-7), 0.1, 0.35, FIG3).value
        assert a == pytest.approx(b, rel=1e-9)


def test_speed_of_light_rescales_frequency():
    for pol in POLS:
        a = green_full(pol, SpectralPoint(0.6, 0.8), 0.1, 0.3, FIG3, c=2.0).value
        b = green_full(pol, SpectralPoint(0.6, 0.4), 0.1, 0.3, FIG3).value
        assert a == pytest.approx(b, rel=1e-13)


def test_vectorised_solution_matches_pointwise():
    us = np.array([[0.3, 2.0, 9.0]])
    xis = np.array([[0.2], [1.5]])
    for pol in POLS:
        for cls in (GreenSolution, TransferSolution):
            prof = FIG3 if cls is GreenSolution else slice_to_multilayer(FIG3, 8)
            sol = cls(pol, prof, us, xis)
            val = sol.evaluate(0.1, 0.3)[0]
            assert val.shape == (2, 3)
            for r, k in itertools.product(range(2), range(3)):
                one = cls(pol, prof, us[0, k], xis[r, 0]).evaluate(0.1, 0.3)[0]
                assert float(val[r, k]) == pytest.approx(float(one), rel=1e-13)


def test_degenerate_point_rejected():
    for call in (lambda: green_full(Polarization.TE, SpectralPoint(0, 0), 0, 1, FIG3),
                 lambda: green_multilayer(Polarization.TE, SpectralPoint(0, 0), 0, 1, slice_to_multilayer(FIG3, 4)),
                 lambda: GreenSolution(Polarization.TM, FIG3, np.array([1.0, 0.0]), 0.0)):
        with pytest.raises(DegenerateSpectralPointError):
            call()


def test_staircase_converges_quadratically():
    sp = SpectralPoint(0.5, 0.5)
    exact = green_full(Polarization.TM, sp, 0.1, 0.3, FIG3).value
    errs = [abs(green_multilayer(Polarization.TM, sp, 0.1, 0.3, slice_to_multilayer(FIG3, n)).value - exact) for n in (50, 100, 200, 400)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    for a, b in zip(errs, errs[1:]):
        assert a / b == pytest.approx(4.0, rel=0.1)
    with pytest.raises(ValueError):
        slice_to_multilayer(FIG3, 0)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(POLS), st.floats(0.01, 30.0), st.floats(0.0, 30.0), st.floats(-1.0, 1.5), st.floats(-1.0, 1.5))
def test_reciprocity_property(pol, u, xi, x, xp):
    sp = SpectralPoint(u, xi)
    a = green_full(pol, sp, x, xp, FIG3)
    b = green_full(pol, sp, xp, x, FIG3)
    assert a.value == pytest.approx(b.value, rel=1e-8, abs=1e-300)
    assert a.value < 0  # the imaginary-frequency Green function is negative definite


@pytest.mark.parametrize("xi", [5e-324, 1e-300, 1e-30])
def test_negligible_frequency_equals_zero_frequency(xi):
    for pol in POLS:
        for x in (0.0, 0.3):
            a = green_full(pol, SpectralPoint(25.0, xi), x, 0.3, FIG3)
            b = green_full(pol, SpectralPoint(25.0, 0.0), x, 0.3, FIG3)
            assert a.value == b.value and a.d_x == b.d_x
