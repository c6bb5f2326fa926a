import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from casimir1d import regular
from casimir1d.greens import Polarization, Side, green_full, green_homogeneous
from casimir1d.medium import (
    ExponentialCore,
    Layer,
    Multilayer,
    SpectralPoint,
    ThreeLayer,
    epsilon_at,
    named_profile,
    w_local,
)
from casimir1d.regular import (
    HardCutoff,
    KinkRemovalError,
    StandardLifshitz,
    WkbLocal,
    g0_wkb,
    parse_reg_mode,
    regularize_at,
    subtraction_of,
    u_limit,
    wkb_log_coefficient,
    wkb_phase,
    wkb_tail_integral,
    wkb_tail_kernel,
    wkb_tail_onset,
)
from casimir1d.stress import integrand_grid, integrand_sigma_xx

FIG3 = named_profile("fig3")
POLS = list(Polarization)
MODES = [StandardLifshitz(), WkbLocal()]


def naive_integrand(x, sp, profile, subtract):
    """Stress integrand formed directly from Green-function differences (cancellation-prone)."""
    total = 0.0
    eps = epsilon_at(profile, x)
    for pol in POLS:
        m = 1.0 if pol is Polarization.TE else eps
        w = math.sqrt(sp.u**2 + eps * sp.xi**2)
        g = green_full(pol, sp, x, x, profile)
        g0 = subtract(pol, sp, x)
        total += (w * w * (g.value - g0.value) - (g.d_x_d_xp - g0.d_x_d_xp)) / m
    return sp.u * total


def test_mode_helpers():
    assert subtraction_of(StandardLifshitz()) == "standard"
    assert subtraction_of(WkbLocal()) == "wkb"
    assert subtraction_of(HardCutoff(10.0)) == "standard"
    assert subtraction_of(HardCutoff(10.0, WkbLocal())) == "wkb"
    assert subtraction_of(HardCutoff(10.0, None)) is None
    assert u_limit(HardCutoff(7.0)) == 7.0 and u_limit(WkbLocal()) == math.inf
    assert parse_reg_mode("WKB") == WkbLocal()
    assert parse_reg_mode("none", 5) == HardCutoff(5.0, None)
    assert parse_reg_mode("standard", 3) == HardCutoff(3.0, StandardLifshitz())
    for bad in (lambda: parse_reg_mode("none"), lambda: parse_reg_mode("bogus"), lambda: HardCutoff(0.0),
                lambda: HardCutoff(math.inf), lambda: HardCutoff(1.0, HardCutoff(2.0))):
        with pytest.raises(ValueError):
            bad()
    with pytest.raises(TypeError):
        subtraction_of("standard")


@pytest.mark.parametrize("x,xp", [(0.1, 0.4), (-0.3, 0.2), (0.45, 1.2), (-1.0, 2.0), (0.2, 0.2)])
@pytest.mark.parametrize("sp", [SpectralPoint(0.5, 0.7), SpectralPoint(3.0, 0.0), SpectralPoint(0.0, 2.0)], ids=str)
def test_phase_matches_quadrature(x, xp, sp):
    lo, hi = sorted((x, xp))
    ref, _ = quad(lambda z: w_local(FIG3, z, sp), lo, hi, points=[p for p in (0.0, 0.5) if lo < p < hi], epsabs=1e-14, epsrel=1e-13)
    assert wkb_phase(x, xp, sp, FIG3) == pytest.approx(ref, rel=1e-11, abs=1e-15)
    assert wkb_phase(x, xp, sp, FIG3) == wkb_phase(xp, x, sp, FIG3)


def test_phase_on_stacks():
    ml = Multilayer((Layer(-math.inf, 3.0), Layer(0.0, 2.0, 2.0), Layer(1.0, 1.0)))
    sp = SpectralPoint(0.3, 1.0)
    expect = 0.5 * math.sqrt(0.09 + 3.0) + 1.0 * math.sqrt(0.09 + 4.0) + 0.5 * math.sqrt(0.09 + 1.0)
    assert wkb_phase(-0.5, 1.5, sp, ml) == pytest.approx(expect, rel=1e-14)
    tl = ThreeLayer(3.0, 2.0, 1.0, 0.0, 1.0)
    assert wkb_phase(-0.5, 1.5, sp, tl) == pytest.approx(0.5 * math.sqrt(3.09) + math.sqrt(2.09) + 0.5 * math.sqrt(1.09), rel=1e-14)


@pytest.mark.parametrize("pol", POLS)
def test_wkb_function_is_bulk_in_constant_medium(pol):
    world = Multilayer((Layer(-math.inf, 2.5),))
    sp = SpectralPoint(0.9, 0.6)
    for x, xp, side in [(0.0, 1.0, Side.BELOW), (1.0, 0.0, Side.BELOW), (0.5, 0.5, Side.ABOVE), (0.5, 0.5, Side.BELOW)]:
        a = g0_wkb(pol, sp, x, xp, world, side=side)
        b = green_homogeneous(pol, sp, x, xp, 2.5, side=side)
        for f in ("value", "d_x", "d_xp", "d_x_d_xp"):
            assert getattr(a, f) == pytest.approx(getattr(b, f), rel=1e-14)


@pytest.mark.parametrize("pol", POLS)
def test_wkb_partials_match_differences(pol):
    sp = SpectralPoint(1.1, 0.8)
    h = 1e-5
    for x, xp in [(0.1, 0.35), (0.4, 0.15)]:
        g = g0_wkb(pol, sp, x, xp, FIG3)
        dx = (g0_wkb(pol, sp, x + h, xp, FIG3).value - g0_wkb(pol, sp, x - h, xp, FIG3).value) / (2 * h)
        dxp = (g0_wkb(pol, sp, x, xp + h, FIG3).value - g0_wkb(pol, sp, x, xp - h, FIG3).value) / (2 * h)
        mixed = (g0_wkb(pol, sp, x + h, xp + h, FIG3).value - g0_wkb(pol, sp, x + h, xp - h, FIG3).value
                 - g0_wkb(pol, sp, x - h, xp + h, FIG3).value + g0_wkb(pol, sp, x - h, xp - h, FIG3).value) / (4 * h * h)
        assert g.d_x == pytest.approx(dx, rel=1e-8)
        assert g.d_xp == pytest.approx(dxp, rel=1e-8)
        assert g.d_x_d_xp == pytest.approx(mixed, rel=1e-5)


@pytest.mark.parametrize("pol", POLS)
def test_wkb_function_approaches_exact_deep_inside(pol):
    # relative error of the WKB approximation shrinks as u grows
    errs = []
    for u in (1.0, 5.0, 20.0, 80.0):
        sp = SpectralPoint(u, 0.5)
        exact = green_full(pol, sp, 0.2, 0.3, FIG3).value
        errs.append(abs(g0_wkb(pol, sp, 0.2, 0.3, FIG3).value / exact - 1.0))
    assert all(b < a for a, b in zip(errs, errs[1:]))
    # the leading miss is of order b^2 |x - x'| / (8 u) (TM), smaller for TE
    assert errs[-1] < FIG3.b**2 * 0.1 / (4 * 80.0)


@pytest.mark.parametrize("mode", MODES, ids=str)
@pytest.mark.parametrize("sp", [SpectralPoint(0.6, 0.4), SpectralPoint(5.0, 1.0), SpectralPoint(2.0, 0.0)], ids=str)
def test_cancellation_free_route_matches_naive_route(mode, sp):
    def sub(pol, spx, x):
        if isinstance(mode, WkbLocal):
            return g0_wkb(pol, spx, x, x, FIG3)
        return green_homogeneous(pol, spx, x, x, epsilon_at(FIG3, x))

    for x in (-0.3, 0.0, 0.1, 0.25, 0.5, 0.8):
        fast = integrand_sigma_xx(x, sp, FIG3, mode=mode)
        slow = naive_integrand(x, sp, FIG3, sub)
        assert fast == pytest.approx(slow, rel=1e-8, abs=1e-12)


@pytest.mark.parametrize("pol", POLS)
def test_regularized_value_and_mixed(pol):
    sp = SpectralPoint(1.5, 0.7)
    for x in (0.1, 0.37):
        eps = epsilon_at(FIG3, x)
        r = regularize_at(pol, x, sp, FIG3)
        g = green_full(pol, sp, x, x, FIG3)
        g0 = green_homogeneous(pol, sp, x, x, eps)
        assert r.value == pytest.approx(g.value - g0.value, rel=1e-9)
        assert r.mixed == pytest.approx(g.d_x_d_xp - g0.d_x_d_xp, rel=1e-8)
        rw = regularize_at(pol, x, sp, FIG3, mode=WkbLocal())
        gw = g0_wkb(pol, sp, x, x, FIG3)
        assert rw.mixed == pytest.approx(g.d_x_d_xp - gw.d_x_d_xp, rel=1e-8)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(POLS), st.sampled_from(MODES), st.floats(-0.5, 1.0), st.floats(0.01, 200.0), st.floats(0.0, 50.0))
def test_kink_is_removed(pol, mode, x, u, xi):
    r = regularize_at(pol, x, SpectralPoint(u, xi), FIG3, mode=mode)
    assert r.side_spread <= regular.SIDE_TOL * max(1.0, abs(r.mixed))


def test_kink_check_raises_when_tolerance_is_impossible(monkeypatch):
    monkeypatch.setattr(regular, "SIDE_TOL", -1.0)
    with pytest.raises(KinkRemovalError):
        regularize_at(Polarization.TE, 0.2, SpectralPoint(1.0, 1.0), FIG3)
    regularize_at(Polarization.TE, 0.2, SpectralPoint(1.0, 1.0), FIG3, check=False)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.5, 5.0), st.floats(0.5, 2.0), st.floats(-3.0, 3.0), st.floats(0.01, 100.0), st.floats(0.0, 100.0),
       st.sampled_from(MODES))
def test_constant_medium_is_annihilated(eps, mu, x, u, xi, mode):
    world = Multilayer((Layer(-math.inf, eps, mu),))
    for pol in POLS:
        r = regularize_at(pol, x, SpectralPoint(u, xi), world, mode=mode)
        assert abs(r.value) < 1e-12 and abs(r.mixed) < 1e-12
    assert abs(integrand_sigma_xx(x, SpectralPoint(u, xi), world, mode=mode)) < 1e-12


def test_modes_agree_in_half_spaces():
    for x in (-2.0, -0.5, -1e-9, 0.5 + 1e-9, 1.0, 3.0):
        for u, xi in [(0.1, 0.1), (1.0, 3.0), (30.0, 0.5), (2.0, 0.0)]:
            sp = SpectralPoint(u, xi)
            a = integrand_sigma_xx(x, sp, FIG3, mode=StandardLifshitz())
            b = integrand_sigma_xx(x, sp, FIG3, mode=WkbLocal())
            assert abs(a - b) < 1e-9


def test_standard_subtraction_leaves_gradient_plateau():
    # inside the core the standard kernel tends to b^2/8 at large u
    vals = integrand_grid(0.25, np.array([400.0, 800.0, 1600.0]), 0.5, FIG3)
    assert np.allclose(vals, FIG3.b**2 / 8, rtol=1e-3)
    b2 = ExponentialCore(3.0, 2.0, 0.5)
    assert float(integrand_grid(0.25, 1600.0, 0.5, b2)) == pytest.approx(0.5, rel=1e-3)


def test_wkb_subtraction_leaves_corner_plateau():
    for x in (0.0, 0.5):
        vals = integrand_grid(x, np.array([400.0, 800.0, 1600.0]), 0.5, FIG3, subtraction="wkb")
        assert np.allclose(vals, -FIG3.b**2 / 8, rtol=1e-3)


def test_unsubtracted_kernel_grows():
    vals = integrand_grid(0.25, np.array([10.0, 20.0, 40.0]), 0.5, FIG3, subtraction=None)
    # the bulk part is w^2 - ... ~ u^2 per polarization
    assert vals[2] / vals[1] == pytest.approx(4.0, rel=0.05)


def mp_wkb_integrand(x, u, xi, b=1.0, eps_left=3.0, x_right=0.5, dps=50):
    """WKB-subtracted integrand from mpmath Bessel solutions and mpmath differentiation."""
    with mp.workdps(dps):
        x, u, xi, b, el, xr = (mp.mpf(v) for v in (x, u, xi, b, eps_left, x_right))
        eps = lambda z: el * mp.e ** (-b * z)
        s = lambda z: 2 * xi * mp.sqrt(el) * mp.e ** (-b * z / 2) / b
        w = lambda z: mp.sqrt(u**2 + eps(z) * xi**2)
        tot = 0
        for te in (True, False):
            if te:
                nu = 2 * u / b
                f1, f2 = (lambda z: mp.besseli(nu, s(z))), (lambda z: mp.besselk(nu, s(z)))
            else:
                nu = mp.sqrt(1 + 4 * u**2 / b**2)
                f1, f2 = (lambda z: s(z) * mp.besseli(nu, s(z))), (lambda z: s(z) * mp.besselk(nu, s(z)))
            d = lambda f, z: mp.diff(f, z)
            a = -(d(f2, 0) - w(0) * f2(0)) / (d(f1, 0) - w(0) * f1(0))
            left = (d(f2, x) + a * d(f1, x)) / (f2(x) + a * f1(x))
            c = -(d(f1, xr) + w(xr) * f1(xr)) / (d(f2, xr) + w(xr) * f2(xr))
            right = (d(f1, x) + c * d(f2, x)) / (f1(x) + c * f2(x))
            wx = w(x)
            k = (wx**2 - left * right) / (right - left) + wx
            de = -b * eps(x)
            slope = ((0 if te else de / eps(x)) - de * xi**2 / (2 * wx * wx)) / 2
            tot += k - slope**2 / (2 * wx)
        return float(u * tot)


@pytest.mark.parametrize("u,xi", [(0.7, 0.5), (30.0, 0.5), (300.0, 16.0)])
def test_wkb_integrand_matches_mpmath(u, xi):
    ref = mp_wkb_integrand(0.25, u, xi)
    assert float(integrand_grid(0.25, u, xi, FIG3, subtraction="wkb")) == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("x", [0.05, 0.25, 0.45])
def test_tail_form_matches_kernel(x):
    u_c = wkb_tail_onset(x, FIG3)
    for xi in (0.5, 40.0, 900.0):
        num = float(integrand_grid(x, u_c, xi, FIG3, subtraction="wkb"))
        asym = float(wkb_tail_kernel(x, u_c, xi, FIG3))
        assert num == pytest.approx(asym, rel=2e-3, abs=1e-15)


def test_tail_integral_is_integral_of_tail_kernel():
    for xi in (0.0, 0.5, 50.0):
        ref, _ = quad(lambda u: float(wkb_tail_kernel(0.3, u, xi, FIG3)), 1000.0, np.inf, epsrel=1e-12, epsabs=0)
        assert float(wkb_tail_integral(0.3, 1000.0, xi, FIG3)) == pytest.approx(ref, rel=1e-9)


def test_tail_polarization_split_and_domain():
    te = wkb_tail_kernel(0.2, 500.0, 3.0, FIG3, pol=Polarization.TE)
    tm = wkb_tail_kernel(0.2, 500.0, 3.0, FIG3, pol=Polarization.TM)
    assert float(te + tm) == pytest.approx(float(wkb_tail_kernel(0.2, 500.0, 3.0, FIG3)), rel=1e-14)
    # at zero frequency only the TM part survives: -48 b^4 / (2048 u^2)
    assert float(wkb_tail_kernel(0.2, 500.0, 0.0, FIG3)) == pytest.approx(-3 / (128 * 500.0**2), rel=1e-14)
    for bad in (0.0, 0.5, -1.0):
        with pytest.raises(ValueError):
            wkb_tail_kernel(bad, 1.0, 1.0, FIG3)
        with pytest.raises(ValueError):
            wkb_tail_integral(bad, 1.0, 1.0, FIG3)


def test_log_coefficient_value_and_support():
    # -217 b^4 c / (15360 sqrt(eps(x)))
    for x in (0.02, 0.25):
        expect = -217.0 / (15360.0 * math.sqrt(epsilon_at(FIG3, x)))
        assert wkb_log_coefficient(x, FIG3) == pytest.approx(expect, rel=1e-14)
    assert wkb_log_coefficient(0.25, FIG3, c=2.0) == pytest.approx(2 * wkb_log_coefficient(0.25, FIG3), rel=1e-14)
    for x in (-0.1, 0.0, 0.5, 1.0):
        assert wkb_log_coefficient(x, FIG3) == 0.0
    assert wkb_log_coefficient(0.5, ThreeLayer(3, 2, 1, 0, 1)) == 0.0


def test_log_coefficient_matches_numeric_u_integral():
    # xi * int_0^inf integrand du at large xi, by plain adaptive quadrature of the exact kernel
    x = 0.25
    xi = 4096.0
    u_c = 60000.0
    head, _ = quad(lambda u: float(integrand_grid(x, u, xi, FIG3, subtraction="wkb")), 0.0, u_c, limit=400,
                   points=[xi], epsrel=1e-9, epsabs=0)
    total = xi * (head + float(wkb_tail_integral(x, u_c, xi, FIG3)))
    assert total == pytest.approx(wkb_log_coefficient(x, FIG3), rel=2e-3)
