import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tclsim.rates import (QuadratureError, RateFunction, RateKind, bath_kernel_quadrature, cross_rate,
                          lorentzian_fourier, rate_closed_form, rate_quadrature)
from tclsim.spectral import SpectralDensity


# --- closed form --------------------------------------------------------------

def test_closed_form_examples():
    assert rate_closed_form(0.0, 0.2, 0.1) == 0.0
    assert rate_closed_form(1e6, 0.2, 0.1) == pytest.approx(0.2, rel=1e-15)
    assert rate_closed_form(10.0, 0.2, 0.1) == pytest.approx(0.2 * (1 - math.exp(-1)), rel=1e-14)
    assert rate_closed_form(10.0, 1.0, 0.1) / 1.0 == pytest.approx(0.6321, abs=1e-4)


def test_closed_form_rejects_negative_time():
    with pytest.raises(ValueError):
        rate_closed_form(-1.0, 0.2, 0.1)


def test_closed_form_vectorized():
    t = np.array([0.0, 1.0, 10.0])
    np.testing.assert_allclose(rate_closed_form(t, 0.3, 0.2), 0.3 * -np.expm1(-0.2 * t), rtol=1e-15)


@given(st.floats(1e-4, 1.0), st.floats(1e-3, 1e3))
def test_markovian_limit_of_closed_form(gamma, t_scaled):
    kappa = 1e3 * gamma
    t = 10 / kappa + t_scaled / gamma
    assert abs(rate_closed_form(t, gamma, kappa) - gamma) < 1e-3 * gamma


@given(st.floats(1e-4, 1.0), st.floats(1e-4, 1.0), st.floats(0, 1e4), st.floats(0, 1e4))
def test_closed_form_monotone_and_bounded(gamma, kappa, t1, t2):
    lo, hi = sorted((t1, t2))
    a, b = rate_closed_form(lo, gamma, kappa), rate_closed_form(hi, gamma, kappa)
    assert 0 <= a <= b <= gamma


# --- contour identity -----------------------------------------------------------

def test_fourier_examples():
    J = SpectralDensity.lorentzian(0.4, 0.05, 1.7)
    assert lorentzian_fourier(0.0, J) == pytest.approx(1.7)
    assert lorentzian_fourier(20.0, J) == pytest.approx(1.7 / math.e)
    assert lorentzian_fourier(60.0, J) == lorentzian_fourier(-60.0, J)


@pytest.mark.parametrize("tau_k", [0.0, 1.0, -1.0, 3.0, -3.0])
def test_fourier_matches_numeric_integral(tau_k):
    J = SpectralDensity.lorentzian(0.4, 0.05, 1.7)
    tau = tau_k / J.width_kappa
    num = bath_kernel_quadrature(tau, J, J.center_omega0)
    exact = lorentzian_fourier(tau, J)
    assert abs(num - exact) <= 1e-6 * abs(exact)


def test_near_delta_density_kernel_returns_norm():
    gamma = 0.01
    J = SpectralDensity.lorentzian(0.0, 1e-9 * gamma, gamma * 1e-9 * gamma)
    tau = 5.0
    assert abs(bath_kernel_quadrature(tau, J, 0.0) - J.norm_N) <= 1e-8 * J.norm_N


# --- quadrature rate --------------------------------------------------------------

def test_quadrature_at_zero_time_is_zero():
    J = SpectralDensity.lorentzian(0.0, 0.1, 0.01)
    assert rate_quadrature(0.0, J, 0.0) == 0j


def test_quadrature_resonant_matches_closed_form():
    gamma, kappa = 0.03, 0.02
    J = SpectralDensity.lorentzian(1.0, kappa, gamma * kappa)
    for t in (1.0, 50.0, 400.0):
        g = rate_quadrature(t, J, 1.0, tol=1e-9)
        assert g.real == pytest.approx(rate_closed_form(t, gamma, kappa), abs=1e-9 * gamma)
        assert abs(g.imag) < 1e-9 * gamma


def test_quadrature_detuned_matches_closed_form():
    gamma, kappa, det = 0.03, 0.02, 0.05
    rate = RateFunction.closed_form(gamma, kappa, 1.0, detuning=det)
    for t in (3.0, 30.0, 300.0):
        assert rate_quadrature(t, rate.spectral_density(), 1.0, tol=1e-9) == pytest.approx(
            rate.complex_rate(t), abs=1e-8 * gamma)


def test_quadrature_rejects_bad_tol_and_time():
    J = SpectralDensity.lorentzian(0.0, 0.1, 0.01)
    with pytest.raises(ValueError):
        rate_quadrature(1.0, J, 0.0, tol=0.5)
    with pytest.raises(ValueError):
        rate_quadrature(-1.0, J, 0.0)


def test_quadrature_flat_density_is_markovian():
    J = SpectralDensity.flat(0.2)
    assert rate_quadrature(5.0, J, 0.0).real == pytest.approx(0.2)


def test_quadrature_error_type():
    assert issubclass(QuadratureError, RuntimeError)


def test_rate_oracle_fifty_triples_fast():
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    for _ in range(50):
        gamma = 10 ** rng.uniform(-4, -1)
        kappa = gamma * 10 ** rng.uniform(-1, 1)
        t = rng.uniform(0, 5 / kappa)
        J = SpectralDensity.lorentzian(0.0, kappa, gamma * kappa)
        assert abs(rate_quadrature(t, J, 0.0).real - rate_closed_form(t, gamma, kappa)) < 1e-5 * gamma
    assert time.perf_counter() - start < 10.0


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-4, 1e-1), st.floats(-1.0, 1.0), st.floats(0.0, 5.0))
def test_quadrature_oracle_property(gamma, log_ratio, t_scaled):
    kappa = gamma * 10 ** log_ratio
    t = t_scaled / kappa
    J = SpectralDensity.lorentzian(0.0, kappa, gamma * kappa)
    assert abs(rate_quadrature(t, J, 0.0).real - rate_closed_form(t, gamma, kappa)) < 1e-5 * gamma


# --- RateFunction -------------------------------------------------------------------

def test_rate_function_kinds():
    cf = RateFunction.closed_form(0.1, 0.05, 2.0)
    mk = RateFunction.markovian(0.1, 2.0)
    assert cf.kind is RateKind.CLOSED_FORM_LORENTZIAN
    assert mk.kind is RateKind.MARKOVIAN_CONSTANT
    assert cf.value(0.0) == 0.0
    assert mk.value(0.0) == mk.value(1e4) == 0.1
    assert cf.value(1e5) == pytest.approx(mk.value(1e5))


def test_halved_convention():
    a = RateFunction.closed_form(0.1, 0.05, 2.0, convention="eq10")
    b = RateFunction.closed_form(0.1, 0.05, 2.0, convention="eq3")
    assert b.value(17.0) == pytest.approx(0.5 * a.value(17.0), rel=1e-15)


def test_quadrature_table_tracks_closed_form():
    grid = np.linspace(0, 200, 401)
    tab = RateFunction.from_quadrature(0.02, 0.03, 1.0, grid)
    cf = RateFunction.closed_form(0.02, 0.03, 1.0)
    assert tab.kind is RateKind.QUADRATURE_TABLE
    np.testing.assert_allclose(tab.value(grid), cf.value(grid), atol=1e-9 * 0.02)


def test_zero_gamma_rate_is_zero():
    r = RateFunction.closed_form(0.0, 0.1, 1.0)
    assert r.value(10.0) == 0.0


# --- cross rate -----------------------------------------------------------------------

def test_cross_rate_examples():
    cm = 1.883651567e-4
    ri = RateFunction.markovian(140 * cm)
    rj = RateFunction.markovian(18 * cm)
    assert cross_rate(1e6, ri, rj, 1.0) / cm == pytest.approx(math.sqrt(140 * 18), rel=1e-12)
    assert math.sqrt(140 * 18) == pytest.approx(50.2, abs=0.05)
    assert cross_rate(3.0, ri, rj, 0.0) == 0.0
    r = RateFunction.closed_form(0.1, 0.05, 1.0)
    assert cross_rate(7.0, r, r, 1.0) == pytest.approx(r.value(7.0), rel=1e-15)


def test_cross_rate_rejects_large_alignment():
    r = RateFunction.markovian(0.1)
    with pytest.raises(ValueError):
        cross_rate(1.0, r, r, 1.01)


@given(st.floats(1e-4, 1), st.floats(1e-4, 1), st.floats(-1, 1), st.floats(0, 1e3))
def test_cross_rate_bounded_by_geometric_mean(gi, gj, p, t):
    ri = RateFunction.closed_form(gi, gi, 1.0)
    rj = RateFunction.closed_form(gj, gj, 1.1)
    c = cross_rate(t, ri, rj, p)
    assert abs(c) <= math.sqrt(ri.value(t) * rj.value(t)) * (1 + 1e-12)
