import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special
from scipy.stats import ncx2

from collapse_diffusion.analytics import (
    BESSEL_SWITCH, CirParams, asymptotic_density, bessel_i2_scaled, density_grid,
    stationary_density, transition_cdf, transition_density, transition_log_density,
    transition_moments,
)
from collapse_diffusion.units import DomainError


def cir_from_alpha_beta(alpha, beta):
    # kappa t = -log beta, t = 1; alpha = kappa m / (D (1 - beta)) fixes D/m
    kt = -math.log(beta)
    return CirParams(kt / (alpha * (1 - beta)), kt, 1.0)


class TestBessel:
    @pytest.mark.parametrize("x", [0.0, 1e-8, 0.5, 5.0, 29.9, 30.0, 30.1, 150.0, 1e4, 1e8])
    def test_against_mpmath(self, x):
        ref = float(mpmath.besseli(2, x) * mpmath.exp(-x))
        assert bessel_i2_scaled(x) == pytest.approx(ref, rel=1e-13, abs=1e-300)

    def test_branch_continuity(self):
        lo = bessel_i2_scaled(np.nextafter(BESSEL_SWITCH, 0))
        hi = bessel_i2_scaled(np.nextafter(BESSEL_SWITCH, 100))
        assert abs(lo / hi - 1) < 1e-12

    def test_against_scipy(self):
        x = np.geomspace(1e-3, 1e6, 400)
        np.testing.assert_allclose(bessel_i2_scaled(x), special.ive(2, x), rtol=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            bessel_i2_scaled(-1.0)


class TestTransitionDensity:
    def test_hand_value(self):
        # alpha = 3, beta = 0.6, E0 = 1, E = 1 substituted by hand with mpmath
        cir = cir_from_alpha_beta(3.0, 0.6)
        a, b, E, E0 = mpmath.mpf(3), mpmath.mpf("0.6"), 1, 1
        ref = (a / b) * (E / E0) * mpmath.exp(-a * (E + b * E0)) \
            * mpmath.besseli(2, 2 * a * mpmath.sqrt(b * E * E0))
        assert transition_density(1.0, 1.0, cir) == pytest.approx(float(ref), rel=1e-12)

    @pytest.mark.parametrize("alpha", [1.0, 10.0, 1e4])
    @pytest.mark.parametrize("beta", [0.1, 0.5, 0.99])
    def test_matches_noncentral_chi2(self, alpha, beta):
        cir = cir_from_alpha_beta(alpha, beta)
        mean, var = transition_moments(1.0, cir)
        e = np.linspace(max(mean - 8 * math.sqrt(var), 1e-12), mean + 8 * math.sqrt(var), 501)
        ref = 2 * cir.alpha * ncx2.pdf(2 * cir.alpha * e, 6, 2 * cir.alpha * cir.beta)
        got = transition_density(e, 1.0, cir)
        assert np.max(np.abs(got - ref)) < 1e-10 * ref.max()

    @pytest.mark.parametrize("alpha", [1.0, 10.0, 1e4])
    @pytest.mark.parametrize("beta", [0.1, 0.5, 0.99])
    def test_mass_and_moments(self, alpha, beta):
        cir = cir_from_alpha_beta(alpha, beta)
        g = density_grid(1.0, cir, (1e-13, 1 - 1e-13), n=20001)
        e, p = g.energies, g.density
        mass = np.trapezoid(p, e)
        mean = np.trapezoid(e * p, e) / mass
        var = np.trapezoid((e - mean) ** 2 * p, e) / mass
        m_ref, v_ref = transition_moments(1.0, cir)
        assert m_ref == pytest.approx(cir.beta + 3 / cir.alpha)
        assert mass == pytest.approx(1.0, abs=1e-6)
        assert mean == pytest.approx(m_ref, rel=1e-6)
        assert var == pytest.approx(v_ref, rel=1e-5)

    def test_zero_energy_and_negative(self):
        cir = cir_from_alpha_beta(3.0, 0.6)
        assert transition_density(0.0, 1.0, cir) == 0.0
        with pytest.raises(DomainError):
            transition_density(-1.0, 1.0, cir)
        with pytest.raises(DomainError):
            transition_density(1.0, 0.0, cir)

    def test_point_mass_undefined(self):
        with pytest.raises(DomainError):
            transition_density(1.0, 1.0, CirParams(0.0, 0.0, 1.0))

    def test_log_density_underflow_region_finite(self):
        cir = cir_from_alpha_beta(1e6, 0.5)
        lp = transition_log_density(np.array([0.2, 0.8]), 1.0, cir)
        assert np.all(np.isfinite(lp)) and np.all(lp < -1e3)

    def test_no_expansion_limit_continuous(self):
        a = transition_density(1.1, 1.0, CirParams(0.05, 0.0, 1.0))
        b = transition_density(1.1, 1.0, CirParams(0.05, 1e-10, 1.0))
        assert a == pytest.approx(b, rel=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.5, 1e3), st.floats(0.05, 0.95), st.floats(0.01, 5.0))
    def test_semigroup_mean(self, alpha, beta, e0):
        # E[E_t] = beta E0 + 3/alpha agrees with the ODE solution of the mean
        cir = cir_from_alpha_beta(alpha, beta)
        k, theta = cir.kappa, 3 * cir.d_over_m / cir.kappa
        ode = theta + (e0 - theta) * math.exp(-k)
        assert transition_moments(e0, cir)[0] == pytest.approx(ode, rel=1e-10)


class TestStationary:
    def test_gamma_law(self):
        omega = 2.5
        m0 = integrate.quad(lambda e: stationary_density(e, omega), 0, np.inf)[0]
        m1 = integrate.quad(lambda e: e * stationary_density(e, omega), 0, np.inf)[0]
        assert m0 == pytest.approx(1.0, rel=1e-12)
        assert m1 == pytest.approx(3 / omega, rel=1e-10)

    def test_grid_kind(self):
        g = density_grid(1.0, CirParams(0.1, 1.0, 1.0), kind="stationary")
        assert g.mass == pytest.approx(1.0, abs=1e-6)


class TestAsymptotic:
    def test_peak_location_and_mass(self):
        e = np.linspace(0.5, 1.6, 20001)
        p = asymptotic_density(e, 1.0, 1e-3, 1.0, 1.0)
        assert np.trapezoid(p, e) == pytest.approx(1.0, rel=1e-12)
        assert abs(e[np.argmax(p)] - 1.0) < 0.01

    def test_unnormalized_already_close(self):
        e = np.linspace(0.5, 1.6, 20001)
        p = asymptotic_density(e, 1.0, 1e-3, 1.0, 1.0, normalize=False)
        assert np.trapezoid(p, e) == pytest.approx(1.0, rel=5e-3)

    def test_needs_positive_time(self):
        with pytest.raises(DomainError):
            asymptotic_density([1.0], 1.0, 1.0, 1.0, 0.0)


def test_cdf_monotone_and_bounded():
    F = transition_cdf(1.0, cir_from_alpha_beta(10.0, 0.5))
    x = np.linspace(0, 5, 1000)
    c = F(x)
    assert np.all(np.diff(c) >= 0)
    assert c[0] == 0.0 and c[-1] == pytest.approx(1.0, abs=1e-9)


def test_cir_params_groups():
    c = CirParams.from_physical(2.0, 4.0, 0.5, 3.0)
    assert c.d_over_m == 0.5 and c.dtm == pytest.approx(1.5)
    assert c.beta == pytest.approx(math.exp(-1.5))
    assert c.alpha == pytest.approx(0.5 * 4.0 / 2.0 / (1 - math.exp(-1.5)))
    with pytest.raises(DomainError):
        CirParams(-1.0, 0.0, 1.0)
