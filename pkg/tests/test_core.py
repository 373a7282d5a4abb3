import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from fsdiffusion import (MomentDivergenceError, ParameterError, Parameters, autocorrelation,
                         autocovariance, drift, fisher_snedecor_density, invariant_cdf,
                         invariant_density, invariant_ppf, scale_density, sigma_squared,
                         sigma_squared_prime, stationary_variance, theoretical_moment)

from .conftest import random_parameters


def quad_moment(p, u):
    f = lambda x: x ** u * invariant_density(p, x)
    a = integrate.quad(f, 0, p.kappa, limit=400, epsabs=0, epsrel=1e-11)[0]
    b = integrate.quad(f, p.kappa, np.inf, limit=400, epsabs=0, epsrel=1e-11)[0]
    return a + b


params_st = st.builds(Parameters, theta=st.floats(0.1, 5), kappa=st.floats(0.1, 10),
                      alpha=st.floats(2.5, 30), beta=st.floats(4.5, 30))


class TestParameters:
    def test_rho_is_kappa_times_beta_minus_two(self, ref):
        assert ref.rho == pytest.approx(16.0)

    @pytest.mark.parametrize("kw", [dict(theta=0), dict(kappa=-1), dict(alpha=2.0), dict(beta=1.5),
                                    dict(alpha=float("nan"))])
    def test_rejects_inadmissible(self, kw):
        base = dict(theta=1.0, kappa=2.0, alpha=6.0, beta=10.0)
        with pytest.raises(ParameterError):
            Parameters(**{**base, **kw})

    def test_fisher_snedecor_mean(self):
        p = Parameters.fisher_snedecor(6, 10)
        assert p.kappa == pytest.approx(1.25)


class TestCoefficients:
    def test_drift_and_diffusion(self, ref):
        assert drift(ref, 3.0) == pytest.approx(-1.0)
        # 2 theta x (x/(beta/2-1) + kappa/(alpha/2))
        assert sigma_squared(ref, 3.0) == pytest.approx(2 * 3 * (3 / 4 + 2 / 3))

    def test_sigma_squared_prime_matches_finite_difference(self, ref):
        x, h = np.array([0.01, 0.7, 5.0, 300.0]), 1e-6
        fd = (sigma_squared(ref, x * (1 + h)) - sigma_squared(ref, x * (1 - h))) / (2 * h * x)
        np.testing.assert_allclose(sigma_squared_prime(ref, x), fd, rtol=1e-7)

    def test_nonpositive_state_rejected(self, ref):
        with pytest.raises(ValueError):
            sigma_squared(ref, 0.0)


class TestInvariantLaw:
    def test_normalised(self, ref):
        assert quad_moment(ref, 0.0) == pytest.approx(1.0, rel=1e-9)

    @settings(max_examples=15, deadline=None)
    @given(params_st)
    def test_normalised_property(self, p):
        assert quad_moment(p, 0.0) == pytest.approx(1.0, rel=1e-7)

    def test_speed_measure_identity(self, ref):
        x = np.logspace(-4, 4, 200)
        prod = invariant_density(ref, x) * sigma_squared(ref, x) * scale_density(ref, x)
        np.testing.assert_allclose(prod, prod[0], rtol=1e-10)

    def test_scaled_f_law(self, ref):
        x = np.logspace(-3, 3, 50)
        s = ref.rho / ref.beta
        expected = stats.f.pdf(x / s, ref.alpha, ref.beta) / s
        np.testing.assert_allclose(invariant_density(ref, x), expected, rtol=1e-10)

    def test_fisher_snedecor_specialisation(self):
        p = Parameters.fisher_snedecor(6, 10)
        x = np.logspace(-3, 3, 50)
        np.testing.assert_allclose(invariant_density(p, x), fisher_snedecor_density(6, 10, x),
                                   rtol=1e-12)
        np.testing.assert_allclose(fisher_snedecor_density(6, 10, x), stats.f.pdf(x, 6, 10),
                                   rtol=1e-10)

    def test_cdf_against_quadrature(self, ref):
        for x in (0.3, 2.0, 17.0):
            q = integrate.quad(lambda s: invariant_density(ref, s), 0, x, epsrel=1e-12)[0]
            assert invariant_cdf(ref, x) == pytest.approx(q, rel=1e-9)

    def test_ppf_inverts_cdf(self, ref):
        q = np.linspace(0.01, 0.99, 25)
        np.testing.assert_allclose(invariant_cdf(ref, invariant_ppf(ref, q)), q, rtol=1e-10)


class TestMoments:
    def test_worked_values(self, ref):
        assert theoretical_moment(ref, 1) == pytest.approx(2.0, rel=1e-12)
        assert theoretical_moment(ref, -1) == pytest.approx(60 / (4 * 8 * 2), rel=1e-12)
        assert theoretical_moment(ref, 2) == pytest.approx(4 * 8 * 8 / (6 * 6), rel=1e-12)
        assert theoretical_moment(ref, 0) == 1.0
        assert stationary_variance(ref) == pytest.approx(2 * 4 * 14 / 36, rel=1e-12)

    def test_against_quadrature(self, rng):
        for p in random_parameters(rng, 5):
            for u in (-1.5, -1.0, 0.5, 1.0, 2.0):
                if -p.alpha / 2 < u < p.beta / 2:
                    assert theoretical_moment(p, u) == pytest.approx(quad_moment(p, u), rel=1e-7)

    @pytest.mark.parametrize("u", [-3.0, 5.0, -3.5, 7.0])
    def test_divergence_outside_window(self, ref, u):
        with pytest.raises(MomentDivergenceError):
            theoretical_moment(ref, u)

    def test_moment_blows_up_near_edge(self, ref):
        assert theoretical_moment(ref, 4.99) > 1e2 * theoretical_moment(ref, 4.0)

    def test_variance_requires_beta_above_four(self):
        with pytest.raises(MomentDivergenceError):
            stationary_variance(Parameters(1, 1, 6, 4))

    @settings(max_examples=50, deadline=None)
    @given(params_st)
    def test_mean_is_kappa(self, p):
        assert theoretical_moment(p, 1.0) == pytest.approx(p.kappa, rel=1e-12)


def test_autocorrelation_is_exponential(ref):
    t = np.array([0.0, 0.5, 2.0])
    np.testing.assert_allclose(autocorrelation(ref, t), np.exp(-t))
    assert autocovariance(ref, 1.0) == pytest.approx(stationary_variance(ref) * math.exp(-1))
