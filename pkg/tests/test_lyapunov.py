import numpy as np
import pytest
from scipy import integrate

from fsdiffusion import (DriftConditionFailure, Parameters, WeightSpec, WindowError,
                         check_drift_condition, check_modified_drift_condition, generator_apply,
                         invariant_density, lyapunov_phi)
from fsdiffusion.errors import DomainError
from fsdiffusion.lyapunov import generator_left_tail, generator_right_tail, max_epsilon

W = WeightSpec(gamma=1.5, delta=4.0)


def test_pure_power_tails():
    w = WeightSpec(1.0, 2.0)
    np.testing.assert_allclose(lyapunov_phi(w, 0.1), (10.0, -100.0, 2000.0), rtol=1e-12)
    np.testing.assert_allclose(lyapunov_phi(w, 10.0), (100.0, 20.0, 2.0), rtol=1e-12)


def test_constant_weight():
    phi, d1, d2 = lyapunov_phi(WeightSpec(), np.logspace(-3, 3, 101))
    assert np.all(phi == 1.0) and np.all(d1 == 0.0) and np.all(d2 == 0.0)


@pytest.mark.parametrize("w", [W, WeightSpec(0.3, 0.7), WeightSpec(2.0, 1.0, (0.2, 0.9), (1.5, 1.9))])
def test_phi_at_least_one(w):
    assert lyapunov_phi(w, np.logspace(-4, 4, 4001))[0].min() >= 1.0


@pytest.mark.parametrize("w", [W, WeightSpec(0.5, 2.5)])
def test_derivatives_match_finite_differences(w):
    x = np.concatenate([np.linspace(0.3, 2.5, 57), [0.05, 7.0]])
    h = 1e-5 * x
    f = lambda s: lyapunov_phi(w, s)[0]
    _, d1, d2 = lyapunov_phi(w, x)
    fd1 = (f(x + h) - f(x - h)) / (2 * h)
    fd2 = (f(x + h) - 2 * f(x) + f(x - h)) / h ** 2
    np.testing.assert_allclose(d1, fd1, rtol=1e-5, atol=1e-5)
    np.testing.assert_allclose(d2, fd2, rtol=1e-4, atol=1e-3)


def test_generator_matches_closed_tails(ref):
    right = np.logspace(np.log10(2.5), 6, 50)
    left = np.logspace(-6, np.log10(0.4), 50)
    np.testing.assert_allclose(generator_apply(ref, W, right), generator_right_tail(ref, 4.0, right),
                               rtol=1e-12)
    np.testing.assert_allclose(generator_apply(ref, W, left), generator_left_tail(ref, 1.5, left),
                               rtol=1e-12)


def test_generator_integrates_to_zero(ref):
    w = WeightSpec(1.0, 2.0)
    f = lambda x: generator_apply(ref, w, x) * invariant_density(ref, x)
    pieces = [(0, 0.5), (0.5, 1.0), (1.0, 2.0), (2.0, np.inf)]
    total = sum(integrate.quad(f, a, b, limit=400, epsrel=1e-11)[0] for a, b in pieces)
    scale = sum(integrate.quad(lambda x: abs(f(x)), a, b, limit=400)[0] for a, b in pieces)
    assert abs(total) < 1e-8 * scale


@pytest.mark.parametrize("ab", [(6, 10), (5, 9), (12, 20)])
def test_drift_inside_window(ab):
    a, b = ab
    p = Parameters(1.0, 2.0, a, b)
    cert = check_drift_condition(p, WeightSpec(0.5 * (a / 2 - 1), 0.5 * b / 2))
    assert cert.c > 0 and cert.C >= 0 and cert.u < cert.v
    x = np.logspace(-6, 6, 3000)
    phi = lyapunov_phi(cert.weight, x)[0]
    bound = -cert.c * phi + cert.C * ((x >= cert.u) & (x <= cert.v))
    assert np.all(generator_apply(p, cert.weight, x) <= bound * (1 + 1e-9) + 1e-9 * np.abs(bound))


@pytest.mark.parametrize("ab", [(6, 10), (5, 9), (12, 20)])
def test_drift_tail_attribution(ab):
    a, b = ab
    p = Parameters(1.0, 2.0, a, b)
    with pytest.raises(DriftConditionFailure) as left:
        check_drift_condition(p, WeightSpec(a / 2 - 1 + 0.25, 1.0))
    assert left.value.tail == "left"
    with pytest.raises(DriftConditionFailure) as right:
        check_drift_condition(p, WeightSpec(0.5, b / 2 + 0.5))
    assert right.value.tail == "right"
    with pytest.raises(DriftConditionFailure) as both:
        check_drift_condition(p, WeightSpec(a / 2 - 1 + 0.25, b / 2 + 0.5))
    assert both.value.tail == "both"


def test_modified_condition_closes_gap(ref):
    w, wp = WeightSpec(2.5, 4.0), WeightSpec(1.9, 4.5)
    with pytest.raises(DriftConditionFailure):
        check_drift_condition(ref, w)
    cert = check_modified_drift_condition(ref, w, wp)
    assert cert.epsilon == pytest.approx(0.5 * max_epsilon(w, wp))
    assert cert.c_prime > 0


@pytest.mark.parametrize("w,wp", [
    (WeightSpec(3.2, 4.0), WeightSpec(1.9, 4.5)),     # gamma >= alpha/2
    (WeightSpec(2.5, 4.0), WeightSpec(2.1, 4.5)),     # gamma' >= alpha/2 - 1
    (WeightSpec(2.5, 4.0), WeightSpec(1.9, 3.5)),     # delta' <= delta
])
def test_modified_window_errors(ref, w, wp):
    with pytest.raises(WindowError):
        check_modified_drift_condition(ref, w, wp)


@pytest.mark.parametrize("kw", [dict(left_knots=(1.0, 0.5)), dict(right_knots=(0.5, 2.0)),
                                dict(gamma=-1.0)])
def test_weight_validation(kw):
    with pytest.raises(DomainError):
        WeightSpec(**kw)
