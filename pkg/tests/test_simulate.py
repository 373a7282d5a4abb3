import numpy as np
import pytest
from scipy import stats

from fsdiffusion import (InitialLaw, Parameters, Scheme, ensemble_digest, invariant_cdf,
                         path_functionals, sample_invariant, simulate_ensemble, simulate_marginals,
                         simulate_path, theoretical_moment)
from fsdiffusion.errors import DomainError, StabilityError
from fsdiffusion.simulate import default_threads


def test_grid_and_positivity(ref):
    path = simulate_path(ref, InitialLaw.dirac(1.0), 0.01, 5.0, seed=1)
    assert path.values.size == 501
    assert path.times[-1] == pytest.approx(5.0)
    assert path.values[0] == 1.0
    assert np.all(path.values > 0)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_schemes_stay_positive_near_zero(scheme):
    # small alpha puts much of the mass near the origin
    p = Parameters(1.0, 0.5, 2.2, 8.0)
    path = simulate_path(p, InitialLaw.dirac(1e-3), 0.01, 200.0, scheme, seed=4)
    assert np.all(path.values > 0)


def test_same_seed_same_path(ref):
    a = simulate_path(ref, InitialLaw.stationary(), 0.01, 10.0, seed=9, path_index=3)
    b = simulate_path(ref, InitialLaw.stationary(), 0.01, 10.0, seed=9, path_index=3)
    c = simulate_path(ref, InitialLaw.stationary(), 0.01, 10.0, seed=9, path_index=4)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_digest_independent_of_threads(ref):
    digests = {ensemble_digest(simulate_ensemble(ref, InitialLaw.stationary(), 0.01, 20.0,
                                                 n_paths=12, base_seed=5, threads=t))
               for t in (1, 3, 8)}
    assert len(digests) == 1


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv("FS_DIFFUSION_THREADS", "3")
    assert default_threads() == 3


def test_marginals_match_stored_paths(ref):
    times = [0.5, 1.0, 2.5]
    M = simulate_marginals(ref, InitialLaw.dirac(5.0), times, 0.01, 6, base_seed=2, threads=2)
    for i in range(6):
        path = simulate_path(ref, InitialLaw.dirac(5.0), 0.01, 2.5, seed=2, path_index=i)
        np.testing.assert_array_equal(M[i], path.values[[50, 100, 250]])


def test_path_functionals_match_trapezoid(ref):
    f = lambda x: x ** -1.0
    pf = path_functionals(ref, InitialLaw.stationary(), 0.01, 3.0, f, 0.5, seed=7, path_index=1)
    path = simulate_path(ref, InitialLaw.stationary(), 0.01, 3.0, seed=7, path_index=1)
    y = f(path.values)
    blocks = [np.trapezoid(y[50 * k:50 * k + 51], dx=0.01) for k in range(6)]
    np.testing.assert_allclose(pf.block_integrals, blocks, rtol=1e-12)
    np.testing.assert_array_equal(pf.boundary_values, path.values[::50])
    assert pf.time_average() == pytest.approx(np.trapezoid(y, dx=0.01) / 3.0, rel=1e-12)


def test_stability_guard(ref):
    with pytest.raises(StabilityError):
        simulate_path(Parameters(60.0, 2.0, 6.0, 10.0), InitialLaw.stationary(), 0.01, 1.0)


@pytest.mark.parametrize("kw", [dict(dt=0.0, T=1.0), dict(dt=0.1, T=0.01)])
def test_bad_grid(ref, kw):
    with pytest.raises(DomainError):
        simulate_path(ref, InitialLaw.stationary(), **kw)


@pytest.mark.parametrize("law", [InitialLaw.dirac(3.0), InitialLaw.stationary(),
                                 InitialLaw.lognormal(0.1, 0.4), InitialLaw.custom([1.0, 2.5])])
def test_initial_law_round_trip(law):
    assert InitialLaw.from_dict(law.to_dict()) == law


@pytest.mark.parametrize("kw", [dict(kind="dirac", x0=-1.0), dict(kind="nope")])
def test_initial_law_validation(kw):
    with pytest.raises(DomainError):
        InitialLaw(**kw)


def test_sampler_matches_cdf(ref):
    rng = np.random.default_rng(3)
    x = sample_invariant(ref, rng, 100_000)
    assert stats.kstest(x, lambda s: invariant_cdf(ref, s)).statistic < 2.04 / np.sqrt(1e5)


def test_stationary_mean_preserved(ref):
    M = simulate_marginals(ref, InitialLaw.stationary(), [5.0], 0.01, 4000, base_seed=1)
    se = np.std(M[:, 0]) / np.sqrt(M.shape[0])
    assert abs(M[:, 0].mean() - theoretical_moment(ref, 1.0)) < 4 * se


def test_mean_relaxes_exponentially(ref):
    # E X_t = kappa + (x0 - kappa) e^{-theta t} exactly
    M = simulate_marginals(ref, InitialLaw.dirac(10.0), [0.5, 1.0], 0.005, 4000, base_seed=8)
    expect = 2.0 + 8.0 * np.exp(-np.array([0.5, 1.0]))
    se = M.std(axis=0) / np.sqrt(M.shape[0])
    assert np.all(np.abs(M.mean(axis=0) - expect) < 4 * se)
