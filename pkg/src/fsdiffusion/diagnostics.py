"""Monte Carlo checks of ergodic decay, the law of large numbers and the CLT.

Total-variation distances are estimated on histograms whose bins carry equal
stationary mass; every decay fit is restricted to distances well above the
noise floor of a stationary sample of the same size.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .core import Parameters, invariant_density, invariant_ppf, theoretical_moment
from .errors import DomainError, NumericalDegeneracyError, WindowError
from .estimate import autocovariances, long_run_variance
from .lyapunov import WeightSpec, lyapunov_phi
from .observations import Mode, ObservationSet
from .simulate import (InitialLaw, Scheme, _pool_map, path_functionals, sample_invariant,
                       simulate_marginals)

__all__ = [
    "DecayFit",
    "NormalityReport",
    "LLNReport",
    "FitFailure",
    "quantile_edges",
    "tv_decay_curve",
    "weighted_tv_decay_curve",
    "lln_report",
    "clt_check",
    "clt_window",
    "autocorrelation_fit",
]

_FLOOR_KEY = 2 ** 40
_SURROGATE_KEY = 2 ** 41
KS_95 = 1.36


class FitFailure(NumericalDegeneracyError):
    """Not enough usable points for a log-linear fit."""


def _rows_to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


@dataclass
class DecayFit:
    """Distances to the stationary law along time with a log-linear fit."""

    lags: np.ndarray
    distances: np.ndarray
    rate_hat: float
    intercept_hat: float
    r_squared: float
    floor: float
    fit_mask: np.ndarray
    weighted: bool = False
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "lags": [float(v) for v in self.lags],
            "distances": [float(v) for v in self.distances],
            "rate_hat": float(self.rate_hat),
            "intercept_hat": float(self.intercept_hat),
            "r_squared": float(self.r_squared),
            "floor": float(self.floor),
            "fit_mask": [bool(v) for v in self.fit_mask],
            "weighted": self.weighted,
            "warnings": list(self.warnings),
        }

    def to_csv(self):
        return _rows_to_csv(["t", "distance", "in_fit"],
                            [(t, d, int(m)) for t, d, m in zip(self.lags, self.distances, self.fit_mask)])


@dataclass
class NormalityReport:
    """Standardised CLT statistics across independent replicates."""

    n_replicates: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    ks_statistic: float
    ks_threshold: float
    variance_ci: tuple
    sigma2_hat: float
    raw_variance: float
    target: float
    mode: Mode
    passed: bool
    statistics: np.ndarray = field(repr=False, default=None)
    standardized: np.ndarray = field(repr=False, default=None)
    checks: dict = field(default_factory=dict)

    @property
    def pass_(self):
        return self.passed

    def to_dict(self):
        return {
            "n_replicates": self.n_replicates,
            "mean": self.mean, "variance": self.variance, "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis, "ks_statistic": self.ks_statistic,
            "ks_threshold": self.ks_threshold, "variance_ci": list(self.variance_ci),
            "sigma2_hat": self.sigma2_hat, "raw_variance": self.raw_variance,
            "target": self.target, "mode": self.mode.value, "pass": self.passed,
            "checks": self.checks,
        }

    def to_csv(self):
        return _rows_to_csv(["replicate", "statistic", "standardized"],
                            [(i, s, z) for i, (s, z) in enumerate(zip(self.statistics, self.standardized))])


@dataclass
class LLNReport:
    """Absolute errors of time averages against the stationary moment."""

    upsilon: float
    target: float
    horizons: np.ndarray
    median_error: np.ndarray
    q25: np.ndarray
    q75: np.ndarray
    errors: np.ndarray = field(repr=False, default=None)

    @property
    def iqr(self):
        return self.q75 - self.q25

    def to_dict(self):
        return {"upsilon": self.upsilon, "target": self.target,
                "horizons": [float(v) for v in self.horizons],
                "median_error": [float(v) for v in self.median_error],
                "q25": [float(v) for v in self.q25], "q75": [float(v) for v in self.q75]}

    def to_csv(self):
        return _rows_to_csv(["T", "median_error", "q25", "q75"],
                            zip(self.horizons, self.median_error, self.q25, self.q75))


# ---------------------------------------------------------------------------
# total variation


def quantile_edges(p: Parameters, bins):
    """Bin edges with equal stationary mass ``1 / bins`` (first 0, last inf)."""
    if bins < 2:
        raise DomainError("need at least two bins")
    edges = invariant_ppf(p, np.linspace(0.0, 1.0, bins + 1))
    edges[0], edges[-1] = 0.0, np.inf
    if np.any(np.diff(edges) <= 0):
        raise DomainError("degenerate binning: quantile edges are not increasing")
    return edges


def _tv(samples, edges):
    counts = np.histogram(samples, edges)[0]
    return 0.5 * np.abs(counts / samples.size - 1.0 / (edges.size - 1)).sum()


def _floor_rng(base_seed, k):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(base_seed),
                                                                       spawn_key=(_FLOOR_KEY, k))))


def _fit_log_linear(t, d, mask, weights=None):
    if mask.sum() < 3:
        raise FitFailure(f"only {int(mask.sum())} points above the noise floor; need 3")
    x, y = t[mask], np.log(d[mask])
    w = np.ones_like(x) if weights is None else weights[mask]
    slope, intercept = np.polyfit(x, y, 1, w=w)
    resid = y - (slope * x + intercept)
    ybar = np.sum(w ** 2 * y) / np.sum(w ** 2)
    ss_tot = np.sum(w ** 2 * (y - ybar) ** 2)
    r2 = 1.0 - np.sum(w ** 2 * resid ** 2) / ss_tot if ss_tot > 0 else float("nan")
    return -float(slope), float(intercept), float(r2)


def _decay(times, dist, floor, floor_factor, upper, weighted, warnings):
    mask = (dist > floor_factor * floor) & (dist < upper)
    try:
        rate, icpt, r2 = _fit_log_linear(times, dist, mask)
    except FitFailure as exc:
        warnings.append(str(exc))
        rate = icpt = r2 = float("nan")
    return DecayFit(lags=times, distances=dist, rate_hat=rate, intercept_hat=icpt, r_squared=r2,
                    floor=floor, fit_mask=mask, weighted=weighted, warnings=warnings)


def tv_decay_curve(p: Parameters, init: InitialLaw, times, n_paths=20000, bins=64, dt=0.01,
                   scheme=Scheme.MILSTEIN_RETRY, base_seed=0, threads=None, floor_factor=3.0,
                   upper=0.5) -> DecayFit:
    """Total-variation distance between the ensemble marginal and the stationary law.

    The distance at each time is ``1/2 sum_b |p_hat(b) - 1/bins|`` over bins of
    equal stationary mass. The floor is the mean distance of two independent
    exact stationary samples of size ``n_paths``. ``log d`` is regressed on
    ``t`` over points with ``floor_factor * floor < d < upper``.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise DomainError("times must be increasing")
    edges = quantile_edges(p, bins)
    M = simulate_marginals(p, init, times, dt, n_paths, scheme, base_seed, threads)
    dist = np.array([_tv(M[:, j], edges) for j in range(times.size)])
    floor = float(np.mean([_tv(sample_invariant(p, _floor_rng(base_seed, k), n_paths), edges)
                           for k in range(2)]))
    return _decay(times, dist, floor, floor_factor, upper, False, [])


def _stationary_bin_weights(p, w, edges):
    """``int_b phi d pi`` for each bin by adaptive quadrature."""
    def f(x):
        return lyapunov_phi(w, x)[0] * invariant_density(p, x)

    out = np.empty(edges.size - 1)
    for i in range(out.size):
        lo, hi = edges[i], edges[i + 1]
        pts = [k for k in (*w.left_knots, *w.right_knots) if lo < k < hi] or None
        if np.isinf(hi):
            out[i] = integrate.quad(f, lo, np.inf, limit=200)[0]
        else:
            out[i] = integrate.quad(f, max(lo, 0.0), hi, points=pts, limit=200)[0]
    return out


def _weighted_tv(samples, edges, ref, w):
    phi = lyapunov_phi(w, samples)[0]
    idx = np.searchsorted(edges, samples, side="right") - 1
    mass = np.bincount(idx, weights=phi, minlength=edges.size - 1)[:edges.size - 1] / samples.size
    return 0.5 * np.abs(mass - ref).sum()


def weighted_tv_decay_curve(p: Parameters, init: InitialLaw, w: WeightSpec, times, n_paths=20000,
                            bins=64, dt=0.01, scheme=Scheme.MILSTEIN_RETRY, base_seed=0,
                            threads=None, floor_factor=3.0, upper=None) -> DecayFit:
    """Weighted distance ``1/2 sum_b |int_b phi d mu_t - int_b phi d pi|``.

    The ensemble side uses the sample mean of ``phi`` restricted to each bin;
    the stationary side is integrated numerically. With ``phi == 1`` this is
    exactly :func:`tv_decay_curve`.
    """
    # the exponent window of the plain drift condition
    if not w.gamma < p.alpha / 2.0 - 1.0:
        raise WindowError(f"gamma={w.gamma} violates gamma < alpha/2 - 1 = {p.alpha / 2 - 1}",
                          "gamma < alpha/2 - 1")
    if not w.delta < p.beta / 2.0:
        raise WindowError(f"delta={w.delta} violates delta < beta/2 = {p.beta / 2}", "delta < beta/2")
    warnings = []
    if w.delta >= p.beta / 4.0 or w.gamma >= p.alpha / 4.0:
        warnings.append("phi is not square integrable under the stationary law; "
                        "weighted distances have heavy-tailed sampling noise")
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise DomainError("times must be increasing")
    edges = quantile_edges(p, bins)
    ref = _stationary_bin_weights(p, w, edges)
    M = simulate_marginals(p, init, times, dt, n_paths, scheme, base_seed, threads)
    dist = np.array([_weighted_tv(M[:, j], edges, ref, w) for j in range(times.size)])
    floor = float(np.mean([_weighted_tv(sample_invariant(p, _floor_rng(base_seed, k), n_paths),
                                        edges, ref, w) for k in range(2)]))
    if upper is None:
        upper = 0.5 * float(ref.sum())
    return _decay(times, dist, floor, floor_factor, upper, True, warnings)


# ---------------------------------------------------------------------------
# LLN and CLT


def _check_lln_window(p, u):
    lo, hi = -p.alpha / 2.0, p.beta / 2.0
    if not lo < u < hi:
        raise WindowError(f"upsilon={u} outside (-alpha/2, beta/2) = ({lo}, {hi})",
                          "-alpha/2 < upsilon < beta/2")


def clt_window(p: Parameters, mode) -> tuple:
    """Open interval of exponents with an asymptotically normal empirical moment."""
    mode = Mode.parse(mode)
    if mode is Mode.DISCRETE:
        return -min(p.alpha / 2.0 - 1.0, p.alpha / 4.0), p.beta / 4.0
    return -p.alpha / 4.0 - 0.5, p.beta / 4.0


def _check_clt_window(p, u, mode):
    lo, hi = clt_window(p, mode)
    if not lo < u < hi:
        if mode is Mode.DISCRETE:
            ineq = "-(alpha/2 - 1) ^ (alpha/4) < upsilon < beta/4"
        else:
            ineq = "-alpha/4 - 1/2 < upsilon < beta/4"
        raise WindowError(f"upsilon={u} outside the {mode.value}-time CLT window {ineq} = ({lo}, {hi})",
                          ineq)


def _block_for(dt, target):
    return dt * max(1, int(round(target / dt)))


def lln_report(p: Parameters, init: InitialLaw, upsilon, horizons, n_replicates=20, dt=0.01,
               block=1.0, scheme=Scheme.MILSTEIN_RETRY, base_seed=0, threads=None) -> LLNReport:
    """Median and quartiles of ``|time average of X^u - m_u|`` at each horizon."""
    u = float(upsilon)
    _check_lln_window(p, u)
    horizons = np.asarray(horizons, dtype=float)
    block = _block_for(dt, block)
    k = np.rint(horizons / block)
    if np.any(k < 1) or np.any(np.abs(k * block - horizons) > 1e-9 * horizons):
        raise DomainError("horizons must be positive multiples of the block length")
    target = theoretical_moment(p, u)
    if u == 0.0:
        errs = np.zeros((n_replicates, horizons.size))
    else:
        def one(i):
            pf = path_functionals(p, init, dt, float(horizons.max()), lambda x: x ** u, block,
                                  scheme, base_seed, i)
            csum = np.cumsum(pf.block_integrals)
            return np.abs(csum[k.astype(int) - 1] / horizons - target)

        errs = np.vstack(_pool_map(one, range(n_replicates), threads))
    q25, med, q75 = np.percentile(errs, [25, 50, 75], axis=0)
    return LLNReport(upsilon=u, target=target, horizons=horizons, median_error=med, q25=q25,
                     q75=q75, errors=errs)


def clt_check(p: Parameters, upsilon, T, n_replicates=500, mode=Mode.CONTINUOUS, dt=0.01,
              init=None, block=0.05, truncation=None, scheme=Scheme.MILSTEIN_RETRY, base_seed=0,
              threads=None, surrogate=False, ks_factor=1.5, kurtosis_tol=0.5,
              variance_band=(0.7, 1.3)) -> NormalityReport:
    """Normality of ``sqrt(T) (m_bar_u - m_u)`` (``sqrt(n)`` in discrete mode).

    Each replicate is an independent path. Continuous mode integrates ``X^u``
    exactly on the step grid and estimates the long-run variance from block
    means of length ``block``; discrete mode observes ``X_1, ..., X_n`` at unit
    times (``n = T``). Statistics are standardised by the replicate-averaged
    Bartlett long-run variance with window ``truncation`` (default
    ``ceil(10 / theta)``).

    With ``surrogate=True`` each replicate is replaced by white noise with the
    stationary marginal (a negative control).

    The composite gate passes when the KS distance to N(0, 1) is below
    ``ks_factor * 1.36 / sqrt(n_replicates)``, ``|excess kurtosis| < kurtosis_tol``
    and the standardised variance lies in ``variance_band``.
    """
    u = float(upsilon)
    mode = Mode.parse(mode)
    _check_clt_window(p, u, mode)
    init = InitialLaw.stationary() if init is None else init
    target = theoretical_moment(p, u)
    L = math.ceil(10.0 / p.theta) if truncation is None else truncation
    if mode is Mode.DISCRETE:
        step = 1.0
        if abs(round(step / dt) * dt - step) > 1e-9:
            raise DomainError("dt must divide the unit observation spacing")
    else:
        step = _block_for(dt, block)
    n_blocks = int(math.floor(T / step + 1e-9))
    horizon = n_blocks * step

    def one(i):
        if surrogate:
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(
                int(base_seed), spawn_key=(_SURROGATE_KEY, i))))
            series = sample_invariant(p, rng, n_blocks) ** u
        else:
            pf = path_functionals(p, init, dt, horizon, lambda x: x ** u, step, scheme, base_seed, i)
            series = pf.boundary_values[1:] ** u if mode is Mode.DISCRETE else pf.block_integrals / step
        stat = math.sqrt(horizon if mode is Mode.CONTINUOUS else n_blocks) * (series.mean() - target)
        # series holds X^u already, so the identity exponent gives its long-run variance
        obs = ObservationSet(step * np.arange(1, series.size + 1), series, mode)
        sig = long_run_variance(obs, [1.0], L)[0, 0]
        return stat, sig

    res = np.array(_pool_map(one, range(n_replicates), threads))
    raw, sig = res[:, 0], res[:, 1]
    sigma2 = float(np.mean(sig))
    z = raw / math.sqrt(sigma2)
    n = z.size
    var = float(np.var(z, ddof=1))
    ci = (var * (n - 1) / stats.chi2.ppf(0.975, n - 1), var * (n - 1) / stats.chi2.ppf(0.025, n - 1))
    ks = float(stats.kstest(z, "norm").statistic)
    thr = ks_factor * KS_95 / math.sqrt(n)
    exk = float(stats.kurtosis(z))
    checks = {"ks": ks < thr, "kurtosis": abs(exk) < kurtosis_tol,
              "variance": variance_band[0] <= var <= variance_band[1]}
    return NormalityReport(
        n_replicates=n, mean=float(np.mean(z)), variance=var, skewness=float(stats.skew(z)),
        excess_kurtosis=exk, ks_statistic=ks, ks_threshold=thr, variance_ci=ci,
        sigma2_hat=sigma2, raw_variance=float(np.var(raw, ddof=1)), target=target, mode=mode,
        passed=all(checks.values()), statistics=raw, standardized=z, checks=checks)


# ---------------------------------------------------------------------------
# autocorrelation


def autocorrelation_fit(obs: ObservationSet, max_lag, threshold=0.05):
    """Fit ``log acf(t) = a - theta t`` over the leading lags with ``acf > threshold``.

    The lags used are the contiguous run ``h, 2h, ...`` before the first
    correlation at or below ``threshold``. Residuals are weighted by the
    correlation itself, since ``var(log r) ~ var(r) / r^2``.

    Returns
    -------
    (theta_hat, r_squared)
    """
    h = obs.spacing
    K = min(int(round(max_lag / h)), len(obs) - 2)
    if K < 1:
        raise DomainError("max_lag shorter than the observation spacing")
    G = autocovariances(obs.values, K)[:, 0, 0]
    rho = G / G[0]
    below = np.flatnonzero(rho[1:] <= threshold)
    stop = int(below[0]) + 1 if below.size else K + 1
    if stop <= 1:
        raise FitFailure(f"no lag beyond 0 has autocorrelation above {threshold}")
    lags = h * np.arange(1, stop)
    if lags.size < 3:
        return float(-math.log(rho[1]) / h), float("nan")
    r = rho[1:stop]
    rate, _, r2 = _fit_log_linear(lags, r, np.ones(lags.size, dtype=bool), weights=r)
    return rate, r2
