"""Empirical moments and method-of-moments estimation of ``(alpha, beta, kappa, theta)``.

The estimator inverts the stationary moment map

    m_-1 = alpha beta / ((alpha - 2)(beta - 2) kappa),   m_1 = kappa,
    m_2  = kappa^2 (beta - 2)(alpha + 2) / (alpha (beta - 4)),
    R(t) = (m_2 - m_1^2) exp(-theta t).

Its asymptotic covariance is obtained from a Bartlett long-run covariance of the
moment functionals pushed through the Jacobian of the inverse map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (DegenerateDenominator, DomainError, MeanAtMostOne,
                     NegativeLogArgument, NumericalDegeneracyError)
from .observations import Mode, ObservationSet

__all__ = [
    "EstimateReport",
    "FSVariant",
    "empirical_moment",
    "empirical_mixed_moment",
    "empirical_covariance",
    "general_map",
    "fs_map",
    "estimate_params_general",
    "estimate_params_fs",
    "long_run_variance",
    "long_run_covariance",
    "autocovariances",
    "asymptotic_covariance",
    "provisional_lag",
]


class FSVariant(str, Enum):
    POSITIVE_MOMENTS = "PositiveMoments"
    INVERSE_MOMENTS = "InverseMoments"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).replace("-", "").replace("_", "").lower()
        table = {"positivemoments": cls.POSITIVE_MOMENTS, "positive": cls.POSITIVE_MOMENTS,
                 "fspositive": cls.POSITIVE_MOMENTS, "inversemoments": cls.INVERSE_MOMENTS,
                 "inverse": cls.INVERSE_MOMENTS, "fsinverse": cls.INVERSE_MOMENTS}
        if key not in table:
            raise DomainError(f"unknown variant {value!r}")
        return table[key]


@dataclass
class EstimateReport:
    """Point estimates with their delta-method covariance."""

    alpha_hat: float
    beta_hat: float
    kappa_hat: float
    theta_hat: float
    moments_used: dict
    lag_t: float
    asymptotic_cov: np.ndarray
    standard_errors: np.ndarray
    sample_size_effective: float
    mode: Mode
    truncation: float = None
    variant: str = "general"
    warnings: list = field(default_factory=list)

    @property
    def estimates(self):
        return np.array([self.alpha_hat, self.beta_hat, self.kappa_hat, self.theta_hat])

    def to_dict(self):
        names = ("alpha", "beta", "kappa", "theta")
        return {
            "point_estimates": dict(zip(names, map(float, self.estimates))),
            "standard_errors": dict(zip(names, map(float, self.standard_errors))),
            "asymptotic_cov": [float(v) for v in np.asarray(self.asymptotic_cov).ravel()],
            "moments_used": {k: float(v) for k, v in self.moments_used.items()},
            "lag_t": float(self.lag_t),
            "mode": self.mode.value,
            "n_or_T": float(self.sample_size_effective),
            "truncation": None if self.truncation is None else float(self.truncation),
            "variant": self.variant,
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------------------
# empirical moments


def _lag_steps(obs: ObservationSet, lag):
    h = obs.spacing
    k = lag / h
    kr = int(round(k))
    if lag < 0 or abs(k - kr) > 1e-9 * max(1.0, abs(k)):
        raise DomainError(f"lag {lag} is not a nonnegative multiple of the spacing {h}")
    if kr > 0 and kr > obs.values.size - 2:
        raise DomainError(f"lag {lag} is not shorter than the observation span {obs.span}")
    return kr


def _average(obs: ObservationSet, y, times):
    if obs.mode is Mode.DISCRETE or y.size == 1:
        return float(np.mean(y))
    return float(np.trapezoid(y, times) / (times[-1] - times[0]))


def empirical_moment(obs: ObservationSet, upsilon) -> float:
    """Sample mean (discrete) or trapezoidal time average (continuous) of ``X^upsilon``."""
    if len(obs) == 0:
        raise DomainError("empty observation set")
    if upsilon == 0:
        return 1.0
    return _average(obs, obs.values ** float(upsilon), obs.times)


def empirical_mixed_moment(obs: ObservationSet, upsilon, chi, lag) -> float:
    """Average of ``X_s^upsilon X_{s+t}^chi`` over all admissible ``s``.

    Discrete mode uses the first ``n - k`` indices (``k = t / spacing``);
    continuous mode integrates over ``[t0, t_end - t]`` and divides by its length.
    """
    k = _lag_steps(obs, lag)
    n = obs.values.size - k
    head = obs.values[:n]
    tail = obs.values[k:]
    y = head ** float(upsilon) * tail ** float(chi)
    return _average(obs, y, obs.times[:n])


def empirical_covariance(obs: ObservationSet, lag) -> float:
    """``mixed_moment(1, 1, t) - moment(1)^2``."""
    return empirical_mixed_moment(obs, 1, 1, lag) - empirical_moment(obs, 1) ** 2


# ---------------------------------------------------------------------------
# moment maps


def general_map(x, y, z, w, t):
    """Inverse moment map ``(m_-1, m_1, m_2, R(t)) -> (alpha, beta, kappa, theta)``."""
    den_a = x * y * z - 2.0 * z + y * y
    den_b = x * z - 2.0 * x * y * y + y
    if abs(den_a) <= 1e-12 * (abs(x * y * z) + 2.0 * abs(z) + y * y):
        raise DegenerateDenominator("alpha denominator m_-1 m_1 m_2 - 2 m_2 + m_1^2 vanishes")
    if abs(den_b) <= 1e-12 * (abs(x * z) + 2.0 * abs(x) * y * y + abs(y)):
        raise DegenerateDenominator("beta denominator m_-1 m_2 - 2 m_-1 m_1^2 + m_1 vanishes")
    alpha = 2.0 * (x * y * z - y * y) / den_a
    beta = 4.0 * x * (z - y * y) / den_b
    kappa = y
    return alpha, beta, kappa, _theta(z, y, w, t)


def _theta(z, y, w, t):
    var = z - y * y
    ratio = w / var if var != 0 else np.nan
    if not (0.0 < ratio < 1.0):
        raise NegativeLogArgument(
            f"R(t)/Var = {ratio:.6g} is outside (0, 1); lag too large or series too short")
    return -math.log(ratio) / t


def fs_map(x, y, z, w, t, variant=FSVariant.POSITIVE_MOMENTS):
    """Simplified inverse map when ``kappa = beta / (beta - 2)``."""
    variant = FSVariant.parse(variant)
    if not y > 1.0:
        raise MeanAtMostOne(f"empirical mean {y:.6g} <= 1: F-distribution mean must exceed 1")
    beta = 2.0 * y / (y - 1.0)
    if variant is FSVariant.POSITIVE_MOMENTS:
        den = z * (2.0 - y) - y * y
        if abs(den) <= 1e-12 * (abs(z) * (2.0 + abs(y)) + y * y):
            raise DegenerateDenominator("alpha denominator m_2 (2 - m_1) - m_1^2 vanishes")
        alpha = 2.0 * y * y / den
    else:
        if not x > 1.0:
            raise MeanAtMostOne(f"empirical inverse mean {x:.6g} <= 1: E[1/F] must exceed 1")
        alpha = 2.0 * x / (x - 1.0)
    kappa = beta / (beta - 2.0)
    return alpha, beta, kappa, _theta(z, y, w, t)


# ---------------------------------------------------------------------------
# long-run covariance


def autocovariances(series, max_lag):
    """Cross-autocovariances ``G[h, i, j] = (1/N) sum_t a_i(t + h) a_j(t)`` of centred series.

    ``series`` has shape ``(k, N)``; returns shape ``(max_lag + 1, k, k)``.
    """
    a = np.atleast_2d(np.asarray(series, dtype=float))
    k, n = a.shape
    a = a - a.mean(axis=1, keepdims=True)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    F = np.fft.rfft(a, nfft, axis=1)
    out = np.empty((max_lag + 1, k, k))
    for i in range(k):
        for j in range(i, k):
            c = np.fft.irfft(F[i] * np.conj(F[j]), nfft)
            out[:, i, j] = c[:max_lag + 1] / n
            if i != j:
                # G_ij(-h) = G_ji(h) sits at the end of the circular buffer
                out[:, j, i] = np.concatenate(([c[0]], c[::-1][:max_lag])) / n
    return out


def long_run_covariance(series, n_lags, step=1.0, kernel_width=None):
    """Bartlett-tapered long-run covariance of the rows of ``series``.

    ``sum_{|h| <= n_lags} (1 - |h| / width) G(h) * step`` with
    ``width = n_lags + 1`` unless given.
    """
    a = np.atleast_2d(np.asarray(series, dtype=float))
    if n_lags < 0 or n_lags >= a.shape[1]:
        raise DomainError(f"lag window {n_lags} exceeds series length {a.shape[1]}")
    width = n_lags + 1 if kernel_width is None else kernel_width
    G = autocovariances(a, n_lags)
    S = G[0].copy()
    for h in range(1, n_lags + 1):
        wgt = 1.0 - h / width
        S += wgt * (G[h] + G[h].T)
    S = 0.5 * (S + S.T)
    return S * step


def _window_lags(obs: ObservationSet, truncation):
    h = obs.spacing
    if obs.mode is Mode.DISCRETE:
        L = int(math.ceil(truncation - 1e-9))
        if L < 1:
            raise DomainError("truncation L must be >= 1")
        return L, L + 1, 1.0
    K = int(round(truncation / h))
    if K < 1:
        raise DomainError("truncation window shorter than the observation spacing")
    return K, K, h


def long_run_variance(obs: ObservationSet, f_exponents, truncation) -> np.ndarray:
    """Long-run covariance matrix of ``(X^u1, ..., X^uk)``.

    Discrete mode: Bartlett-weighted sum of sample autocovariances over integer
    lags ``|l| <= L``. Continuous mode: Bartlett-weighted integral over
    ``|t| <= L`` (time units), sampled at the observation spacing.
    """
    exps = list(np.atleast_1d(f_exponents))
    n_lags, width, step = _window_lags(obs, truncation)
    if n_lags >= len(obs):
        raise DomainError(f"lag window {truncation} exceeds the series span")
    series = np.vstack([obs.values ** float(u) for u in exps])
    return long_run_covariance(series, n_lags, step, width)


# ---------------------------------------------------------------------------
# delta method


def asymptotic_covariance(moments, sigma, lag, mapping=None, rel_step=1e-6):
    """``D Sigma D^T`` with ``D`` the central-difference Jacobian of ``mapping``.

    ``moments`` is ``(m_-1, m_1, m_2, R(t))`` and ``sigma`` their 4x4
    long-run covariance.
    """
    mapping = general_map if mapping is None else mapping
    m = np.asarray(moments, dtype=float)
    D = np.empty((4, 4))
    for j in range(4):
        hj = rel_step * max(abs(m[j]), 1e-8)
        up, dn = m.copy(), m.copy()
        up[j] += hj
        dn[j] -= hj
        try:
            D[:, j] = (np.array(mapping(*up, lag)) - np.array(mapping(*dn, lag))) / (2.0 * hj)
        except NumericalDegeneracyError as exc:
            raise type(exc)(f"G-map degenerate near the evaluation point: {exc}") from exc
    cov = D @ np.asarray(sigma, dtype=float) @ D.T
    return 0.5 * (cov + cov.T), D


# ---------------------------------------------------------------------------
# estimators


def provisional_lag(obs: ObservationSet, max_lags=None) -> float:
    """First multiple of the spacing at which the sample ACF drops to ``1/e``.

    Serves as ``1 / theta_provisional`` for the default lag and truncation.
    """
    v = obs.values - obs.values.mean()
    n = v.size
    max_lags = min(n - 2, max_lags or n // 4)
    if max_lags < 1:
        raise DomainError("series too short to choose a lag")
    G = autocovariances(v, max_lags)[:, 0, 0]
    rho = G / G[0]
    below = np.flatnonzero(rho <= math.exp(-1.0))
    k = int(below[0]) if below.size else max_lags
    return max(k, 1) * obs.spacing


def _moment_series(obs, k):
    n = obs.values.size - k
    x = obs.values
    return np.vstack([1.0 / x[:n], x[:n], x[:n] ** 2, x[:n] * x[k:]])


def _estimate(obs, lag, truncation, mapping, variant, warn):
    warnings = []
    if lag is None:
        first = provisional_lag(obs)
        mom = _moments(obs, first)
        try:
            theta0 = mapping(*mom, first)[3]
        except NumericalDegeneracyError:
            theta0 = 1.0 / first
        h = obs.spacing
        lag = max(1, int(round(1.0 / (theta0 * h)))) * h
        warnings.append(f"lag chosen from provisional theta {theta0:.6g}")
    else:
        theta0 = None
    mom = _moments(obs, lag)
    est = mapping(*mom, lag)
    if truncation is None:
        th = est[3] if theta0 is None else theta0
        truncation = math.ceil(10.0 / th) if obs.mode is Mode.CONTINUOUS else math.ceil(10.0 / (th * obs.spacing))
    k = _lag_steps(obs, lag)
    n_lags, width, step = _window_lags(obs, truncation)
    series = _moment_series(obs, k)
    if n_lags >= series.shape[1]:
        raise DomainError(f"lag window {truncation} exceeds the series span")
    sig_f = long_run_covariance(series, n_lags, step, width)
    J = np.eye(4)
    J[3, 1] = -2.0 * mom[1]
    sigma = J @ sig_f @ J.T
    cov, _ = asymptotic_covariance(mom, sigma, lag, mapping)
    n_eff = obs.span if obs.mode is Mode.CONTINUOUS else float(len(obs))
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None) / n_eff)
    warnings.extend(warn(est, obs.mode))
    return EstimateReport(
        alpha_hat=est[0], beta_hat=est[1], kappa_hat=est[2], theta_hat=est[3],
        moments_used={"m_minus1": mom[0], "m_1": mom[1], "m_2": mom[2], "R_t": mom[3]},
        lag_t=float(lag), asymptotic_cov=cov, standard_errors=se, sample_size_effective=n_eff,
        mode=obs.mode, truncation=float(truncation), variant=variant, warnings=warnings)


def _moments(obs, lag):
    return (empirical_moment(obs, -1), empirical_moment(obs, 1), empirical_moment(obs, 2),
            empirical_covariance(obs, lag))


def _general_warnings(est, mode):
    out = []
    alpha, beta = est[0], est[1]
    if beta <= 4:
        out.append(f"beta_hat={beta:.4g} <= 4: second moment infinite, estimates unreliable")
    elif beta <= 8:
        out.append(f"beta_hat={beta:.4g} <= 8: asymptotic normality not guaranteed")
    if mode is Mode.DISCRETE and alpha <= 4:
        out.append(f"alpha_hat={alpha:.4g} <= 4: discrete-time asymptotic normality not guaranteed")
    return out


def estimate_params_general(obs: ObservationSet, lag=None, truncation=None) -> EstimateReport:
    """Method-of-moments estimate of ``(alpha, beta, kappa, theta)``.

    Parameters
    ----------
    obs : ObservationSet
        Discrete or continuous observations.
    lag : float, optional
        Lag ``t`` of the autocovariance, a multiple of the spacing. Defaults to
        ``1 / theta_provisional`` rounded to the grid.
    truncation : float, optional
        Bartlett window ``L`` (time units in continuous mode, lags in discrete
        mode). Defaults to ``ceil(10 / theta_provisional)``.
    """
    return _estimate(obs, lag, truncation, general_map, "general", _general_warnings)


def estimate_params_fs(obs: ObservationSet, lag=None, variant=FSVariant.POSITIVE_MOMENTS,
                       truncation=None) -> EstimateReport:
    """Estimates under the restriction ``kappa = beta / (beta - 2)``."""
    variant = FSVariant.parse(variant)

    def mapping(x, y, z, w, t):
        return fs_map(x, y, z, w, t, variant)

    return _estimate(obs, lag, truncation, mapping, variant.value, _general_warnings)
