"""Closed-form quantities of the Fisher-Snedecor diffusion.

The process solves

    dX = -theta (X - kappa) dt + sqrt(2 theta X (X / (beta/2 - 1) + kappa / (alpha/2))) dW

on ``(0, inf)``. Its invariant law is a scaled F(alpha, beta) distribution with
scale parameter ``rho = kappa * (beta - 2)``, so that the stationary mean is
``kappa`` (forced by the linear drift) and ``kappa = beta / (beta - 2)`` gives
the textbook Fisher-Snedecor density.

All functions accept scalars or numpy arrays for the state ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, MomentDivergenceError, ParameterError

__all__ = [
    "Parameters",
    "drift",
    "sigma_squared",
    "sigma_squared_prime",
    "scale_density",
    "invariant_density",
    "invariant_logpdf",
    "invariant_cdf",
    "invariant_ppf",
    "fisher_snedecor_density",
    "theoretical_moment",
    "stationary_variance",
    "autocovariance",
    "autocorrelation",
]


@dataclass(frozen=True)
class Parameters:
    """Parameter quadruple ``(theta, kappa, alpha, beta)``.

    Parameters
    ----------
    theta : float
        Mean-reversion rate (1/time), ``> 0``.
    kappa : float
        Mean-reversion level (state units), ``> 0``. Equals the stationary mean.
    alpha, beta : float
        Degrees of freedom of the invariant F law, both ``> 2``.
    """

    theta: float
    kappa: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("theta", "kappa", "alpha", "beta"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ParameterError(f"{name} must be finite, got {v!r}")
        if self.theta <= 0:
            raise ParameterError(f"theta > 0 required, got {self.theta}")
        if self.kappa <= 0:
            raise ParameterError(f"kappa > 0 required, got {self.kappa}")
        if self.alpha <= 2:
            raise ParameterError(f"alpha > 2 required, got {self.alpha}")
        if self.beta <= 2:
            raise ParameterError(f"beta > 2 required, got {self.beta}")

    @property
    def rho(self) -> float:
        """Scale of the invariant law, ``kappa * (beta - 2)``."""
        return self.kappa * (self.beta - 2.0)

    @classmethod
    def fisher_snedecor(cls, alpha, beta, theta=1.0):
        """Parameters whose invariant law is exactly F(alpha, beta)."""
        return cls(theta=theta, kappa=beta / (beta - 2.0), alpha=alpha, beta=beta)

    def to_dict(self):
        return {"theta": self.theta, "kappa": self.kappa,
                "alpha": self.alpha, "beta": self.beta}


def _positive(x):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("state must be strictly positive")
    return arr


def _out(arr, x):
    return float(arr) if np.ndim(x) == 0 else arr


def drift(p: Parameters, x):
    """Drift coefficient ``-theta (x - kappa)``."""
    xa = _positive(x)
    return _out(-p.theta * (xa - p.kappa), x)


def sigma_squared(p: Parameters, x):
    """Squared diffusion coefficient ``2 theta x (x/(beta/2-1) + kappa/(alpha/2))``."""
    xa = _positive(x)
    return _out(2.0 * p.theta * xa * (xa / (p.beta / 2.0 - 1.0) + p.kappa / (p.alpha / 2.0)), x)


def sigma_squared_prime(p: Parameters, x):
    """Derivative of :func:`sigma_squared` in ``x``."""
    xa = _positive(x)
    return _out(2.0 * p.theta * (2.0 * xa / (p.beta / 2.0 - 1.0) + p.kappa / (p.alpha / 2.0)), x)


def scale_density(p: Parameters, x):
    """Unnormalised scale density ``x^(-a/2) (x + kappa(b-2)/a)^(a/2 + b/2 - 1)``.

    The arbitrary multiplicative constant is fixed to one.
    """
    xa = _positive(x)
    a, b = p.alpha, p.beta
    logs = -0.5 * a * np.log(xa) + (0.5 * a + 0.5 * b - 1.0) * np.log(xa + p.rho / a)
    return _out(np.exp(logs), x)


def invariant_logpdf(p: Parameters, x):
    xa = _positive(x)
    a, b, rho = p.alpha, p.beta, p.rho
    ax = a * xa
    log_den = np.log(ax + rho)
    out = (-np.log(xa) - special.betaln(a / 2.0, b / 2.0)
           + 0.5 * a * (np.log(ax) - log_den) + 0.5 * b * (np.log(rho) - log_den))
    return _out(out, x)


def invariant_density(p: Parameters, x):
    """Stationary density, a scaled F(alpha, beta) law with scale ``rho / beta``."""
    return _out(np.exp(invariant_logpdf(p, x)), x)


def fisher_snedecor_density(alpha, beta, x):
    """The F(alpha, beta) density, written in its classical closed form."""
    xa = _positive(x)
    ax = alpha * xa
    out = (1.0 / (xa * special.beta(alpha / 2.0, beta / 2.0))
           * (ax / (ax + beta)) ** (alpha / 2.0) * (beta / (ax + beta)) ** (beta / 2.0))
    return _out(out, x)


def invariant_cdf(p: Parameters, x):
    """Stationary CDF via the regularised incomplete beta function."""
    xa = _positive(x)
    ax = p.alpha * xa
    return _out(special.betainc(p.alpha / 2.0, p.beta / 2.0, ax / (ax + p.rho)), x)


def invariant_ppf(p: Parameters, q):
    """Quantile function of the stationary law; ``q`` in ``[0, 1]``."""
    qa = np.asarray(q, dtype=float)
    if np.any((qa < 0) | (qa > 1)):
        raise DomainError("quantile level must lie in [0, 1]")
    u = special.betaincinv(p.alpha / 2.0, p.beta / 2.0, qa)
    with np.errstate(divide="ignore"):
        out = p.rho * u / (p.alpha * (1.0 - u))
    return _out(out, q)


def theoretical_moment(p: Parameters, upsilon):
    """Stationary moment ``E X^upsilon`` for ``-alpha/2 < upsilon < beta/2``.

    ``(rho/alpha)^u Gamma(alpha/2 + u) Gamma(beta/2 - u) / (Gamma(alpha/2) Gamma(beta/2))``,
    evaluated in log space.
    """
    u = float(upsilon)
    a2, b2 = p.alpha / 2.0, p.beta / 2.0
    if not (-a2 < u < b2):
        raise MomentDivergenceError(
            f"moment of order {u} diverges: need {-a2} < upsilon < {b2}")
    if u == 0.0:
        return 1.0
    logm = (u * np.log(p.rho / p.alpha) + special.gammaln(a2 + u) + special.gammaln(b2 - u)
            - special.gammaln(a2) - special.gammaln(b2))
    return float(np.exp(logm))


def stationary_variance(p: Parameters) -> float:
    """``2 kappa^2 (alpha + beta - 2) / (alpha (beta - 4))``; needs ``beta > 4``."""
    if p.beta <= 4:
        raise MomentDivergenceError(f"stationary variance is infinite for beta={p.beta} <= 4")
    return 2.0 * p.kappa ** 2 * (p.alpha + p.beta - 2.0) / (p.alpha * (p.beta - 4.0))


def autocovariance(p: Parameters, t):
    """Stationary autocovariance ``Var * exp(-theta t)`` at lag ``t >= 0``."""
    ta = np.asarray(t, dtype=float)
    if np.any(ta < 0):
        raise DomainError("lag must be nonnegative")
    out = stationary_variance(p) * np.exp(-p.theta * ta)
    return _out(out, t)


def autocorrelation(p: Parameters, t):
    ta = np.asarray(t, dtype=float)
    if np.any(ta < 0):
        raise DomainError("lag must be nonnegative")
    return _out(np.exp(-p.theta * ta), t)
