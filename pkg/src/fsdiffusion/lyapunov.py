"""Lyapunov weight functions, the generator, and grid-based drift certificates.

The weight ``phi`` behaves like ``x^-gamma`` near zero and ``x^delta`` near
infinity. Between the two power laws it is glued with quintic smoothsteps so
that it is C^2, monotone on each side, and never below one:

* ``left(x) = 1 + (1 - S_L(x)) (x^-gamma - 1)`` with ``S_L`` rising on the left knots,
* ``phi(x) = (1 - S_R(x)) left(x) + S_R(x) x^delta`` with ``S_R`` rising on the right knots.

With left knots inside ``(0, 1]`` and right knots inside ``[1, 2]`` the first
summand vanishes on ``[2, inf)`` and the second on ``(0, 1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core import Parameters, drift, sigma_squared
from .errors import DomainError, DriftConditionFailure, WindowError

__all__ = [
    "WeightSpec",
    "DriftCertificate",
    "ModifiedDriftCertificate",
    "default_grid",
    "lyapunov_phi",
    "generator_apply",
    "generator_right_tail",
    "generator_left_tail",
    "check_drift_condition",
    "check_modified_drift_condition",
]


@dataclass(frozen=True)
class WeightSpec:
    """Tail exponents and knot intervals of a Lyapunov weight ``phi``."""

    gamma: float = 0.0
    delta: float = 0.0
    left_knots: tuple = (0.5, 1.0)
    right_knots: tuple = (1.0, 2.0)

    def __post_init__(self):
        if self.gamma < 0 or self.delta < 0:
            raise DomainError("gamma and delta must be nonnegative")
        a, b = self.left_knots
        c, d = self.right_knots
        if not (0 < a < b <= 1.0):
            raise DomainError(f"left knots must satisfy 0 < a < b <= 1, got {self.left_knots}")
        if not (1.0 <= c < d <= 2.0):
            raise DomainError(f"right knots must satisfy 1 <= c < d <= 2, got {self.right_knots}")


@dataclass
class DriftCertificate:
    """Certificate of ``A phi <= -c phi + C 1_[u,v]`` on a grid."""

    c: float
    C: float
    u: float
    v: float
    grid_spec: dict
    margin: float
    weight: WeightSpec = None

    def to_dict(self):
        return {"c": self.c, "C": self.C, "u": self.u, "v": self.v,
                "grid_spec": self.grid_spec, "margin": self.margin,
                "gamma": self.weight.gamma if self.weight else None,
                "delta": self.weight.delta if self.weight else None}


@dataclass
class ModifiedDriftCertificate:
    """Certificate of ``A psi <= -c' phi^(1+eps) + C'`` on a grid."""

    c_prime: float
    C_prime: float
    epsilon: float
    grid_spec: dict
    margin: float
    psi_certificate: DriftCertificate = field(default=None, repr=False)

    def to_dict(self):
        return {"c_prime": self.c_prime, "C_prime": self.C_prime, "epsilon": self.epsilon,
                "grid_spec": self.grid_spec, "margin": self.margin,
                "psi_certificate": self.psi_certificate.to_dict() if self.psi_certificate else None}


def default_grid(lo=1e-6, hi=1e6, n=2000):
    return np.logspace(np.log10(lo), np.log10(hi), n)


def _smoothstep(x, lo, hi):
    """Quintic smoothstep and its first two derivatives in ``x``."""
    w = hi - lo
    s = np.clip((x - lo) / w, 0.0, 1.0)
    S = s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)
    dS = 30.0 * s * s * (1.0 - s) ** 2 / w
    d2S = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (w * w)
    return S, dS, d2S


def lyapunov_phi(w: WeightSpec, x):
    """Evaluate ``phi``, ``phi'`` and ``phi''`` at ``x > 0``.

    Returns
    -------
    tuple of ndarray
        ``(phi, dphi, d2phi)`` with the shape of ``x``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise DomainError("state must be strictly positive")
    g, d = float(w.gamma), float(w.delta)
    a_l, b_l = w.left_knots
    a_r, b_r = w.right_knots

    lp = xa ** -g
    lp1 = -g * lp / xa
    lp2 = g * (g + 1.0) * lp / (xa * xa)
    rp = xa ** d
    rp1 = d * rp / xa
    rp2 = d * (d - 1.0) * rp / (xa * xa)

    SL, dSL, d2SL = _smoothstep(xa, a_l, b_l)
    f, f1, f2 = lp - 1.0, lp1, lp2
    left = 1.0 + (1.0 - SL) * f
    left1 = -dSL * f + (1.0 - SL) * f1
    left2 = -d2SL * f - 2.0 * dSL * f1 + (1.0 - SL) * f2

    SR, dSR, d2SR = _smoothstep(xa, a_r, b_r)
    h, h1, h2 = rp - left, rp1 - left1, rp2 - left2
    phi = left + SR * h
    dphi = left1 + dSR * h + SR * h1
    d2phi = left2 + d2SR * h + 2.0 * dSR * h1 + SR * h2

    # exact pure powers outside the knots
    lo = xa <= a_l
    hi = xa >= b_r
    phi = np.where(lo, lp, np.where(hi, rp, phi))
    dphi = np.where(lo, lp1, np.where(hi, rp1, dphi))
    d2phi = np.where(lo, lp2, np.where(hi, rp2, d2phi))
    if np.ndim(x) == 0:
        return float(phi), float(dphi), float(d2phi)
    return phi, dphi, d2phi


def generator_apply(p: Parameters, w: WeightSpec, x):
    """``A phi = a phi' + sigma^2 phi'' / 2``."""
    _, d1, d2 = lyapunov_phi(w, x)
    out = drift(p, x) * d1 + 0.5 * sigma_squared(p, x) * d2
    return float(out) if np.ndim(x) == 0 else out


def generator_right_tail(p: Parameters, delta, x):
    """Closed form of ``A x^delta``."""
    xa = np.asarray(x, dtype=float)
    bracket = (1.0 - p.kappa / xa) - (delta - 1.0) * (
        1.0 / (p.beta / 2.0 - 1.0) + p.kappa / (xa * p.alpha / 2.0))
    return -p.theta * delta * xa ** delta * bracket


def generator_left_tail(p: Parameters, gamma, x):
    """Closed form of ``A x^-gamma``."""
    xa = np.asarray(x, dtype=float)
    bracket = (p.kappa / xa - 1.0) - (gamma + 1.0) * (
        1.0 / (p.beta / 2.0 - 1.0) + p.kappa / (xa * p.alpha / 2.0))
    return -p.theta * gamma * xa ** -gamma * bracket


def _grid_spec(grid):
    return {"lo": float(grid[0]), "hi": float(grid[-1]), "n": int(grid.size), "spacing": "log"}


def _tail_masks(grid, tail_decades):
    left = grid <= grid[0] * 10.0 ** tail_decades
    right = grid >= grid[-1] / 10.0 ** tail_decades
    return left, right


def _extent(grid, mask):
    if not mask.any():
        return None
    pts = grid[mask]
    return (float(pts.min()), float(pts.max()))


def check_drift_condition(p: Parameters, w: WeightSpec, grid=None, tail_decades=1.0,
                          safety=1e-3) -> DriftCertificate:
    """Search for ``(c, C, u, v)`` with ``A phi <= -c phi + C 1_[u,v]`` on ``grid``.

    ``c`` is the largest rate (shrunk by ``safety``) for which ``A phi + c phi``
    is nonpositive on the outermost ``tail_decades`` of the grid at both ends;
    ``[u, v]`` is the hull of the points where it is positive and ``C`` its
    maximum there.

    Raises
    ------
    DriftConditionFailure
        If a tail breaks the inequality, or the exponents are outside
        ``gamma < alpha/2 - 1``, ``delta < beta/2``. ``tail`` names the side.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    left_bad_window = not (w.gamma < p.alpha / 2.0 - 1.0)
    right_bad_window = not (w.delta < p.beta / 2.0)

    phi, _, _ = lyapunov_phi(w, grid)
    Aphi = generator_apply(p, w, grid)
    r = Aphi / phi
    lmask, rmask = _tail_masks(grid, tail_decades)
    c_left = float(np.min(-r[lmask]))
    c_right = float(np.min(-r[rmask]))

    fail_left = c_left <= 0 or left_bad_window
    fail_right = c_right <= 0 or right_bad_window
    if fail_left or fail_right:
        tail = "both" if (fail_left and fail_right) else ("left" if fail_left else "right")
        parts = []
        if fail_left:
            parts.append(f"left tail: A phi / phi reaches {-c_left:.4g} >= 0 near x -> 0"
                         if c_left <= 0 else "left tail: grid search inconclusive")
            if left_bad_window:
                parts.append(f"window violated: gamma={w.gamma} >= alpha/2 - 1 = {p.alpha / 2 - 1}")
        if fail_right:
            parts.append(f"right tail: A phi / phi reaches {-c_right:.4g} >= 0 near x -> inf"
                         if c_right <= 0 else "right tail: grid search inconclusive")
            if right_bad_window:
                parts.append(f"window violated: delta={w.delta} >= beta/2 = {p.beta / 2}")
        region = None
        if tail == "left":
            region = _extent(grid, lmask & (r >= 0))
        elif tail == "right":
            region = _extent(grid, rmask & (r >= 0))
        raise DriftConditionFailure("; ".join(parts), tail=tail, region=region,
                                    window_violated=left_bad_window or right_bad_window)

    c = (1.0 - safety) * min(c_left, c_right)
    excess = Aphi + c * phi
    bad = np.flatnonzero(excess > 0)
    if bad.size:
        i0, i1 = bad[0], bad[-1]
    else:
        i0 = i1 = int(np.argmax(excess))
    # one cell of padding so the positive region between grid points is covered
    i0 = max(i0 - 1, 0)
    i1 = min(max(i1 + 1, i0 + 1), grid.size - 1)
    u, v = float(grid[i0]), float(grid[i1])
    C = max(0.0, _peak(lambda x: generator_apply(p, w, x) + c * lyapunov_phi(w, x)[0],
                       grid[i0:i1 + 1]))
    inside = (grid >= u) & (grid <= v)
    slack = C * inside - excess
    return DriftCertificate(c=c, C=C, u=u, v=v, grid_spec=_grid_spec(grid),
                            margin=float(np.min(slack)), weight=w)


def _peak(f, points):
    """Maximum of ``f`` over ``points``, polished by bounded search in ``log x``."""
    fine = _refine(points, 8)
    vals = f(fine)
    j = int(np.argmax(vals))
    best = float(vals[j])
    lo, hi = fine[max(j - 1, 0)], fine[min(j + 1, fine.size - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda s: -float(f(math.exp(s))), bounds=(math.log(lo), math.log(hi)),
                                       method="bounded", options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


def _refine(points, k):
    """Insert ``k - 1`` geometric midpoints in every cell of ``points``."""
    if points.size < 2:
        return points
    s = np.linspace(0.0, 1.0, k + 1)[:-1]
    lp = np.log(points)
    inner = (lp[:-1, None] + np.diff(lp)[:, None] * s[None, :]).ravel()
    return np.exp(np.append(inner, lp[-1]))


def _modified_windows(p, w, wp):
    a2, b2 = p.alpha / 2.0, p.beta / 2.0
    if not w.gamma < a2:
        raise WindowError(f"gamma={w.gamma} violates gamma < alpha/2 = {a2}", "gamma < alpha/2")
    if not w.delta < b2:
        raise WindowError(f"delta={w.delta} violates delta < beta/2 = {b2}", "delta < beta/2")
    lo = max(w.gamma - 1.0, 0.0)
    if not (lo < wp.gamma < a2 - 1.0):
        raise WindowError(
            f"gamma'={wp.gamma} outside ((gamma-1) v 0, alpha/2 - 1) = ({lo}, {a2 - 1.0})",
            "(gamma-1) v 0 < gamma' < alpha/2 - 1")
    if not (w.delta < wp.delta < b2):
        raise WindowError(f"delta'={wp.delta} outside (delta, beta/2) = ({w.delta}, {b2})",
                          "delta < delta' < beta/2")


def max_epsilon(w: WeightSpec, wp: WeightSpec) -> float:
    """Largest ``eps`` compatible with the tail powers of ``psi`` and ``phi``."""
    bounds = []
    if w.delta > 0:
        bounds.append(wp.delta / w.delta - 1.0)
    if w.gamma > 0:
        bounds.append((wp.gamma + 1.0) / w.gamma - 1.0)
    return min(bounds) if bounds else np.inf


def check_modified_drift_condition(p: Parameters, w: WeightSpec, wp: WeightSpec, grid=None,
                                   epsilon=None, tail_decades=1.0,
                                   safety=1e-3) -> ModifiedDriftCertificate:
    """Search for ``(c', C', eps)`` with ``A psi <= -c' phi^(1+eps) + C'`` on ``grid``.

    ``psi`` is the weight described by ``wp``. Without an explicit ``epsilon``
    half of :func:`max_epsilon` is used (or 1 when ``phi`` is constant).

    Raises
    ------
    WindowError
        If ``gamma >= alpha/2``, ``delta >= beta/2`` or ``(gamma', delta')`` are
        outside their windows.
    DriftConditionFailure
        If no positive ``c'`` exists on the grid tails.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    _modified_windows(p, w, wp)
    if epsilon is None:
        emax = max_epsilon(w, wp)
        epsilon = 1.0 if not np.isfinite(emax) else 0.5 * emax
    if epsilon < 0:
        raise DomainError("epsilon must be nonnegative")

    psi_cert = check_drift_condition(p, wp, grid, tail_decades=tail_decades, safety=safety)
    phi, _, _ = lyapunov_phi(w, grid)
    target = phi ** (1.0 + epsilon)
    Apsi = generator_apply(p, wp, grid)
    q = -Apsi / target
    lmask, rmask = _tail_masks(grid, tail_decades)
    c_left, c_right = float(np.min(q[lmask])), float(np.min(q[rmask]))
    if c_left <= 0 or c_right <= 0:
        tail = "both" if (c_left <= 0 and c_right <= 0) else ("left" if c_left <= 0 else "right")
        mask = lmask if tail == "left" else rmask
        raise DriftConditionFailure(
            f"{tail} tail: A psi + c' phi^(1+eps) cannot be made nonpositive (eps={epsilon})",
            tail=tail, region=_extent(grid, mask & (q <= 0)))
    c_prime = (1.0 - safety) * min(c_left, c_right)
    excess = Apsi + c_prime * target
    C_prime = max(0.0, _peak(
        lambda x: generator_apply(p, wp, x) + c_prime * lyapunov_phi(w, x)[0] ** (1.0 + epsilon), grid))
    return ModifiedDriftCertificate(c_prime=c_prime, C_prime=C_prime, epsilon=float(epsilon),
                                    grid_spec=_grid_spec(grid),
                                    margin=float(np.min(C_prime - excess)),
                                    psi_certificate=psi_cert)
