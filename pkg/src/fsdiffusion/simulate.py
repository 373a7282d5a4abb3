"""Stationary sampling and positivity-preserving path simulation.

Every path draws from its own Philox streams keyed by ``(base_seed, path_index)``,
so ensembles are bit-identical whatever the number of worker threads.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numba as nb
import numpy as np

from .core import Parameters
from .errors import DomainError, StabilityError

__all__ = [
    "Scheme",
    "InitialLaw",
    "Path",
    "FLOOR_EPS",
    "path_streams",
    "sample_invariant",
    "simulate_path",
    "simulate_ensemble",
    "simulate_marginals",
    "ensemble_digest",
    "path_functionals",
    "PathFunctionals",
    "default_threads",
]

FLOOR_EPS = 1e-12
MAX_RETRIES = 100
_CHUNK = 1 << 16
_POOL = 4096


class Scheme(str, Enum):
    EULER_FULL_TRUNCATION = "EulerFullTruncation"
    MILSTEIN_RETRY = "MilsteinRetry"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).replace("-", "").replace("_", "").lower()
        for s in cls:
            if s.value.lower() == key or s.name.replace("_", "").lower() == key:
                return s
        aliases = {"euler": cls.EULER_FULL_TRUNCATION, "milstein": cls.MILSTEIN_RETRY}
        if key in aliases:
            return aliases[key]
        raise DomainError(f"unknown scheme {value!r}")


@dataclass(frozen=True)
class InitialLaw:
    """Distribution of ``X_0``: ``dirac``, ``stationary``, ``lognormal`` or ``custom``."""

    kind: str = "stationary"
    x0: float = None
    m: float = None
    s: float = None
    samples: tuple = None

    def __post_init__(self):
        if self.kind == "dirac":
            if self.x0 is None or not self.x0 > 0:
                raise DomainError("Dirac initial law requires x0 > 0")
        elif self.kind == "lognormal":
            if self.m is None or self.s is None or self.s < 0:
                raise DomainError("LogNormal initial law requires m and s >= 0")
        elif self.kind == "custom":
            if not self.samples or min(self.samples) <= 0:
                raise DomainError("Custom initial law requires a nonempty list of positive samples")
        elif self.kind != "stationary":
            raise DomainError(f"unknown initial law {self.kind!r}")

    @classmethod
    def dirac(cls, x0):
        return cls("dirac", x0=float(x0))

    @classmethod
    def stationary(cls):
        return cls("stationary")

    @classmethod
    def lognormal(cls, m, s):
        return cls("lognormal", m=float(m), s=float(s))

    @classmethod
    def custom(cls, samples):
        return cls("custom", samples=tuple(float(v) for v in samples))

    def sample(self, p: Parameters, rng: np.random.Generator) -> float:
        if self.kind == "dirac":
            return self.x0
        if self.kind == "stationary":
            return float(sample_invariant(p, rng))
        if self.kind == "lognormal":
            return float(np.exp(self.m + self.s * rng.standard_normal()))
        return float(self.samples[rng.integers(len(self.samples))])

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "dirac":
            d["x0"] = self.x0
        elif self.kind == "lognormal":
            d.update(m=self.m, s=self.s)
        elif self.kind == "custom":
            d["samples"] = list(self.samples)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", "stationary")
        if kind == "custom":
            return cls.custom(d["samples"])
        return cls(kind, **d)


@dataclass
class Path:
    """A simulated trajectory on the uniform grid ``t0 + k dt``."""

    t0: float
    dt: float
    values: np.ndarray
    scheme: Scheme
    seed: int
    path_index: int
    params: Parameters = None
    clamp_events: int = 0
    exhausted_retries: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.values.size)

    @property
    def horizon(self):
        return self.dt * (self.values.size - 1)


def path_streams(base_seed, path_index):
    """Independent generators ``(init, increments, retries)`` for one ensemble slot."""
    return tuple(
        np.random.Generator(np.random.Philox(np.random.SeedSequence(int(base_seed),
                                                                    spawn_key=(int(path_index), k))))
        for k in range(3))


def default_threads():
    env = os.environ.get("FS_DIFFUSION_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def sample_invariant(p: Parameters, rng: np.random.Generator, size=None):
    """Exact draw(s) from the stationary law: ``(rho/beta) F`` with ``F ~ F(alpha, beta)``."""
    ga = rng.standard_gamma(p.alpha / 2.0, size)
    gb = rng.standard_gamma(p.beta / 2.0, size)
    f = (ga / (p.alpha / 2.0)) / (gb / (p.beta / 2.0))
    return (p.rho / p.beta) * f


@nb.njit(nogil=True, cache=True)
def _kernel(x, z, start, out, pool, pool_pos, theta, kappa, c_quad, c_lin, sqdt, dt,
            milstein, floor, max_retries, sigma_scale, counters):
    """Advance over ``z[start:]`` writing states to ``out``.

    Returns ``(next_index, x, pool_pos)``; ``next_index < len(z)`` means the
    retry pool ran dry and must be refilled before resuming.
    """
    n = z.shape[0]
    npool = pool.shape[0]
    s2scale = sigma_scale * sigma_scale
    for i in range(start, n):
        xi = z[i]
        a = -theta * (x - kappa)
        s2 = s2scale * 2.0 * theta * x * (x * c_quad + c_lin)
        sig = np.sqrt(s2)
        if milstein:
            ds2 = s2scale * 2.0 * theta * (2.0 * x * c_quad + c_lin)
            y = x + a * dt + sig * sqdt * xi + 0.25 * ds2 * dt * (xi * xi - 1.0)
            tries = 0
            while y <= 0.0 and tries < max_retries:
                if pool_pos >= npool:
                    return i, x, pool_pos
                xi = pool[pool_pos]
                pool_pos += 1
                tries += 1
                y = x + a * dt + sig * sqdt * xi + 0.25 * ds2 * dt * (xi * xi - 1.0)
            if y <= 0.0:
                counters[1] += 1
        else:
            y = x + a * dt + sig * sqdt * xi
        if y < floor:
            y = floor
            counters[0] += 1
        x = y
        out[i] = x
    return n, x, pool_pos


class _Stepper:
    def __init__(self, p, dt, scheme, sigma_scale=1.0):
        self.p = p
        self.dt = float(dt)
        self.milstein = Scheme.parse(scheme) is Scheme.MILSTEIN_RETRY
        self.c_quad = 1.0 / (p.beta / 2.0 - 1.0)
        self.c_lin = p.kappa / (p.alpha / 2.0)
        self.sigma_scale = float(sigma_scale)
        self.counters = np.zeros(2, dtype=np.int64)

    def run(self, x, n_steps, zrng, rrng, record):
        """Run ``n_steps`` steps from ``x``; ``record(offset, chunk)`` sees each state chunk."""
        pool = rrng.standard_normal(_POOL)
        pool_pos = 0
        done = 0
        buf = np.empty(_CHUNK)
        while done < n_steps:
            m = min(_CHUNK, n_steps - done)
            z = zrng.standard_normal(m)
            out = buf[:m]
            i = 0
            while i < m:
                i, x, pool_pos = _kernel(x, z, i, out, pool, pool_pos, self.p.theta, self.p.kappa,
                                         self.c_quad, self.c_lin, np.sqrt(self.dt), self.dt,
                                         self.milstein, FLOOR_EPS, MAX_RETRIES, self.sigma_scale,
                                         self.counters)
                if i < m:
                    pool = rrng.standard_normal(_POOL)
                    pool_pos = 0
            record(done, out)
            done += m
        return x


def _check_step(p, dt, T):
    if not dt > 0:
        raise DomainError("dt must be positive")
    if not T >= dt:
        raise DomainError("horizon T must be at least dt")
    if not p.theta * dt < 0.5:
        raise StabilityError(f"stability guard violated: theta*dt = {p.theta * dt} >= 0.5")


def _n_steps(dt, T):
    return int(np.floor(T / dt + 1e-9))


def simulate_path(p: Parameters, init: InitialLaw, dt, T, scheme=Scheme.MILSTEIN_RETRY,
                  rng=None, *, seed=0, path_index=0, t0=0.0, sigma_scale=1.0) -> Path:
    """Simulate one path of length ``floor(T/dt) + 1`` on ``[t0, t0 + T]``.

    Randomness comes from the Philox streams of ``(seed, path_index)``. Passing
    ``rng`` instead uses that single generator for everything (initial draw,
    increments, retries) and is not reproducible across ensemble layouts.
    ``sigma_scale`` multiplies the diffusion coefficient (0 gives the ODE).
    """
    _check_step(p, dt, T)
    scheme = Scheme.parse(scheme)
    if rng is None:
        irng, zrng, rrng = path_streams(seed, path_index)
    else:
        irng = zrng = rrng = rng
    n = _n_steps(dt, T)
    values = np.empty(n + 1)
    values[0] = init.sample(p, irng)
    stepper = _Stepper(p, dt, scheme, sigma_scale)

    def record(offset, chunk):
        values[1 + offset:1 + offset + chunk.size] = chunk

    stepper.run(values[0], n, zrng, rrng, record)
    return Path(t0=float(t0), dt=float(dt), values=values, scheme=scheme, seed=int(seed),
                path_index=int(path_index), params=p, clamp_events=int(stepper.counters[0]),
                exhausted_retries=int(stepper.counters[1]),
                metadata={"init": init.to_dict()})


def _pool_map(fn, items, threads):
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def simulate_ensemble(p: Parameters, init: InitialLaw, dt, T, scheme=Scheme.MILSTEIN_RETRY,
                      n_paths=1, base_seed=0, threads=None, path_indices=None):
    """Simulate ``n_paths`` independent paths; path ``i`` uses stream ``(base_seed, i)``."""
    if n_paths < 1:
        raise DomainError("n_paths must be >= 1")
    idx = range(n_paths) if path_indices is None else list(path_indices)
    return _pool_map(lambda i: simulate_path(p, init, dt, T, scheme, seed=base_seed, path_index=i),
                     idx, threads)


def simulate_marginals(p: Parameters, init: InitialLaw, times, dt, n_paths,
                       scheme=Scheme.MILSTEIN_RETRY, base_seed=0, threads=None):
    """States of each ensemble path at ``times`` without storing whole paths.

    ``times`` are rounded to the step grid. Row ``i`` equals
    ``simulate_path(..., seed=base_seed, path_index=i).values`` at those steps.

    Returns
    -------
    ndarray of shape (n_paths, len(times))
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) < 0) or np.any(times < 0):
        raise DomainError("times must be a nondecreasing list of nonnegative values")
    T = float(times[-1]) if times.size else 0.0
    _check_step(p, dt, max(T, dt))
    scheme = Scheme.parse(scheme)
    steps = np.rint(times / dt).astype(np.int64)
    n = int(steps.max()) if steps.size else 0

    def one(i):
        irng, zrng, rrng = path_streams(base_seed, i)
        x0 = init.sample(p, irng)
        row = np.empty(steps.size)
        row[steps == 0] = x0

        def record(offset, chunk):
            # chunk[j] is the state after step offset + j + 1
            sel = (steps > offset) & (steps <= offset + chunk.size)
            row[sel] = chunk[steps[sel] - offset - 1]

        if n > 0:
            _Stepper(p, dt, scheme).run(x0, n, zrng, rrng, record)
        return row

    rows = _pool_map(one, range(n_paths), threads)
    return np.vstack(rows) if rows else np.empty((0, steps.size))


@dataclass
class PathFunctionals:
    """Streaming summaries of one path of ``f(X)``.

    ``block_integrals[k]`` is the trapezoidal integral of ``f(X)`` over
    ``[k h, (k+1) h]`` and ``boundary_values[k]`` the state at ``k h``.
    """

    block: float
    block_integrals: np.ndarray
    boundary_values: np.ndarray
    clamp_events: int = 0
    exhausted_retries: int = 0

    @property
    def horizon(self):
        return self.block * self.block_integrals.size

    def time_average(self, horizon=None):
        if horizon is None:
            return float(self.block_integrals.sum() / self.horizon)
        k = int(round(horizon / self.block))
        return float(self.block_integrals[:k].sum() / (k * self.block))


def path_functionals(p: Parameters, init: InitialLaw, dt, T, fn, block,
                     scheme=Scheme.MILSTEIN_RETRY, seed=0, path_index=0) -> PathFunctionals:
    """Integrate ``fn(X)`` over blocks of length ``block`` without storing the path.

    ``block`` must be a multiple of ``dt`` and ``T`` a multiple of ``block``.
    The random streams are those of ``simulate_path(..., seed, path_index)``,
    so the result matches post-processing the stored path.
    """
    _check_step(p, dt, T)
    b = int(round(block / dt))
    if b < 1 or abs(b * dt - block) > 1e-9 * block:
        raise DomainError("block must be a positive multiple of dt")
    n_blocks = int(np.floor(T / block + 1e-9))
    if n_blocks < 1:
        raise DomainError("horizon shorter than one block")
    n = n_blocks * b
    irng, zrng, rrng = path_streams(seed, path_index)
    x0 = init.sample(p, irng)
    integrals = np.zeros(n_blocks)
    boundary = np.empty(n_blocks + 1)
    boundary[0] = x0
    state = {"prev": fn(np.array([x0]))[0]}

    def record(offset, chunk):
        fy = fn(chunk)
        left = np.concatenate(([state["prev"]], fy[:-1]))
        areas = 0.5 * (left + fy) * dt
        seg = np.arange(offset, offset + chunk.size)
        integrals[:] += np.bincount(seg // b, weights=areas, minlength=n_blocks)[:n_blocks]
        ends = seg + 1
        hit = ends % b == 0
        boundary[ends[hit] // b] = chunk[hit]
        state["prev"] = fy[-1]

    stepper = _Stepper(p, dt, scheme)
    stepper.run(x0, n, zrng, rrng, record)
    return PathFunctionals(block=float(block), block_integrals=integrals, boundary_values=boundary,
                           clamp_events=int(stepper.counters[0]),
                           exhausted_retries=int(stepper.counters[1]))


def ensemble_digest(paths) -> str:
    """SHA-256 over all path values in index order."""
    h = hashlib.sha256()
    for path in sorted(paths, key=lambda q: q.path_index):
        h.update(np.int64(path.path_index).tobytes())
        h.update(np.ascontiguousarray(path.values, dtype="<f8").tobytes())
    return h.hexdigest()
