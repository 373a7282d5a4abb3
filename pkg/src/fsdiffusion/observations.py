"""Observation sets and their CSV / JSON interchange formats."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DomainError

__all__ = [
    "Mode",
    "ObservationSet",
    "observe",
    "path_to_csv",
    "path_envelope",
    "write_path",
    "read_csv_series",
    "CsvParseError",
]


class Mode(str, Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown observation mode {value!r}") from None


class CsvParseError(ValueError):
    """Malformed CSV input; ``line`` is the 1-based line number."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass
class ObservationSet:
    """Positive observations at strictly increasing times.

    In ``discrete`` mode the values are averaged as a sequence; in
    ``continuous`` mode they are the nodes of a trapezoidal quadrature.
    """

    times: np.ndarray
    values: np.ndarray
    mode: Mode = Mode.CONTINUOUS
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.mode = Mode.parse(self.mode)
        if self.times.shape != self.values.shape or self.values.ndim != 1:
            raise DomainError("times and values must be 1-d arrays of equal length")
        if self.values.size == 0:
            raise DomainError("observation set is empty")
        if np.any(~(self.values > 0)):
            raise DomainError("observed values must be strictly positive")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("observation times must be strictly increasing")

    def __len__(self):
        return self.values.size

    @property
    def span(self):
        return float(self.times[-1] - self.times[0])

    @property
    def spacing(self):
        """Common step between observations (1 for a single point)."""
        if self.values.size < 2:
            return 1.0
        d = np.diff(self.times)
        if np.max(np.abs(d - d[0])) > 1e-9 * max(1.0, abs(d[0])):
            raise DomainError("observations are not equally spaced")
        return float(d[0])

    def with_mode(self, mode):
        return ObservationSet(self.times, self.values, mode, dict(self.metadata))

    def scaled(self, c):
        return ObservationSet(self.times, c * self.values, self.mode, dict(self.metadata))

    @classmethod
    def from_path(cls, path, mode=Mode.CONTINUOUS):
        return cls(path.times, path.values, mode, {"source_dt": path.dt, "scheme": path.scheme.value,
                                                   "seed": path.seed, "path_index": path.path_index})


def observe(path, grid, mode=Mode.CONTINUOUS) -> ObservationSet:
    """Linearly interpolate ``path`` at the strictly increasing times ``grid``."""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    times = path.times
    tol = 1e-9 * max(1.0, abs(times[-1]))
    if grid.size == 0:
        raise DomainError("observation grid is empty")
    if grid[0] < times[0] - tol or grid[-1] > times[-1] + tol:
        raise DomainError(f"grid [{grid[0]}, {grid[-1]}] outside path span [{times[0]}, {times[-1]}]")
    vals = np.interp(grid, times, path.values)
    return ObservationSet(grid, vals, mode, {"source_dt": path.dt, "scheme": path.scheme.value,
                                             "seed": path.seed, "path_index": path.path_index})


def _fmt(v):
    return repr(float(v))


def path_to_csv(times, values) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "value"])
    for t, v in zip(times, values):
        w.writerow([_fmt(t), _fmt(v)])
    return buf.getvalue()


def path_envelope(path, extra=None) -> dict:
    """JSON-ready metadata describing ``path``."""
    env = {
        "parameters": path.params.to_dict() if path.params else None,
        "scheme": path.scheme.value,
        "seed": path.seed,
        "path_index": path.path_index,
        "t0": path.t0,
        "dt": path.dt,
        "n_points": int(path.values.size),
        "clamp_events": path.clamp_events,
        "exhausted_retries": path.exhausted_retries,
    }
    env.update(path.metadata)
    if extra:
        env.update(extra)
    return env


def write_path(path, csv_path, json_path=None, extra=None):
    with open(csv_path, "w", newline="") as fh:
        fh.write(path_to_csv(path.times, path.values))
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(path_envelope(path, extra), fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_csv_series(source, mode=Mode.CONTINUOUS) -> ObservationSet:
    """Parse a ``time,value`` CSV (header required) into an :class:`ObservationSet`."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise CsvParseError("empty file", 1)
    header = [h.strip().lower() for h in rows[0]]
    if header[:2] != ["time", "value"]:
        raise CsvParseError(f"expected header 'time,value', got {','.join(rows[0])!r}", 1)
    times, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 2:
            raise CsvParseError("expected two columns", lineno)
        try:
            t, v = float(row[0]), float(row[1])
        except ValueError:
            raise CsvParseError(f"could not parse numbers from {row!r}", lineno) from None
        if not v > 0:
            raise CsvParseError(f"nonpositive value {v}", lineno)
        if times and t <= times[-1]:
            raise CsvParseError(f"time {t} is not increasing", lineno)
        times.append(t)
        values.append(v)
    if not values:
        raise CsvParseError("no data rows", len(rows))
    return ObservationSet(np.array(times), np.array(values), mode, {"source": str(getattr(source, "name", source))})
