"""Data model, validation and step-function arithmetic shared by all estimators.

A sample is a list of (time, status, mixture-vector) rows.  Mixture vectors
are known probabilities that a subject belongs to each latent component;
they are validated to lie on the probability simplex and renormalized so
downstream arithmetic sees exact simplex vectors.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadStatus,
    EmptyInput,
    InconsistentK,
    MixNotSimplex,
    NegativeTime,
    NoEvents,
)

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class Observation:
    """One subject: observed time, event indicator, mixture probabilities."""

    time: float
    status: int
    mix: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class MixtureSample:
    """Validated collection of observations plus its mixture-vector support.

    ``times``, ``status`` and ``mix`` are parallel arrays in input order.
    ``support`` lists the distinct mixture vectors in order of first
    appearance, with per-vector counts.  ``identifiable`` is True iff the
    support spans at least ``k`` linearly independent vectors; it is a
    warning flag here and becomes a hard error at estimator entry.
    """

    times: np.ndarray
    status: np.ndarray
    mix: np.ndarray
    support: tuple[tuple[tuple[float, ...], int], ...]
    identifiable: bool

    @property
    def n(self) -> int:
        return self.times.shape[0]

    @property
    def k(self) -> int:
        return self.mix.shape[1]

    @property
    def observations(self) -> list[Observation]:
        return [
            Observation(float(t), int(d), tuple(float(q) for q in m))
            for t, d, m in zip(self.times, self.status, self.mix)
        ]

    @property
    def fully_labeled(self) -> bool:
        """True iff every mixture vector is degenerate (a 0/1 vector)."""
        return bool(np.all(np.max(self.mix, axis=1) == 1.0))


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing evaluation times t_1 < ... < t_h."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("grid must be a nonempty 1-d array")
        if not np.all(np.isfinite(t)):
            raise ValueError("grid times must be finite")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("grid times must be strictly increasing")
        object.__setattr__(self, "times", t)

    @property
    def h(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class CurveSet:
    """Per-component CDF values on a grid: values[j, k] = F_k(t_j).

    ``constrained=False`` marks unconstrained estimates (type I NPMLE) that
    are exempt from the [0,1] and monotonicity invariants.
    """

    grid: TimeGrid
    values: np.ndarray
    constrained: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != self.grid.h:
            raise ValueError("values must be an (h, K) matrix")
        if self.constrained:
            if np.any(v < -1e-12) or np.any(v > 1 + 1e-12):
                raise ValueError("CDF values must lie in [0, 1]")
            if np.any(np.diff(v, axis=0) < -1e-12):
                raise ValueError("CDF values must be nondecreasing in t")
            v = np.clip(v, 0.0, 1.0)
        object.__setattr__(self, "values", v)

    @property
    def n_components(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function; returns ``left`` before the first knot."""

    knots: np.ndarray
    levels: np.ndarray
    left: float = 0.0

    def __call__(self, t):
        idx = np.searchsorted(self.knots, t, side="right") - 1
        out = np.where(idx >= 0, np.asarray(self.levels)[np.maximum(idx, 0)], self.left)
        return float(out) if np.isscalar(t) else out


def validate_sample(rows) -> MixtureSample:
    """Validate raw (time, status, mix) rows and compute the mixture support.

    Accepted mixture vectors are renormalized (divided by their sum) so the
    stored rows are exact simplex vectors.
    """
    rows = list(rows)
    if not rows:
        raise EmptyInput("empty row list")
    k = len(rows[0][2])
    times = np.empty(len(rows))
    status = np.empty(len(rows), dtype=np.int64)
    mix = np.empty((len(rows), k))
    for i, (t, d, q) in enumerate(rows):
        t = float(t)
        if not np.isfinite(t) or t < 0:
            raise NegativeTime(f"row {i}: time {t!r} must be finite and >= 0")
        if d not in (0, 1):
            raise BadStatus(f"row {i}: status {d!r} must be 0 or 1")
        q = np.asarray(q, dtype=float)
        if q.shape != (k,):
            raise InconsistentK(f"row {i}: expected {k} mixture entries, got {q.size}")
        if np.any(q < -SIMPLEX_TOL) or np.any(q > 1 + SIMPLEX_TOL):
            raise MixNotSimplex(f"row {i}: mixture entry outside [0, 1]")
        s = q.sum()
        if abs(s - 1.0) > SIMPLEX_TOL:
            raise MixNotSimplex(f"row {i}: mixture entries sum to {s}, expected 1")
        times[i] = t
        status[i] = int(d)
        mix[i] = np.clip(q / s, 0.0, 1.0)

    seen: dict[tuple, int] = {}
    order: list[tuple] = []
    for row in map(tuple, mix):
        if row not in seen:
            seen[row] = 0
            order.append(row)
        seen[row] += 1
    support = tuple((vec, seen[vec]) for vec in order)
    umat = np.array(order)
    identifiable = np.linalg.matrix_rank(umat) >= k
    return MixtureSample(times, status, mix, support, identifiable)


def default_grid(sample: MixtureSample, mode: str = "events", *, count: int | None = None,
                 lo: float | None = None, hi: float | None = None) -> TimeGrid:
    """Build an evaluation grid.

    ``events`` uses the sorted distinct uncensored times.  ``even`` places
    ``count`` evenly spaced points on (lo, hi], excluding lo and including hi.
    """
    if mode == "events":
        t = np.unique(sample.times[sample.status == 1])
        if t.size == 0:
            raise NoEvents("no uncensored observations for event_times grid")
        return TimeGrid(t)
    if mode == "even":
        if count is None or lo is None or hi is None:
            raise ValueError("even mode requires count, lo and hi")
        if count < 1 or not lo < hi:
            raise ValueError("even mode requires count >= 1 and lo < hi")
        return TimeGrid(even_grid(count, lo, hi))
    raise ValueError(f"unknown grid mode {mode!r}")


def even_grid(count: int, lo: float, hi: float) -> np.ndarray:
    step = (hi - lo) / count
    return lo + step * np.arange(1, count + 1)


def eval_curve(curve: CurveSet, component: int, t) -> np.ndarray | float:
    """Right-continuous step evaluation of one component; 0 below the grid."""
    return eval_step(curve.grid.times, curve.values[:, component], t)


def eval_step(knots: np.ndarray, levels: np.ndarray, t):
    """Step evaluation with value 0 before the first knot."""
    idx = np.searchsorted(knots, t, side="right") - 1
    out = np.where(idx >= 0, levels[np.maximum(idx, 0)], 0.0)
    return float(out) if np.ndim(t) == 0 else out


# -- CSV ingestion -----------------------------------------------------------
#
# Header: time,status,q1[,q2,...,qK].  If only q1 is present with K=2,
# q2 := 1 - q1.  UTF-8, comma-separated, '.' decimal point.

def read_rows(fh) -> list[tuple]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        raise EmptyInput("empty CSV")
    header = [c.strip().lower() for c in header]
    if header[:2] != ["time", "status"] or len(header) < 3:
        raise InconsistentK("CSV header must be time,status,q1[,q2,...]")
    nq = len(header) - 2
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec or (len(rec) == 1 and not rec[0].strip()):
            continue
        if len(rec) != len(header):
            raise InconsistentK(f"line {lineno}: expected {len(header)} fields")
        try:
            t = float(rec[0])
            d = int(rec[1])
            q = [float(x) for x in rec[2:]]
        except ValueError as exc:
            raise MixNotSimplex(f"line {lineno}: {exc}") from exc
        if nq == 1:
            q = [q[0], 1.0 - q[0]]
        rows.append((t, d, tuple(q)))
    return rows


def read_sample(path) -> MixtureSample:
    with open(path, newline="", encoding="utf-8") as fh:
        return validate_sample(read_rows(fh))


def write_sample(sample: MixtureSample, fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(["time", "status"] + [f"q{k + 1}" for k in range(sample.k)])
    for t, d, q in zip(sample.times, sample.status, sample.mix):
        writer.writerow([repr(float(t)), int(d)] + [repr(float(x)) for x in q])


def sample_to_csv(sample: MixtureSample) -> str:
    buf = io.StringIO()
    write_sample(sample, buf)
    return buf.getvalue()
