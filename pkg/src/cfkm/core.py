"""Domain types for censored duration samples and step functions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptySampleError,
    GridError,
    InvalidCensoringError,
    NegativeDurationError,
    RaggedCovariatesError,
    ValidationError,
)

__all__ = [
    "Observation",
    "CensoredSample",
    "CounterfactualCovariates",
    "StepCurve",
    "Grid",
    "validate_sample",
    "eval_step",
    "left_limit",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _as_matrix(rows, what: str) -> np.ndarray:
    """Coerce covariate rows to an (n, d) float array, rejecting ragged input."""
    if isinstance(rows, np.ndarray):
        arr = np.asarray(rows, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise RaggedCovariatesError(f"{what} must be a 2-d array, got ndim={arr.ndim}")
        return arr
    rows = [np.atleast_1d(np.asarray(r, dtype=float)) for r in rows]
    if not rows:
        return np.empty((0, 0))
    d = rows[0].shape[0]
    for i, r in enumerate(rows):
        if r.ndim != 1 or r.shape[0] != d:
            raise RaggedCovariatesError(
                f"{what} row {i} has dimension {r.shape[0]}, expected {d}"
            )
    return np.vstack(rows)


@dataclass(frozen=True)
class Observation:
    """One censored record: duration ``y``, event indicator ``delta``, covariates ``x``."""

    y: float
    delta: int
    x: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class CensoredSample:
    """Column-oriented i.i.d. sample of ``(Y, delta, X)``.

    Construct directly from arrays or via :meth:`from_observations`, then pass
    through :func:`validate_sample` to get the canonical sorted form that the
    estimators expect.
    """

    y: np.ndarray
    delta: np.ndarray
    x: np.ndarray
    is_sorted: bool = field(default=False, compare=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        delta = np.asarray(self.delta).ravel()
        x = _as_matrix(self.x, "covariate")
        if x.shape[0] == 0 and y.shape[0] > 0:
            raise RaggedCovariatesError("covariates missing")
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "delta", _frozen(delta))
        object.__setattr__(self, "x", _frozen(x))

    @classmethod
    def from_observations(cls, observations: Iterable[Observation]) -> "CensoredSample":
        obs = list(observations)
        if not obs:
            raise EmptySampleError("empty sample")
        return cls(
            y=[o.y for o in obs],
            delta=[o.delta for o in obs],
            x=[o.x for o in obs],
        )

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def d(self) -> int:
        return int(self.x.shape[1])

    @property
    def observations(self) -> list[Observation]:
        return [
            Observation(float(y), int(dl), tuple(float(v) for v in xi))
            for y, dl, xi in zip(self.y, self.delta, self.x)
        ]

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, CensoredSample):
            return NotImplemented
        return (
            np.array_equal(self.y, other.y)
            and np.array_equal(self.delta, other.delta)
            and np.array_equal(self.x, other.x)
        )

    __hash__ = None


def validate_sample(sample: CensoredSample, return_order: bool = False):
    """Check a sample and return it sorted by ``y`` ascending.

    Within exact ties in ``y`` uncensored records come before censored ones;
    otherwise the input order is kept (stable sort). With ``return_order``
    the sorting permutation is returned as well, so that paired data (e.g.
    counterfactual rows generated from each unit) can follow the records.

    Raises
    ------
    EmptySampleError, NegativeDurationError, InvalidCensoringError,
    RaggedCovariatesError
    """
    if sample.is_sorted:
        return (sample, np.arange(sample.n)) if return_order else sample
    y, delta, x = sample.y, sample.delta, sample.x
    if y.shape[0] == 0:
        raise EmptySampleError("empty sample")
    if x.shape[0] != y.shape[0] or delta.shape[0] != y.shape[0]:
        raise RaggedCovariatesError(
            f"column lengths differ: y={y.shape[0]}, delta={delta.shape[0]}, x={x.shape[0]}"
        )
    if x.shape[1] < 1:
        raise RaggedCovariatesError("covariate dimension must be at least 1")
    if not np.all(np.isfinite(y)):
        bad = int(np.flatnonzero(~np.isfinite(y))[0])
        raise NegativeDurationError(f"non-finite duration at record {bad}")
    if np.any(y < 0):
        bad = int(np.flatnonzero(y < 0)[0])
        raise NegativeDurationError(f"negative duration {y[bad]!r} at record {bad}")
    d_float = np.asarray(delta, dtype=float)
    ok = (d_float == 0) | (d_float == 1)
    if not np.all(ok):
        bad = int(np.flatnonzero(~ok)[0])
        raise InvalidCensoringError(f"censoring indicator {delta[bad]!r} at record {bad} not in {{0, 1}}")
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(x), axis=1))[0])
        raise ValidationError(f"non-finite covariate at record {bad}")
    d_int = d_float.astype(np.int8)
    # lexsort: last key is primary
    order = np.lexsort((1 - d_int, y))
    out = CensoredSample(y=y[order], delta=d_int[order], x=x[order], is_sorted=True)
    return (out, order) if return_order else out


@dataclass(frozen=True, eq=False)
class CounterfactualCovariates:
    """Draws of the manipulated covariates ``X*``, one row per unit."""

    rows: np.ndarray

    def __post_init__(self):
        rows = _as_matrix(self.rows, "counterfactual")
        if rows.shape[0] == 0:
            raise EmptySampleError("no counterfactual rows")
        if not np.all(np.isfinite(rows)):
            raise ValidationError("non-finite counterfactual covariate")
        object.__setattr__(self, "rows", _frozen(rows))

    @property
    def n(self) -> int:
        return int(self.rows.shape[0])

    @property
    def d(self) -> int:
        return int(self.rows.shape[1])

    def check_against(self, sample: CensoredSample, allow_unequal: bool = False) -> None:
        if self.d != sample.d:
            raise DimensionMismatchError(
                f"counterfactual covariates have d={self.d}, sample has d={sample.d}"
            )
        if not allow_unequal and self.n != sample.n:
            raise DimensionMismatchError(
                f"counterfactual row count {self.n} differs from sample size {sample.n} "
                "(pass allow_unequal=True to permit)"
            )


@dataclass(frozen=True, eq=False)
class StepCurve:
    """Right-continuous step function with left limits.

    ``values[k]`` holds on ``[knots[k], knots[k+1])``; ``initial_value`` holds
    below the first knot.
    """

    knots: np.ndarray
    values: np.ndarray
    initial_value: float = 0.0

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float).ravel()
        values = np.asarray(self.values, dtype=float).ravel()
        if knots.shape != values.shape:
            raise ValidationError("knots and values must have the same length")
        if not np.all(np.isfinite(knots)):
            raise ValidationError("knots must be finite")
        if knots.size > 1 and np.any(np.diff(knots) <= 0):
            raise ValidationError("knots must be strictly increasing")
        object.__setattr__(self, "knots", _frozen(knots))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "initial_value", float(self.initial_value))

    def _lookup(self, t, side: str):
        t_arr = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.knots, t_arr, side=side)
        padded = np.concatenate(([self.initial_value], self.values))
        out = padded[idx]
        return float(out) if out.ndim == 0 else out

    def __call__(self, t):
        return self._lookup(t, "right")

    def left_limit(self, t):
        return self._lookup(t, "left")

    def jumps(self) -> np.ndarray:
        """Jump sizes at each knot."""
        return np.diff(np.concatenate(([self.initial_value], self.values)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepCurve):
            return NotImplemented
        return (
            self.initial_value == other.initial_value
            and np.array_equal(self.knots, other.knots)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def eval_step(curve: StepCurve, t):
    return curve(t)


def left_limit(curve: StepCurve, t):
    return curve.left_limit(t)


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing evaluation times."""

    points: np.ndarray
    step: float | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        if pts.size == 0:
            raise GridError("evaluation grid is empty")
        if not np.all(np.isfinite(pts)):
            raise GridError("evaluation grid has non-finite points")
        if np.any(pts < 0):
            raise GridError("evaluation grid has negative times")
        if pts.size > 1 and np.any(np.diff(pts) <= 0):
            raise GridError("evaluation grid must be strictly increasing without duplicates")
        object.__setattr__(self, "points", _frozen(pts))

    @classmethod
    def uniform(cls, start: float, stop: float, step: float) -> "Grid":
        """Equispaced grid including both endpoints (``stop`` inclusive up to rounding)."""
        if step <= 0:
            raise GridError("grid step must be positive")
        if stop < start:
            raise GridError("grid stop is below start")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        # round away accumulated binary error so 4.25 + 78*0.05 prints as 8.15
        pts = np.round(start + step * np.arange(count), 12)
        return cls(pts, step=float(step))

    @classmethod
    def parse(cls, spec: str) -> "Grid":
        """Parse ``"start:stop:step"``."""
        parts = spec.split(":")
        if len(parts) != 3:
            raise GridError(f"grid spec {spec!r} is not start:stop:step")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError as exc:
            raise GridError(f"grid spec {spec!r} has a non-numeric field") from exc
        return cls.uniform(start, stop, step)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def check_support(self, sample: CensoredSample) -> None:
        ymax = float(np.max(sample.y))
        if self.points[-1] > ymax:
            raise GridError(
                f"grid extends to {self.points[-1]} beyond the largest observed duration {ymax}"
            )


def as_grid(grid: "Grid | Sequence[float] | np.ndarray") -> Grid:
    return grid if isinstance(grid, Grid) else Grid(grid)
