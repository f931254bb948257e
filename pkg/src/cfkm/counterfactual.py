"""Counterfactual CDF, cumulative hazards and policy effects."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .core import CensoredSample, CounterfactualCovariates, Grid, StepCurve, as_grid, validate_sample
from .errors import EmptyNeighborhoodError, HazardDivergenceError, ValidationError
from .estimators import (
    DEGENERATE_RISK_EPS,
    group_starts,
    kaplan_meier,
    positions,
)
from .kernels import EMPTY_NEIGHBORHOOD_EPS, KernelSpec

__all__ = [
    "GridCurve",
    "PolicyEffectCurves",
    "counterfactual_cdf",
    "counterfactual_curve",
    "cumulative_hazard",
    "policy_effects",
    "rothe_cdf",
    "oracle_cdf",
    "isotonize",
]

HAZARD_EPS = 1e-12
ROW_CHUNK = 256
HAZARD_METHODS = ("neg_log", "na_integral")


@dataclass(frozen=True, eq=False)
class GridCurve:
    """Curve values on an evaluation grid plus bookkeeping."""

    grid: Grid
    values: np.ndarray
    degenerate_terms: int = 0
    dropped_rows: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class PolicyEffectCurves:
    grid: Grid
    f_star: np.ndarray
    f_base: np.ndarray
    delta_f: np.ndarray
    lambda_star: np.ndarray
    lambda_base: np.ndarray
    delta_lambda: np.ndarray
    warnings: dict = field(default_factory=dict)


def isotonize(values: np.ndarray) -> np.ndarray:
    """Running maximum, then clip to ``[0, 1]``."""
    return np.clip(np.maximum.accumulate(np.asarray(values, dtype=float)), 0.0, 1.0)


def _row_average(s, rows, h, spec, t, fn, on_empty):
    """Average ``fn(weights, pos)`` over query rows in fixed-size chunks.

    Rows without kernel mass raise (``on_empty="fail"``) or are dropped with
    a ``RuntimeWarning`` (``"drop"``). Chunks are reduced in index order, so
    the sum does not depend on threading.
    """
    if on_empty not in ("fail", "drop"):
        raise ValidationError(f"on_empty must be 'fail' or 'drop', got {on_empty!r}")
    pos = positions(s.y, t)
    total = np.zeros(pos.shape[0])
    extra = 0
    kept = 0
    dropped = []
    for lo in range(0, rows.shape[0], ROW_CHUNK):
        raw = _accel.kernel_matrix(rows[lo : lo + ROW_CHUNK], s.x, h, spec.kind)
        mass = raw.sum(axis=1)
        empty = np.abs(mass) < EMPTY_NEIGHBORHOOD_EPS
        if np.any(empty):
            idx = [lo + int(k) for k in np.flatnonzero(empty)]
            if on_empty == "fail":
                raise EmptyNeighborhoodError(
                    f"counterfactual row {idx[0]} has no sample covariates within the kernel window",
                    row=idx[0],
                )
            dropped.extend(idx)
            raw, mass = raw[~empty], mass[~empty]
        if raw.shape[0] == 0:
            continue
        vals, bad = fn(raw / mass[:, None], pos)
        total += vals.sum(axis=0)
        extra += int(np.sum(bad))
        kept += raw.shape[0]
    if dropped:
        warnings.warn(
            f"dropped {len(dropped)} counterfactual rows with empty kernel neighborhoods "
            f"(first: {dropped[0]})",
            RuntimeWarning,
            stacklevel=3,
        )
    if kept == 0:
        raise EmptyNeighborhoodError("every counterfactual row has an empty kernel neighborhood", row=0)
    return total / kept, extra, tuple(dropped)


def _prepare(sample, xstar, spec, allow_unequal):
    s = validate_sample(sample)
    if not isinstance(xstar, CounterfactualCovariates):
        xstar = CounterfactualCovariates(xstar)
    xstar.check_against(s, allow_unequal=allow_unequal)
    if spec.d != s.d:
        raise ValidationError(f"kernel dimension {spec.d} does not match sample dimension {s.d}")
    return s, xstar


def _counterfactual_values(s, rows, h, spec, t, variant, on_empty):
    gs = group_starts(s.y)
    product_limit = variant == "product_limit"

    def fn(w, pos):
        return _accel.beran_at(w, s.delta, gs, pos, product_limit, DEGENERATE_RISK_EPS)

    return _row_average(s, rows, h, spec, t, fn, on_empty)


def counterfactual_cdf(
    sample: CensoredSample,
    xstar,
    h: float,
    spec: KernelSpec,
    grid,
    variant: str = "exponential",
    on_empty: str = "fail",
    isotonic: bool = False,
    allow_unequal: bool = False,
) -> GridCurve:
    """Average of the kernel-conditional CDFs of T over the counterfactual rows.

    With ``on_empty="drop"`` rows without kernel mass are removed (with a
    ``RuntimeWarning``) and the average is taken over the remaining rows.
    Values are returned raw unless ``isotonic`` is set.
    """
    grid = as_grid(grid)
    s, xs = _prepare(sample, xstar, spec, allow_unequal)
    vals, bad, dropped = _counterfactual_values(s, xs.rows, h, spec, grid.points, variant, on_empty)
    if isotonic:
        vals = isotonize(vals)
    return GridCurve(grid, vals, bad, dropped)


def counterfactual_curve(
    sample: CensoredSample,
    xstar,
    h: float,
    spec: KernelSpec,
    variant: str = "exponential",
    on_empty: str = "fail",
    allow_unequal: bool = False,
) -> StepCurve:
    """The counterfactual CDF as a full step function with knots at uncensored durations."""
    s, xs = _prepare(sample, xstar, spec, allow_unequal)
    knots = np.unique(s.y[s.delta == 1])
    vals, _, _ = _counterfactual_values(s, xs.rows, h, spec, knots, variant, on_empty)
    return StepCurve(knots, vals, 0.0)


def rothe_cdf(
    sample: CensoredSample,
    xstar,
    h: float,
    spec: KernelSpec,
    grid,
    on_empty: str = "fail",
    allow_unequal: bool = False,
) -> GridCurve:
    """Counterfactual CDF that ignores censoring: averaged kernel-weighted ECDFs of Y."""
    grid = as_grid(grid)
    s, xs = _prepare(sample, xstar, spec, allow_unequal)
    ones = np.ones(s.n)

    def fn(w, pos):
        return _accel.weighted_cumsum_at(w, ones, pos), 0

    vals, _, dropped = _row_average(s, xs.rows, h, spec, grid.points, fn, on_empty)
    return GridCurve(grid, vals, 0, dropped)


def oracle_cdf(y_star, delta_star) -> StepCurve:
    """Kaplan-Meier curve of latent counterfactual observations ``(Y*, delta*)``."""
    y_star = np.asarray(y_star, dtype=float)
    latent = CensoredSample(y_star, delta_star, np.zeros((y_star.shape[0], 1)))
    return kaplan_meier(latent)


def cumulative_hazard(
    values=None,
    method: str = "neg_log",
    curve: StepCurve | None = None,
    grid=None,
    on_divergence: str = "raise",
) -> np.ndarray:
    """Cumulative hazard on a grid.

    ``neg_log`` maps CDF values ``F`` to ``-log(1 - F)``. ``na_integral``
    needs the full step ``curve`` and the ``grid``; it returns the sum of
    ``dF / (1 - F-)`` over jumps at or below each grid time.

    Where ``F`` reaches ``1 - 1e-12`` the hazard diverges: ``on_divergence``
    ``"raise"`` raises :class:`HazardDivergenceError`, ``"truncate"`` returns
    NaN from the first such grid time onward.
    """
    if method not in HAZARD_METHODS:
        raise ValidationError(f"hazard method must be one of {HAZARD_METHODS}, got {method!r}")
    if on_divergence not in ("raise", "truncate"):
        raise ValidationError("on_divergence must be 'raise' or 'truncate'")
    if method == "neg_log":
        if values is None:
            if curve is None or grid is None:
                raise ValidationError("neg_log needs CDF values, or a curve and a grid")
            values = curve(as_grid(grid).points)
        f = np.asarray(values, dtype=float)
        diverged = ~(f < 1.0 - HAZARD_EPS)
        out = -np.log1p(-np.where(diverged, 0.0, f))
    else:
        if curve is None or grid is None:
            raise ValidationError("na_integral needs the full step curve and a grid")
        t = as_grid(grid).points
        before = np.concatenate(([curve.initial_value], curve.values[:-1]))
        jumps = curve.values - before
        surv_before = 1.0 - before
        bad_jump = (jumps != 0) & ~(surv_before > HAZARD_EPS)
        incr = np.where(bad_jump, 0.0, jumps / np.where(bad_jump, 1.0, surv_before))
        cum = np.concatenate(([0.0], np.cumsum(incr)))
        pos = np.searchsorted(curve.knots, t, side="right")
        out = cum[pos]
        first_bad = np.flatnonzero(bad_jump)
        diverged = np.zeros(t.shape, dtype=bool)
        if first_bad.size:
            diverged = t >= curve.knots[first_bad[0]]
    if np.any(diverged):
        if on_divergence == "raise":
            k = int(np.flatnonzero(diverged)[0])
            raise HazardDivergenceError(f"CDF reaches 1 at grid index {k}; cumulative hazard diverges")
        first = int(np.flatnonzero(diverged)[0])
        out = out.copy()
        out[first:] = np.nan
    return out


def policy_effects(
    sample: CensoredSample,
    xstar,
    h: float,
    spec: KernelSpec,
    grid,
    hazard_method: str = "neg_log",
    variant: str = "exponential",
    on_empty: str = "fail",
    isotonic: bool = False,
    allow_unequal: bool = False,
) -> PolicyEffectCurves:
    """Distribution and cumulative-hazard policy effects on ``grid``.

    Hazards are truncated (NaN) from the first grid time where the relevant
    CDF reaches one.
    """
    grid = as_grid(grid)
    s = validate_sample(sample)
    km = kaplan_meier(s)
    f_base = km(grid.points)
    cf = counterfactual_cdf(s, xstar, h, spec, grid, variant, on_empty, isotonic, allow_unequal)
    f_star = cf.values
    if hazard_method == "neg_log":
        lam_star = cumulative_hazard(f_star, "neg_log", on_divergence="truncate")
        lam_base = cumulative_hazard(f_base, "neg_log", on_divergence="truncate")
    else:
        cf_curve = counterfactual_curve(s, xstar, h, spec, variant, on_empty, allow_unequal)
        if isotonic:
            cf_curve = StepCurve(cf_curve.knots, isotonize(cf_curve.values), 0.0)
        lam_star = cumulative_hazard(method="na_integral", curve=cf_curve, grid=grid, on_divergence="truncate")
        lam_base = cumulative_hazard(method="na_integral", curve=km, grid=grid, on_divergence="truncate")
    return PolicyEffectCurves(
        grid=grid,
        f_star=f_star,
        f_base=f_base,
        delta_f=f_star - f_base,
        lambda_star=lam_star,
        lambda_base=lam_base,
        delta_lambda=lam_star - lam_base,
        warnings={"counterfactual_degenerate_terms": cf.degenerate_terms, "dropped_rows": list(cf.dropped_rows)},
    )
