"""Unconditional and kernel-conditional Kaplan-Meier type curve estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from .core import CensoredSample, StepCurve, validate_sample
from .errors import ValidationError
from .kernels import KernelSpec, nw_weight_matrix

__all__ = [
    "ConditionalCurveRequest",
    "ConditionalStepCurve",
    "DEGENERATE_RISK_EPS",
    "kaplan_meier",
    "beran_conditional",
    "conditional_ecdf",
    "conditional_cdf_matrix",
    "conditional_ecdf_matrix",
    "group_starts",
    "positions",
]

DEGENERATE_RISK_EPS = 1e-12
VARIANTS = ("exponential", "product_limit")


@dataclass(frozen=True)
class ConditionalCurveRequest:
    x: tuple[float, ...]
    h: float
    spec: KernelSpec
    variant: str = "exponential"

    def __post_init__(self):
        if not (np.isfinite(self.h) and self.h > 0):
            raise ValidationError(f"bandwidth must be positive, got {self.h!r}")
        if self.variant not in VARIANTS:
            raise ValidationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        object.__setattr__(self, "x", tuple(float(v) for v in np.atleast_1d(self.x)))


@dataclass(frozen=True, eq=False)
class ConditionalStepCurve(StepCurve):
    """A :class:`StepCurve` that also reports skipped degenerate risk-set terms."""

    degenerate_terms: int = 0


def group_starts(y_sorted: np.ndarray) -> np.ndarray:
    """First sorted index sharing each record's duration."""
    return np.searchsorted(y_sorted, y_sorted, side="left")


def positions(y_sorted: np.ndarray, t) -> np.ndarray:
    """Number of records with duration <= t, for each t."""
    return np.searchsorted(y_sorted, np.asarray(t, dtype=float), side="right")


def _event_knots(s: CensoredSample) -> np.ndarray:
    return np.unique(s.y[s.delta == 1])


def kaplan_meier(sample: CensoredSample) -> StepCurve:
    """Product-limit estimate of the CDF of T.

    Records are ranked by the canonical sort order and each uncensored record
    at rank ``j`` multiplies the survival by ``(n - j) / (n - j + 1)``.
    Consecutive uncensored ranks telescope, which is how the product is
    evaluated: it keeps the no-censoring case exactly equal to ``j / n``.
    """
    s = validate_sample(sample)
    n = s.n
    cdf_after = np.zeros(n + 1)
    cdf, surv = 0.0, 1.0
    run_start = None
    for j in range(1, n + 1):
        if s.delta[j - 1] == 1:
            if run_start is None:
                run_start, run_cdf, run_surv = j, cdf, surv
            cdf = run_cdf + run_surv * (j - run_start + 1) / (n - run_start + 1)
            surv = run_surv * (n - j) / (n - run_start + 1)
        else:
            run_start = None
        cdf_after[j] = cdf
    knots = _event_knots(s)
    return StepCurve(knots, cdf_after[positions(s.y, knots)], 0.0)


def _weights(s: CensoredSample, query, h: float, spec: KernelSpec) -> np.ndarray:
    if spec.d != s.d:
        raise ValidationError(f"kernel dimension {spec.d} does not match sample dimension {s.d}")
    return nw_weight_matrix(query, s.x, h, spec)


def conditional_cdf_matrix(
    sample: CensoredSample,
    query,
    h: float,
    spec: KernelSpec,
    t,
    variant: str = "exponential",
    weights: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Conditional CDF of T at each ``t`` for each query point.

    Returns ``(values, degenerate)`` with ``values`` of shape
    ``(len(query), len(t))`` and per-row counts of skipped risk-set terms.
    ``weights`` may carry a precomputed normalized weight matrix.
    """
    if variant not in VARIANTS:
        raise ValidationError(f"variant must be one of {VARIANTS}, got {variant!r}")
    s = validate_sample(sample)
    w = _weights(s, query, h, spec) if weights is None else weights
    return _accel.beran_at(
        w,
        s.delta,
        group_starts(s.y),
        positions(s.y, t),
        variant == "product_limit",
        DEGENERATE_RISK_EPS,
    )


def beran_conditional(sample: CensoredSample, req: ConditionalCurveRequest) -> ConditionalStepCurve:
    """Kernel-conditional CDF of T given X = ``req.x``.

    The exponential variant is ``1 - exp(-sum_j a_j)`` and the product-limit
    variant ``1 - prod_j (1 - a_j)``, where for uncensored ``Y_j <= t``
    ``a_j = B_j(x) / sum_l 1[Y_j <= Y_l] B_l(x)`` with Nadaraya-Watson weights
    ``B``. Terms whose risk-set weight is below ``1e-12`` in absolute value are
    skipped and counted in ``degenerate_terms``.
    """
    s = validate_sample(sample)
    knots = _event_knots(s)
    vals, bad = conditional_cdf_matrix(s, np.asarray(req.x)[None, :], req.h, req.spec, knots, req.variant)
    return ConditionalStepCurve(knots, vals[0], 0.0, degenerate_terms=int(bad[0]))


def conditional_ecdf_matrix(
    sample: CensoredSample,
    query,
    h: float,
    spec: KernelSpec,
    t,
    censored_only: bool = False,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Weighted ECDF of Y (or sub-distribution of uncensored Y) given X, on ``t``."""
    s = validate_sample(sample)
    w = _weights(s, query, h, spec) if weights is None else weights
    mask = s.delta.astype(float) if censored_only else np.ones(s.n)
    return _accel.weighted_cumsum_at(w, mask, positions(s.y, t))


def conditional_ecdf(
    sample: CensoredSample,
    x,
    h: float,
    spec: KernelSpec,
    censored_only: bool = False,
) -> StepCurve:
    """``sum_i 1[Y_i <= y] B_i(x)``; with ``censored_only`` the indicator also requires ``delta_i = 1``.

    (The flag name follows the usual sub-distribution naming: it keeps only
    the *uncensored* records.)
    """
    s = validate_sample(sample)
    knots = _event_knots(s) if censored_only else np.unique(s.y)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    vals = conditional_ecdf_matrix(s, x[None, :], h, spec, knots, censored_only)
    return StepCurve(knots, vals[0], 0.0)
