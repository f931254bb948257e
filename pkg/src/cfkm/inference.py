"""Influence functions, plug-in covariances and pointwise confidence intervals.

Integrals against the uncensored sub-distribution are finite sums over the
uncensored durations, with the left limit ``F(u-)`` in the denominators.
The same left limit is used in the leading ``1 / (1 - F(y-))`` term of the
influence functions, which makes the empirical influence values of the
Kaplan-Meier curve average to exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist
from typing import NamedTuple

import numpy as np

from . import _accel
from .core import CensoredSample, CounterfactualCovariates, Grid, StepCurve, as_grid, validate_sample
from .errors import GuardViolationError, ValidationError
from .estimators import (
    DEGENERATE_RISK_EPS,
    group_starts,
    kaplan_meier,
    positions,
)
from .kernels import KernelSpec, density_estimate, nw_weight_matrix

__all__ = [
    "DENOMINATOR_GUARD",
    "InfluenceContext",
    "InfluenceTerms",
    "CovarianceSurface",
    "build_context",
    "guard_quantile",
    "influence_km",
    "influence_km_matrix",
    "influence_counterfactual",
    "influence_counterfactual_matrix",
    "sigma11_hat",
    "sigma22_hat",
    "sigma12_hat",
    "km_variance",
    "effect_variances",
    "pointwise_ci",
]

DENOMINATOR_GUARD = 1e-6


def guard_quantile(sample: CensoredSample, q: float = 0.95) -> float:
    """Upper end of the inference range: the ``q`` quantile of uncensored durations."""
    y1 = sample.y[np.asarray(sample.delta) == 1]
    if y1.size == 0:
        raise GuardViolationError("no uncensored durations; inference range is empty")
    return float(np.quantile(y1, q))


@dataclass(frozen=True, eq=False)
class InfluenceContext:
    """Plug-in ingredients for the influence functions, evaluated on ``grid``.

    Arrays indexed by ``i`` follow the canonical (sorted) sample order and
    ``xstar`` is permuted the same way, so row ``i`` of every array belongs
    to unit ``i``.
    """

    sample: CensoredSample
    xstar: np.ndarray
    grid: Grid
    h: float
    spec: KernelSpec
    variant: str
    zeta: float
    guard: float
    ecdf_y: StepCurve
    sub_ecdf_y: StepCurve
    km_curve: StepCurve
    f_base: np.ndarray
    cond_star: np.ndarray
    f_star: np.ndarray
    cond_own: np.ndarray
    own_weights: np.ndarray
    cond_integral: np.ndarray
    own_surv_minus: np.ndarray
    own_integral: np.ndarray
    density_ratio: np.ndarray

    @property
    def n(self) -> int:
        return self.sample.n


def _km_integral(ctx_ecdf: StepCurve, ctx_sub: StepCurve, u, guard: float, power: int = 2, discrete: bool = False):
    """``sum_{k: y_k <= u} dF^d(y_k) / (1 - F(y_k-))^power`` for each ``u``.

    With ``discrete`` the integrand carries an extra ``(1 - F(y_k)) / (1 - F(y_k-))``.
    """
    knots = ctx_sub.knots
    jumps = ctx_sub.jumps()
    surv_minus = 1.0 - ctx_ecdf.left_limit(knots)
    used = jumps != 0
    if np.any(used & (np.abs(surv_minus) < guard)):
        u_max = float(np.max(np.atleast_1d(u)))
        offending = knots[used & (np.abs(surv_minus) < guard)]
        if offending.size and offending[0] <= u_max:
            raise GuardViolationError(
                f"1 - F_Y(u-) below {guard} at u={offending[0]} inside the integration range"
            )
    safe = np.where(np.abs(surv_minus) < guard, 1.0, surv_minus)
    terms = np.where(used, jumps / safe**power, 0.0)
    if discrete:
        terms = terms * (1.0 - ctx_ecdf(knots)) / safe
    cum = np.concatenate(([0.0], np.cumsum(terms)))
    return cum[np.searchsorted(knots, np.asarray(u, dtype=float), side="right")]


def _empirical_curves(s: CensoredSample) -> tuple[StepCurve, StepCurve]:
    """ECDF of Y and the uncensored sub-distribution ``P(Y <= u, delta = 1)``."""
    n = s.n
    uy = np.unique(s.y)
    ecdf_y = StepCurve(uy, positions(s.y, uy) / n)
    uy1 = np.unique(s.y[s.delta == 1])
    sub_counts = np.cumsum(s.delta.astype(float))
    sub_ecdf_y = StepCurve(uy1, sub_counts[positions(s.y, uy1) - 1] / n)
    return ecdf_y, sub_ecdf_y


def build_context(
    sample: CensoredSample,
    xstar,
    h: float,
    spec: KernelSpec,
    grid,
    variant: str = "exponential",
    zeta_quantile: float = 0.95,
    guard: float = DENOMINATOR_GUARD,
) -> InfluenceContext:
    """Assemble every plug-in estimate the influence functions need.

    ``xstar`` must be row-aligned with ``sample`` in its *input* order (for
    ``X* = pi(X)`` row ``i`` is the image of unit ``i``). Grid points above the
    guard quantile raise :class:`GuardViolationError`; trim the grid first
    (see :func:`guard_quantile`).
    """
    grid = as_grid(grid)
    s, order = validate_sample(sample, return_order=True)
    if not isinstance(xstar, CounterfactualCovariates):
        xstar = CounterfactualCovariates(xstar)
    xstar.check_against(s)
    xs = np.asarray(xstar.rows)[order]
    zeta = guard_quantile(s, zeta_quantile)
    if grid.points[-1] > zeta:
        raise GuardViolationError(
            f"grid reaches {grid.points[-1]} beyond the inference limit {zeta:.6g} "
            f"({zeta_quantile:.0%} quantile of uncensored durations)"
        )
    n = s.n
    t = grid.points
    gs = group_starts(s.y)
    pos = positions(s.y, t)

    ecdf_y, sub_ecdf_y = _empirical_curves(s)
    km = kaplan_meier(s)

    w_star = nw_weight_matrix(xs, s.x, h, spec)
    cond_star, _ = _accel.beran_at(w_star, s.delta, gs, pos, variant == "product_limit", DEGENERATE_RISK_EPS)
    f_star = cond_star.mean(axis=0)

    w_own = nw_weight_matrix(s.x, s.x, h, spec)
    cond_own, _ = _accel.beran_at(w_own, s.delta, gs, pos, variant == "product_limit", DEGENERATE_RISK_EPS)
    integral, min_denom = _accel.hazard_integral_at(w_own, s.delta, gs, pos, guard)
    if np.any(min_denom < guard):
        i = int(np.argmin(min_denom))
        raise GuardViolationError(
            f"1 - F_Y|X(u-|X_{i}) = {min_denom[i]:.3g} below {guard} inside the grid range"
        )
    cum_own = np.concatenate((np.zeros((n, 1)), np.cumsum(w_own, axis=1)), axis=1)
    own_surv_minus = 1.0 - cum_own[np.arange(n), gs]
    # integral up to each unit's own duration (ties included); only read where Y_i <= t
    prefix, _ = _accel.hazard_integral_at(w_own, s.delta, gs, np.arange(n + 1), guard)
    own_int = prefix[np.arange(n), positions(s.y, s.y)]

    m_hat = density_estimate(s.x, s.x, h, spec)
    m_star = density_estimate(s.x, xs, h, spec)
    if np.any(np.abs(m_hat) < guard):
        raise GuardViolationError("covariate density estimate vanishes at a sample point")
    return InfluenceContext(
        sample=s,
        xstar=xs,
        grid=grid,
        h=float(h),
        spec=spec,
        variant=variant,
        zeta=zeta,
        guard=guard,
        ecdf_y=ecdf_y,
        sub_ecdf_y=sub_ecdf_y,
        km_curve=km,
        f_base=km(t),
        cond_star=cond_star,
        f_star=f_star,
        cond_own=cond_own,
        own_weights=w_own,
        cond_integral=integral,
        own_surv_minus=own_surv_minus,
        own_integral=own_int,
        density_ratio=m_star / m_hat,
    )


def _check_t(ctx: InfluenceContext, t: float) -> None:
    if t > ctx.zeta:
        raise GuardViolationError(f"t={t} beyond the inference limit {ctx.zeta:.6g}")


def influence_km(ctx: InfluenceContext, y: float, delta: int, t: float) -> float:
    """Influence value of one observation on the Kaplan-Meier estimate at ``t``."""
    _check_t(ctx, t)
    surv_t = 1.0 - ctx.km_curve(t)
    first = 0.0
    if y <= t and delta == 1:
        denom = 1.0 - ctx.ecdf_y.left_limit(y)
        if abs(denom) < ctx.guard:
            raise GuardViolationError(f"1 - F_Y(y-) below {ctx.guard} at y={y}")
        first = 1.0 / denom
    integral = _km_integral(ctx.ecdf_y, ctx.sub_ecdf_y, min(y, t), ctx.guard)
    return float(surv_t * (first - integral))


def influence_km_matrix(ctx: InfluenceContext, discrete: bool = False) -> np.ndarray:
    """Influence values for every sample unit (rows) at every grid time (columns)."""
    s = ctx.sample
    t = ctx.grid.points
    surv_t = 1.0 - ctx.f_base
    y = s.y
    denom = 1.0 - ctx.ecdf_y.left_limit(y)
    hit = (y[:, None] <= t[None, :]) & (s.delta[:, None] == 1)
    if np.any(hit.any(axis=1) & (np.abs(denom) < ctx.guard)):
        raise GuardViolationError("1 - F_Y(y-) below guard for an uncensored unit inside the grid")
    first = np.where(hit, 1.0 / np.where(np.abs(denom) < ctx.guard, 1.0, denom)[:, None], 0.0)
    upto = np.minimum(y[:, None], t[None, :])
    integral = _km_integral(ctx.ecdf_y, ctx.sub_ecdf_y, upto, ctx.guard)
    return surv_t[None, :] * (first - integral)


class InfluenceTerms(NamedTuple):
    """The two addends of the counterfactual influence value."""

    covariate: float
    estimation: float

    @property
    def total(self) -> float:
        return self.covariate + self.estimation


def influence_counterfactual(ctx: InfluenceContext, y: float, delta: int, x, xstar_row, t: float) -> InfluenceTerms:
    """Influence value of one observation ``(y, delta, x, x*)`` on the counterfactual CDF at ``t``.

    The covariate addend is ``F_T|X(t | x*) - F_T*(t)``; the estimation addend
    is the conditional Kaplan-Meier influence at ``x`` scaled by the density
    ratio ``m*(x) / m(x)``.
    """
    _check_t(ctx, t)
    s = ctx.sample
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xq = np.vstack((np.atleast_1d(np.asarray(xstar_row, dtype=float)), x))
    w = nw_weight_matrix(xq, s.x, ctx.h, ctx.spec)
    gs = group_starts(s.y)
    pos_t = positions(s.y, [t])
    pl = ctx.variant == "product_limit"
    cond, _ = _accel.beran_at(w, s.delta, gs, pos_t, pl, DEGENERATE_RISK_EPS)
    k = int(np.searchsorted(ctx.grid.points, t))
    if k < len(ctx.grid) and ctx.grid.points[k] == t:
        f_star_t = float(ctx.f_star[k])
    else:
        w_all = nw_weight_matrix(ctx.xstar, s.x, ctx.h, ctx.spec)
        f_star_t = float(_accel.beran_at(w_all, s.delta, gs, pos_t, pl, DEGENERATE_RISK_EPS)[0].mean())
    covariate = float(cond[0, 0]) - f_star_t

    wx = w[1:2]
    cum = np.concatenate(([0.0], np.cumsum(wx[0])))
    first = 0.0
    if y <= t and delta == 1:
        denom = 1.0 - cum[np.searchsorted(s.y, y, side="left")]
        if abs(denom) < ctx.guard:
            raise GuardViolationError(f"1 - F_Y|X(y-|x) below {ctx.guard} at y={y}")
        first = 1.0 / denom
    upto = positions(s.y, [min(y, t)])
    integral, min_denom = _accel.hazard_integral_at(wx, s.delta, gs, upto, ctx.guard)
    if min_denom[0] < ctx.guard:
        raise GuardViolationError("1 - F_Y|X(u-|x) below guard inside the integration range")
    ratio = density_estimate(x, ctx.xstar, ctx.h, ctx.spec) / density_estimate(x, s.x, ctx.h, ctx.spec)
    estimation = (1.0 - float(cond[1, 0])) * (first - float(integral[0, 0])) * ratio
    return InfluenceTerms(covariate, float(estimation))


def _xi_star_matrix(ctx: InfluenceContext) -> np.ndarray:
    s = ctx.sample
    t = ctx.grid.points
    y = s.y
    hit = (y[:, None] <= t[None, :]) & (s.delta[:, None] == 1)
    denom = ctx.own_surv_minus
    if np.any(hit.any(axis=1) & (np.abs(denom) < ctx.guard)):
        raise GuardViolationError("1 - F_Y|X(y-|X) below guard for an uncensored unit inside the grid")
    first = np.where(hit, 1.0 / np.where(np.abs(denom) < ctx.guard, 1.0, denom)[:, None], 0.0)
    # integral to min(Y_i, t): whichever comes first in the sorted order
    integral = np.where(y[:, None] <= t[None, :], ctx.own_integral[:, None], ctx.cond_integral)
    return (1.0 - ctx.cond_own) * (first - integral)


def influence_counterfactual_matrix(ctx: InfluenceContext) -> tuple[np.ndarray, np.ndarray]:
    """``(covariate, estimation)`` addends for every unit and grid time."""
    covariate = ctx.cond_star - ctx.f_star[None, :]
    estimation = _xi_star_matrix(ctx) * ctx.density_ratio[:, None]
    return covariate, estimation


@dataclass(frozen=True, eq=False)
class CovarianceSurface:
    grid: Grid
    matrix: np.ndarray

    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix).copy()


def _min_index_products(a: np.ndarray, b: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """``M[g, k] = mean_i a[i, g] b[i, k] inner[i, min(g, k)]`` for a sorted grid."""
    n, G = a.shape
    out = np.empty((G, G))
    for g in range(G):
        # k >= g: min index is g
        out[g, g:] = (a[:, g] * inner[:, g]) @ b[:, g:] / n
        # k < g: min index is k
        if g:
            out[g, :g] = np.einsum("i,ik,ik->k", a[:, g], b[:, :g], inner[:, :g]) / n
    return out


def sigma11_hat(ctx: InfluenceContext) -> CovarianceSurface:
    """Plug-in covariance of the counterfactual CDF process.

    Sample covariance of ``F_T|X(u | X*_i)`` around its mean plus the averaged
    conditional Kaplan-Meier variance at each ``X_i`` weighted by the squared
    density ratio.
    """
    dev = ctx.cond_star - ctx.f_star[None, :]
    first = dev.T @ dev / ctx.n
    a = (1.0 - ctx.cond_own) * ctx.density_ratio[:, None]
    second = _min_index_products(a, a, ctx.cond_integral)
    m = first + second
    return CovarianceSurface(ctx.grid, 0.5 * (m + m.T))


def sigma22_hat(ctx: InfluenceContext, form: str = "plug_in") -> CovarianceSurface:
    """Plug-in covariance of the Kaplan-Meier process.

    ``form="plug_in"`` integrates ``dF^d_Y / (1 - F_Y-)^2``. ``form="discrete"``
    integrates ``dF^d_Y (1 - F_Y) / (1 - F_Y-)^3``, whose diagonal equals the
    empirical second moment of :func:`influence_km_matrix` exactly when there
    are no tied durations; the two forms agree as the risk sets grow.
    """
    if form not in ("plug_in", "discrete"):
        raise ValidationError("form must be 'plug_in' or 'discrete'")
    t = ctx.grid.points
    integral = _km_integral(ctx.ecdf_y, ctx.sub_ecdf_y, t, ctx.guard, discrete=form == "discrete")
    surv = 1.0 - ctx.f_base
    idx = np.arange(len(t))
    inner = integral[np.minimum(idx[:, None], idx[None, :])]
    return CovarianceSurface(ctx.grid, np.outer(surv, surv) * inner)


def km_variance(sample: CensoredSample, grid, zeta_quantile: float = 0.95, guard: float = DENOMINATOR_GUARD) -> np.ndarray:
    """Diagonal of the plug-in Kaplan-Meier covariance without building a full context.

    Grid points above the guard quantile get NaN.
    """
    s = validate_sample(sample)
    t = as_grid(grid).points
    ecdf_y, sub = _empirical_curves(s)
    zeta = guard_quantile(s, zeta_quantile)
    inside = t <= zeta
    out = np.full(t.shape, np.nan)
    if inside.any():
        ti = t[inside]
        surv = 1.0 - kaplan_meier(s)(ti)
        out[inside] = surv**2 * _km_integral(ecdf_y, sub, ti, guard)
    return out


def sigma12_hat(ctx: InfluenceContext, covariate_term: bool = True) -> np.ndarray:
    """Cross-covariance ``M[g, k]`` of the counterfactual process at ``t_g`` and the KM process at ``t_k``.

    ``covariate_term`` keeps the part driven by the covariate variation in
    ``X*``; it vanishes when ``X*`` is independent of the sample and should
    be kept when ``X*`` is a function of ``X``.
    """
    xi = influence_km_matrix(ctx)
    covariate, estimation = influence_counterfactual_matrix(ctx)
    m = estimation.T @ xi / ctx.n
    if covariate_term:
        m = m + covariate.T @ xi / ctx.n
    return m


def effect_variances(ctx: InfluenceContext, covariate_term: bool = True, effect_form: str = "plug_in") -> dict[str, np.ndarray]:
    """Asymptotic variances (of ``sqrt(n)`` times the error) for every reported curve.

    Hazard entries use the delta method for ``-log(1 - F)``.

    Parameters
    ----------
    ctx : InfluenceContext
    covariate_term : bool
        Passed to :func:`sigma12_hat`.
    effect_form : {"plug_in", "influence"}
        ``"plug_in"`` combines the surfaces as ``Sigma11 + Sigma22 - 2 Sigma12``;
        entries can come out negative and are floored in :func:`pointwise_ci`.
        ``"influence"`` uses the empirical second moment of the difference of
        influence values, which is never negative but ignores the higher-order
        smoothing variance and is too small for the study design.
    """
    if effect_form not in ("plug_in", "influence"):
        raise ValidationError("effect_form must be 'plug_in' or 'influence'")
    s11 = sigma11_hat(ctx).diagonal()
    s22 = sigma22_hat(ctx).diagonal()
    sf = 1.0 - ctx.f_star
    sb = 1.0 - ctx.f_base
    with np.errstate(divide="ignore", invalid="ignore"):
        if effect_form == "plug_in":
            s12 = np.diag(sigma12_hat(ctx, covariate_term)).copy()
            d_f = s11 + s22 - 2.0 * s12
            d_lam = s11 / sf**2 + s22 / sb**2 - 2.0 * s12 / (sf * sb)
        else:
            xi = influence_km_matrix(ctx)
            covariate, estimation = influence_counterfactual_matrix(ctx)
            xi_star = estimation + covariate if covariate_term else estimation
            d_f = np.mean((xi_star - xi) ** 2, axis=0)
            d_lam = np.mean((xi_star / sf[None, :] - xi / sb[None, :]) ** 2, axis=0)
        return {
            "f_star": s11,
            "f_base": s22,
            "delta_f": d_f,
            "lambda_star": s11 / sf**2,
            "lambda_base": s22 / sb**2,
            "delta_lambda": d_lam,
        }


def pointwise_ci(estimate, variance, n: int, alpha: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Normal-approximation band ``estimate +/- z_(1-alpha/2) sqrt(variance / n)``.

    Negative variances (possible with higher-order kernels) are floored at 0.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha!r}")
    est = np.asarray(estimate, dtype=float)
    var = np.maximum(np.asarray(variance, dtype=float), 0.0)
    z = NormalDist().inv_cdf(1.0 - alpha / 2.0)
    half = z * np.sqrt(var / n)
    return est - half, est + half
