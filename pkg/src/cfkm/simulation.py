"""Monte Carlo study of the counterfactual estimator under random censoring.

Design: ``T = 5 - 3 X1 + 2 X2 + eps * sqrt(X1^2 + X2^2)`` with
``X1, X2 ~ Beta(2, 2)``, ``eps ~ Exp(mean 2)`` and
``C ~ LogNormal(2.5, 1)``, all independent; ``Y = min(T, C)``. The policy
shifts covariates to ``X* = 0.05 + 0.9 X`` and leaves ``eps`` and ``C``
untouched.

Random numbers
--------------
Each draw uses one ``numpy.random.Generator(PCG64(seed))`` and a single
``(n, 9)`` block of uniforms ``U`` consumed column-wise:

* columns 0-2: ``X1`` = median of three uniforms (exact Beta(2, 2));
* columns 3-5: ``X2`` likewise;
* column 6:    ``eps = -2 log(1 - U)``;
* columns 7-8: ``Z = sqrt(-2 log(1 - U7)) cos(2 pi U8)`` (Box-Muller) and
  ``C = exp(2.5 + Z)``.

Replication seeds come from :func:`derive_seed`, a splitmix64 finalizer
chain over ``(base_seed, n, replication)``.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .core import CensoredSample, CounterfactualCovariates, Grid, as_grid, validate_sample
from .counterfactual import (
    counterfactual_cdf,
    counterfactual_curve,
    cumulative_hazard,
    oracle_cdf,
    rothe_cdf,
)
from .errors import CfkmError, ConfigError, EstimationFailure, GridError, QuadratureError
from .estimators import kaplan_meier
from .kernels import BandwidthRule, KernelSpec

__all__ = [
    "POLICY_SHIFT",
    "POLICY_SCALE",
    "PAPER_GRID",
    "derive_seed",
    "DgpDraw",
    "generate_draw",
    "policy_map",
    "conditional_truth",
    "TruthCurves",
    "truth_curves",
    "integrated_error",
    "miae",
    "rmise",
    "StudyConfig",
    "SimulationReport",
    "run_study",
    "ESTIMATORS",
]

POLICY_SHIFT = 0.05
POLICY_SCALE = 0.9
PAPER_GRID = Grid.uniform(4.25, 8.15, 0.05)
ESTIMATORS = ("km", "counterfactual", "oracle", "rothe")
TARGETS = ("cdf", "hazard")

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, n: int, replication: int) -> int:
    """``mix(mix(mix(base) ^ n) ^ r)`` with the splitmix64 finalizer ``mix``."""
    z = _splitmix64(int(base_seed) & _MASK64)
    z = _splitmix64(z ^ (int(n) & _MASK64))
    return _splitmix64(z ^ (int(replication) & _MASK64))


def policy_map(x: np.ndarray) -> np.ndarray:
    return POLICY_SHIFT + POLICY_SCALE * np.asarray(x, dtype=float)


def _location(x1, x2):
    return 5.0 - 3.0 * x1 + 2.0 * x2


def _scale(x1, x2):
    return np.sqrt(x1 * x1 + x2 * x2)


@dataclass(frozen=True, eq=False)
class DgpDraw:
    """Observed sample, counterfactual covariates and the latent quantities behind them."""

    sample: CensoredSample
    xstar: CounterfactualCovariates
    t: np.ndarray
    c: np.ndarray
    eps: np.ndarray
    t_star: np.ndarray
    y_star: np.ndarray
    delta_star: np.ndarray
    seed: int


def generate_draw(n: int, seed: int) -> DgpDraw:
    if n < 1:
        raise ConfigError("sample size must be at least 1")
    rng = np.random.Generator(np.random.PCG64(int(seed) & _MASK64))
    u = rng.random((n, 9))
    b1 = u[:, 0:3]
    b2 = u[:, 3:6]
    x1 = b1.sum(axis=1) - b1.max(axis=1) - b1.min(axis=1)
    x2 = b2.sum(axis=1) - b2.max(axis=1) - b2.min(axis=1)
    eps = -2.0 * np.log1p(-u[:, 6])
    z = np.sqrt(-2.0 * np.log1p(-u[:, 7])) * np.cos(2.0 * np.pi * u[:, 8])
    c = np.exp(2.5 + z)
    x = np.column_stack((x1, x2))
    xs = policy_map(x)
    t = _location(x1, x2) + eps * _scale(x1, x2)
    t_star = _location(xs[:, 0], xs[:, 1]) + eps * _scale(xs[:, 0], xs[:, 1])
    y = np.minimum(t, c)
    delta = (t <= c).astype(np.int8)
    y_star = np.minimum(t_star, c)
    delta_star = (t_star <= c).astype(np.int8)
    return DgpDraw(
        sample=CensoredSample(y, delta, x),
        xstar=CounterfactualCovariates(xs),
        t=t,
        c=c,
        eps=eps,
        t_star=t_star,
        y_star=y_star,
        delta_star=delta_star,
        seed=int(seed),
    )


def conditional_truth(t, x1, x2):
    """True conditional CDF of T given X = (x1, x2)."""
    mu = _location(x1, x2)
    s = _scale(x1, x2)
    z = np.asarray(t, dtype=float) - mu
    with np.errstate(divide="ignore", invalid="ignore"):
        val = -np.expm1(-z / (2.0 * s))
    return np.where(z > 0, val, 0.0)


def _beta22(u):
    return 6.0 * u * (1.0 - u)


@functools.lru_cache(maxsize=8)
def _leggauss(nodes: int):
    return np.polynomial.legendre.leggauss(nodes)


def _cdf_at(t: float, shift: float, scale: float, nodes: int) -> float:
    x, w = _leggauss(nodes)
    cuts = {0.0, 1.0}
    for target in (0.0, 1.0):
        # x2 where the x1 cut below crosses 0 or 1
        x2c = (3.0 * scale * target - 5.0 + shift + t) / (2.0 * scale)
        if 0.0 < x2c < 1.0:
            cuts.add(x2c)
    cuts = sorted(cuts)
    total = 0.0
    for a2, b2 in zip(cuts[:-1], cuts[1:]):
        half2 = 0.5 * (b2 - a2)
        x2 = a2 + half2 * (x + 1.0)
        w2 = half2 * w
        # conditional CDF is positive only for x1 above the root of
        # 5 - 3 (shift + scale x1) + 2 (shift + scale x2) = t
        lo = np.clip((5.0 - shift + 2.0 * scale * x2 - t) / (3.0 * scale), 0.0, 1.0)
        half1 = 0.5 * (1.0 - lo)
        x1 = lo[:, None] + half1[:, None] * (x[None, :] + 1.0)
        w1 = half1[:, None] * w[None, :]
        f = conditional_truth(t, shift + scale * x1, (shift + scale * x2)[:, None])
        inner = np.sum(w1 * _beta22(x1) * f, axis=1)
        total += float(np.sum(w2 * _beta22(x2) * inner))
    return total


@dataclass(frozen=True, eq=False)
class TruthCurves:
    grid: Grid
    f_t: np.ndarray
    f_t_star: np.ndarray
    lambda_t: np.ndarray
    lambda_t_star: np.ndarray


@functools.lru_cache(maxsize=16)
def _truth_cached(points: tuple, nodes: int, tol: float):
    out = []
    for shift, scale in ((0.0, 1.0), (POLICY_SHIFT, POLICY_SCALE)):
        vals = []
        for t in points:
            coarse = _cdf_at(t, shift, scale, nodes)
            fine = _cdf_at(t, shift, scale, 2 * nodes)
            if abs(fine - coarse) > tol:
                raise QuadratureError(
                    f"quadrature at t={t} changed by {abs(fine - coarse):.3g} on node doubling"
                )
            vals.append(fine)
        out.append(np.asarray(vals))
    return tuple(out)


def truth_curves(grid=PAPER_GRID, nodes: int = 200, tol: float = 1e-8) -> TruthCurves:
    """Population ``F_T``, ``F_T*`` and their cumulative hazards on ``grid``.

    Tensor Gauss-Legendre over the Beta(2, 2) square, with the x1 range cut
    at the kink where the conditional CDF switches on, so each panel is
    smooth. Raises :class:`QuadratureError` if doubling the nodes moves any
    value by more than ``tol``.
    """
    grid = as_grid(grid)
    f_t, f_s = _truth_cached(tuple(float(p) for p in grid.points), nodes, tol)
    return TruthCurves(grid, f_t, f_s, -np.log1p(-f_t), -np.log1p(-f_s))


def _step_of(grid: Grid) -> float:
    pts = grid.points
    if grid.step is not None:
        return grid.step
    if pts.size < 2:
        raise GridError("integration needs a grid with at least two points or a declared step")
    steps = np.diff(pts)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
        raise GridError("rectangle-rule integration needs an equispaced grid")
    return float(steps[0])


def integrated_error(est, truth, grid, power: int = 1) -> np.ndarray | float:
    """Rectangle rule ``step * sum |est - truth|^power`` over the grid (per row if 2-d)."""
    grid = as_grid(grid)
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape[-1] != len(grid) or truth.shape[-1] != len(grid):
        raise GridError("estimate, truth and grid lengths differ")
    err = _step_of(grid) * np.sum(np.abs(est - truth) ** power, axis=-1)
    return float(err) if np.ndim(err) == 0 else err


def miae(est, truth, grid) -> float:
    """Mean over replications (rows) of the integrated absolute error."""
    return float(np.mean(np.atleast_1d(integrated_error(est, truth, grid, 1))))


def rmise(est, truth, grid) -> float:
    """Square root of the mean integrated squared error over replications (rows)."""
    return float(math.sqrt(np.mean(np.atleast_1d(integrated_error(est, truth, grid, 2)))))


@dataclass
class StudyConfig:
    sizes: tuple[int, ...] = (100, 200, 400, 800)
    reps: int = 1000
    base_seed: int = 20240601
    bandwidth: BandwidthRule = field(default_factory=BandwidthRule)
    kernel: str = "quartic4"
    grid: Grid = PAPER_GRID
    estimators: tuple[str, ...] = ESTIMATORS
    hazard_method: str = "neg_log"
    variant: str = "exponential"
    strict: bool = True
    output: str | None = None

    def __post_init__(self):
        self.sizes = tuple(int(n) for n in self.sizes)
        self.estimators = tuple(self.estimators)
        if not self.sizes or any(n < 1 for n in self.sizes):
            raise ConfigError("sizes must be positive integers")
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad:
            raise ConfigError(f"unknown estimators {sorted(bad)}")
        if self.hazard_method not in ("neg_log", "na_integral"):
            raise ConfigError(f"unknown hazard method {self.hazard_method!r}")
        self.grid = as_grid(self.grid)


@dataclass
class SimulationReport:
    """MIAE / RMISE per ``(n, estimator, target)``.

    ``errors`` keeps the per-replication integrated absolute and squared
    errors so the summary can be recomputed; failed replications are NaN.
    """

    config: StudyConfig
    rows: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def cell(self, n: int, estimator: str, target: str, metric: str) -> float:
        return self.rows[(n, estimator, target)][metric]

    def table(self, target: str, metric: str) -> list[list]:
        """Rows ``[n, value per estimator...]`` in the configured estimator order."""
        out = []
        for n in self.config.sizes:
            out.append([n] + [self.rows[(n, e, target)][metric] for e in self.config.estimators])
        return out


def _curves(draw: DgpDraw, cfg: StudyConfig, spec: KernelSpec):
    s = validate_sample(draw.sample)
    grid = cfg.grid
    h = cfg.bandwidth(s.n)
    out = {}
    full = {}
    if "km" in cfg.estimators:
        km = kaplan_meier(s)
        out["km"] = km(grid.points)
        full["km"] = km
    if "counterfactual" in cfg.estimators:
        out["counterfactual"] = counterfactual_cdf(s, draw.xstar, h, spec, grid, cfg.variant).values
        if cfg.hazard_method == "na_integral":
            full["counterfactual"] = counterfactual_curve(s, draw.xstar, h, spec, cfg.variant)
    if "oracle" in cfg.estimators:
        orc = oracle_cdf(draw.y_star, draw.delta_star)
        out["oracle"] = orc(grid.points)
        full["oracle"] = orc
    if "rothe" in cfg.estimators:
        out["rothe"] = rothe_cdf(s, draw.xstar, h, spec, grid).values
    hazards = {}
    for name, vals in out.items():
        if cfg.hazard_method == "na_integral" and name in full:
            hazards[name] = cumulative_hazard(
                method="na_integral", curve=full[name], grid=grid, on_divergence="truncate"
            )
        else:
            hazards[name] = cumulative_hazard(vals, "neg_log", on_divergence="truncate")
    return out, hazards


def run_study(
    config: StudyConfig | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> SimulationReport:
    """Replicate the study for every sample size and aggregate MIAE / RMISE.

    A replication whose estimator raises, or whose hazard diverges inside the
    grid, aborts the study when ``config.strict`` is set; otherwise it is
    recorded as NaN and excluded from that cell's averages.
    """
    cfg = config or StudyConfig()
    spec = KernelSpec(d=2, profile=cfg.kernel)
    truth = truth_curves(cfg.grid)
    target_truth = {
        ("cdf", False): truth.f_t,
        ("cdf", True): truth.f_t_star,
        ("hazard", False): truth.lambda_t,
        ("hazard", True): truth.lambda_t_star,
    }
    report = SimulationReport(cfg)
    start = time.perf_counter()
    for n in cfg.sizes:
        seeds = [derive_seed(cfg.base_seed, n, r) for r in range(cfg.reps)]
        report.seeds[n] = seeds
        errs = {
            (e, tg, p): np.full(cfg.reps, np.nan)
            for e in cfg.estimators
            for tg in TARGETS
            for p in (1, 2)
        }
        for r, seed in enumerate(seeds):
            draw = generate_draw(n, seed)
            try:
                cdfs, hazards = _curves(draw, cfg, spec)
            except CfkmError as exc:
                if cfg.strict:
                    raise EstimationFailure(f"n={n} replication {r} (seed {seed}): {exc}") from exc
                continue
            for e in cfg.estimators:
                counterfactual = e != "km"
                for tg, curve in (("cdf", cdfs[e]), ("hazard", hazards[e])):
                    if np.any(np.isnan(curve)):
                        if cfg.strict:
                            raise EstimationFailure(
                                f"n={n} replication {r} (seed {seed}): {e} {tg} diverges inside the grid"
                            )
                        continue
                    ref = target_truth[(tg, counterfactual)]
                    errs[(e, tg, 1)][r] = integrated_error(curve, ref, cfg.grid, 1)
                    errs[(e, tg, 2)][r] = integrated_error(curve, ref, cfg.grid, 2)
            if progress is not None:
                progress(n, r)
        for e in cfg.estimators:
            for tg in TARGETS:
                a = errs[(e, tg, 1)]
                q = errs[(e, tg, 2)]
                ok = ~np.isnan(a)
                report.rows[(n, e, tg)] = {
                    "miae": float(np.mean(a[ok])) if ok.any() else float("nan"),
                    "rmise": float(math.sqrt(np.mean(q[ok]))) if ok.any() else float("nan"),
                    "reps": int(ok.sum()),
                    "failed": int((~ok).sum()),
                }
                report.errors[(n, e, tg)] = (a, q)
    report.elapsed = time.perf_counter() - start
    return report


def draws(n: int, reps: int, base_seed: int) -> Iterable[DgpDraw]:
    for r in range(reps):
        yield generate_draw(n, derive_seed(base_seed, n, r))
