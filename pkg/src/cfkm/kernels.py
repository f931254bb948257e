"""Product kernels, bandwidth rules, Nadaraya-Watson weights and density estimates."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import DimensionMismatchError, EmptyNeighborhoodError, ValidationError

__all__ = [
    "KernelSpec",
    "BandwidthRule",
    "kernel_value",
    "default_bandwidth",
    "nw_weights",
    "nw_weight_matrix",
    "density_estimate",
    "kernel_moments",
    "check_moment_conditions",
    "check_bandwidth_rates",
]

EMPTY_NEIGHBORHOOD_EPS = 1e-12

_PROFILES = {
    # name: (accel id, order)
    "quartic4": (_accel.QUARTIC4, 4),
    "epanechnikov": (_accel.EPANECHNIKOV, 2),
}


@dataclass(frozen=True)
class KernelSpec:
    """Product kernel ``K(u) = prod_c k(u_c)`` supported on ``[-1, 1]^d``.

    ``quartic4`` is the fourth-order profile ``(15/32)(3 - 10u^2 + 7u^4)``; it
    goes negative for ``sqrt(3/7) < |u| < 1``. ``epanechnikov`` is the usual
    nonnegative second-order profile.
    """

    d: int
    profile: str = "quartic4"
    order: int | None = None

    def __post_init__(self):
        if self.profile not in _PROFILES:
            raise ValidationError(
                f"unknown kernel {self.profile!r}; choose from {sorted(_PROFILES)}"
            )
        if self.d < 1:
            raise ValidationError("kernel dimension must be at least 1")
        natural = _PROFILES[self.profile][1]
        if self.order is None:
            object.__setattr__(self, "order", natural)
        elif self.order != natural:
            raise ValidationError(
                f"kernel {self.profile!r} has order {natural}, not {self.order}"
            )

    @property
    def kind(self) -> int:
        return _PROFILES[self.profile][0]

    def univariate(self, u) -> np.ndarray:
        return _accel.numpy_impl.profile(np.asarray(u, dtype=float), self.kind)


@dataclass(frozen=True)
class BandwidthRule:
    """``h = constant * n ** (-exponent)``, or a fixed value when ``fixed`` is set."""

    constant: float = 3.0
    exponent: float = 1.0 / 7.0
    fixed: float | None = None

    def __post_init__(self):
        if self.fixed is not None and not self.fixed > 0:
            raise ValidationError("fixed bandwidth must be positive")
        if self.fixed is None and not self.constant > 0:
            raise ValidationError("bandwidth constant must be positive")

    def __call__(self, n: int) -> float:
        if self.fixed is not None:
            return float(self.fixed)
        if n < 1:
            raise ValidationError("sample size must be at least 1")
        return float(self.constant * n ** (-self.exponent))


def default_bandwidth(n: int) -> float:
    """``3 n^(-1/7)``."""
    return BandwidthRule()(n)


def kernel_value(spec: KernelSpec, u) -> float:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (spec.d,):
        raise DimensionMismatchError(f"expected a point of dimension {spec.d}, got shape {u.shape}")
    return float(np.prod(spec.univariate(u)))


def _check_h(h: float) -> None:
    if not (np.isfinite(h) and h > 0):
        raise ValidationError(f"bandwidth must be positive and finite, got {h!r}")


def _as_points(a, d: int, what: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :] if d > 1 or arr.shape[0] == 1 else arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != d:
        raise DimensionMismatchError(f"{what} must have dimension {d}")
    return arr


def nw_weight_matrix(query, sample_xs, h: float, spec: KernelSpec) -> np.ndarray:
    """Row-normalized Nadaraya-Watson weights, one row per query point.

    Raises :class:`EmptyNeighborhoodError` naming the first query row whose
    kernel mass is below ``1e-12`` in absolute value. Negative row sums (a
    higher-order kernel in a sparse region) are passed through.
    """
    _check_h(h)
    xs = _as_points(sample_xs, spec.d, "sample covariates")
    q = _as_points(query, spec.d, "query points")
    raw = _accel.kernel_matrix(q, xs, h, spec.kind)
    total = raw.sum(axis=1)
    empty = np.abs(total) < EMPTY_NEIGHBORHOOD_EPS
    if np.any(empty):
        row = int(np.flatnonzero(empty)[0])
        raise EmptyNeighborhoodError(
            f"no kernel mass near query row {row} (|sum K| < {EMPTY_NEIGHBORHOOD_EPS})", row=row
        )
    return raw / total[:, None]


def nw_weights(x, sample_xs, h: float, spec: KernelSpec) -> np.ndarray:
    """Weights ``K((x - X_l)/h) / sum_i K((x - X_i)/h)`` for a single point ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.d,):
        raise DimensionMismatchError(f"x must have dimension {spec.d}")
    return nw_weight_matrix(x[None, :], sample_xs, h, spec)[0]


def density_estimate(x, sample_xs, h: float, spec: KernelSpec) -> np.ndarray | float:
    """Kernel density ``(n h^d)^-1 sum_i K((x - X_i)/h)``.

    ``x`` may be a single point or an (m, d) array of points.
    """
    _check_h(h)
    xs = _as_points(sample_xs, spec.d, "sample covariates")
    single = np.ndim(x) <= 1 and np.size(x) == spec.d
    q = _as_points(np.atleast_1d(np.asarray(x, dtype=float)), spec.d, "query points")
    raw = _accel.kernel_matrix(q, xs, h, spec.kind)
    dens = raw.sum(axis=1) / (xs.shape[0] * h ** spec.d)
    return float(dens[0]) if single else dens


def kernel_moments(spec: KernelSpec, max_degree: int, nodes: int = 64) -> dict[tuple[int, ...], float]:
    """All mixed moments ``int prod_c u_c^a_c K(u) du`` with ``sum(a) <= max_degree``.

    Uses Gauss-Legendre on ``[-1, 1]`` per coordinate; the product form makes
    the d-dimensional integral a product of univariate ones.
    """
    t, wts = np.polynomial.legendre.leggauss(nodes)
    k = spec.univariate(t)
    uni = [float(np.sum(wts * t**p * k)) for p in range(max_degree + 1)]
    out = {}
    for a in itertools.product(range(max_degree + 1), repeat=spec.d):
        if sum(a) <= max_degree:
            out[a] = float(np.prod([uni[p] for p in a]))
    return out


def check_moment_conditions(spec: KernelSpec, tol: float = 1e-10) -> dict[tuple[int, ...], float]:
    """Return moment errors; raise if ``int K != 1`` or a moment below the order is nonzero."""
    moments = kernel_moments(spec, spec.order - 1)
    errors = {}
    for a, val in moments.items():
        target = 1.0 if sum(a) == 0 else 0.0
        errors[a] = abs(val - target)
        if errors[a] > tol:
            raise ValidationError(f"kernel moment {a} = {val!r}, expected {target}")
    return errors


def check_bandwidth_rates(exponent: float, d: int, order: int) -> dict[str, bool]:
    """Rate conditions for ``h_n ~ n^-exponent``.

    ``h -> 0`` needs ``exponent > 0``; the remainder condition
    ``sqrt(n) (log n / (n h^d))^(3/4) -> 0`` needs ``exponent * d < 1/3``; the
    bias condition ``sqrt(n) h^r -> 0`` needs ``exponent * r > 1/2``.
    """
    return {
        "vanishing": exponent > 0,
        "remainder": exponent * d < 1.0 / 3.0,
        "bias": exponent * order > 0.5,
        "feasible": 3 * d < 2 * order,
    }
