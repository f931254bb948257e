"""Backend dispatch for the hot numeric loops.

The compiled numba path is used by default. Set ``CFKM_BACKEND=numpy`` in
the environment (or call :func:`set_backend`) to run the pure-numpy
fallback, e.g. on platforms without numba or to cross-check results.
"""

from __future__ import annotations

import contextlib
import os

import numpy as np

from . import numpy_impl

QUARTIC4 = numpy_impl.QUARTIC4
EPANECHNIKOV = numpy_impl.EPANECHNIKOV

try:
    from . import numba_impl
except ImportError:  # pragma: no cover - exercised only without numba
    numba_impl = None

_VALID = ("numba", "numpy")


def _initial_backend() -> str:
    name = os.environ.get("CFKM_BACKEND", "numba").strip().lower()
    if name not in _VALID:
        raise ValueError(f"CFKM_BACKEND must be one of {_VALID}, got {name!r}")
    if name == "numba" and numba_impl is None:
        return "numpy"
    return name


_backend = _initial_backend()


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {name!r}")
    if name == "numba" and numba_impl is None:
        raise RuntimeError("numba is not importable")
    _backend = name


@contextlib.contextmanager
def use_backend(name: str):
    previous = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def _impl():
    return numba_impl if _backend == "numba" else numpy_impl


def _f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def kernel_matrix(query, points, h: float, kind: int) -> np.ndarray:
    return _impl().kernel_matrix(_f64(query), _f64(points), float(h), int(kind))


def beran_at(w, delta, group_start, pos, product_limit: bool, eps: float):
    return _impl().beran_at(
        _f64(w), _i64(delta), _i64(group_start), _i64(pos), bool(product_limit), float(eps)
    )


def beran_exponents(w, delta, group_start, eps: float) -> np.ndarray:
    return _impl().beran_exponents(_f64(w), _i64(delta), _i64(group_start), float(eps))


def weighted_cumsum_at(w, mask, pos) -> np.ndarray:
    return _impl().weighted_cumsum_at(_f64(w), _f64(mask), _i64(pos))


def hazard_integral_at(w, delta, group_start, pos, guard: float):
    return _impl().hazard_integral_at(
        _f64(w), _i64(delta), _i64(group_start), _i64(pos), float(guard)
    )
