"""numba-compiled versions of :mod:`cfkm._accel.numpy_impl`.

Rows are processed independently under ``prange`` and every row reduction
runs in a fixed sequential order, so results do not depend on the thread
count.
"""

import os

import numba
import numpy as np
from numba import njit, prange

# the bundled TBB is often too old; workqueue is always available
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

QUARTIC4 = 0
EPANECHNIKOV = 1


@njit(cache=True, inline="always")
def _profile(u, kind):
    if abs(u) >= 1.0:
        return 0.0
    u2 = u * u
    if kind == QUARTIC4:
        return (15.0 / 32.0) * (3.0 - 10.0 * u2 + 7.0 * u2 * u2)
    return 0.75 * (1.0 - u2)


@njit(cache=True, parallel=True)
def kernel_matrix(query, points, h, kind):
    m, d = query.shape
    n = points.shape[0]
    out = np.empty((m, n))
    for i in prange(m):
        for l in range(n):
            v = 1.0
            for c in range(d):
                v *= _profile((query[i, c] - points[l, c]) / h, kind)
            out[i, l] = v
    return out


@njit(cache=True, parallel=True)
def beran_at(w, delta, group_start, pos, product_limit, eps):
    m, n = w.shape
    npos = pos.shape[0]
    values = np.empty((m, npos))
    degenerate = np.zeros(m, dtype=np.int64)
    for i in prange(m):
        rev = np.empty(n)
        acc = 0.0
        for j in range(n - 1, -1, -1):
            acc += w[i, j]
            rev[j] = acc
        # running[k] is the accumulated exponent / survival after k records
        running = np.empty(n + 1)
        if product_limit:
            running[0] = 1.0
        else:
            running[0] = 0.0
        cur = running[0]
        bad = 0
        for j in range(n):
            if delta[j] != 0:
                r = rev[group_start[j]]
                if abs(r) < eps:
                    bad += 1
                else:
                    a = w[i, j] / r
                    if product_limit:
                        cur = cur * (1.0 - a)
                    else:
                        cur = cur + a
            running[j + 1] = cur
        degenerate[i] = bad
        for g in range(npos):
            if product_limit:
                values[i, g] = 1.0 - running[pos[g]]
            else:
                values[i, g] = 1.0 - np.exp(-running[pos[g]])
    return values, degenerate


@njit(cache=True, parallel=True)
def beran_exponents(w, delta, group_start, eps):
    m, n = w.shape
    out = np.zeros((m, n))
    for i in prange(m):
        rev = np.empty(n)
        acc = 0.0
        for j in range(n - 1, -1, -1):
            acc += w[i, j]
            rev[j] = acc
        for j in range(n):
            if delta[j] != 0:
                r = rev[group_start[j]]
                if abs(r) >= eps:
                    out[i, j] = w[i, j] / r
    return out


@njit(cache=True, parallel=True)
def weighted_cumsum_at(w, mask, pos):
    m, n = w.shape
    npos = pos.shape[0]
    out = np.empty((m, npos))
    for i in prange(m):
        running = np.empty(n + 1)
        running[0] = 0.0
        acc = 0.0
        for j in range(n):
            acc += w[i, j] * mask[j]
            running[j + 1] = acc
        for g in range(npos):
            out[i, g] = running[pos[g]]
    return out


@njit(cache=True, parallel=True)
def hazard_integral_at(w, delta, group_start, pos, guard):
    m, n = w.shape
    npos = pos.shape[0]
    limit = 0
    for g in range(npos):
        if pos[g] > limit:
            limit = pos[g]
    out = np.empty((m, npos))
    min_denom = np.full(m, np.inf)
    for i in prange(m):
        cum = np.empty(n + 1)
        cum[0] = 0.0
        acc = 0.0
        for j in range(n):
            acc += w[i, j]
            cum[j + 1] = acc
        running = np.empty(n + 1)
        running[0] = 0.0
        tot = 0.0
        md = np.inf
        for j in range(n):
            if delta[j] != 0 and w[i, j] != 0.0 and j < limit:
                s = 1.0 - cum[group_start[j]]
                if abs(s) < md:
                    md = abs(s)
                if abs(s) >= guard:
                    tot += w[i, j] / (s * s)
                else:
                    tot += w[i, j]
            running[j + 1] = tot
        min_denom[i] = md
        for g in range(npos):
            out[i, g] = running[pos[g]]
    return out, min_denom
