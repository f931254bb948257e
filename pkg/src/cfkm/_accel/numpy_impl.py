"""Pure-numpy reference versions of the hot loops.

All functions take observations already sorted by duration (see
``validate_sample``). ``group_start[j]`` is the first sorted index whose
duration equals ``y[j]``, which is how ties enter the risk sets.
"""

import numpy as np

QUARTIC4 = 0
EPANECHNIKOV = 1


def profile(u, kind):
    au = np.abs(u)
    inside = au < 1.0
    if kind == QUARTIC4:
        u2 = u * u
        val = (15.0 / 32.0) * (3.0 - 10.0 * u2 + 7.0 * u2 * u2)
    else:
        val = 0.75 * (1.0 - u * u)
    return np.where(inside, val, 0.0)


def kernel_matrix(query, points, h, kind):
    """``K((query_i - points_l) / h)`` as an (m, n) array for a product kernel."""
    out = np.ones((query.shape[0], points.shape[0]))
    for c in range(query.shape[1]):
        u = (query[:, c][:, None] - points[:, c][None, :]) / h
        out *= profile(u, kind)
    return out


def _risk_sums(w, group_start):
    rev = np.cumsum(w[:, ::-1], axis=1)[:, ::-1]
    return rev[:, group_start]


def beran_at(w, delta, group_start, pos, product_limit, eps):
    """Conditional CDF values after the first ``pos[g]`` sorted records.

    Returns ``(values, degenerate)`` where ``values`` is (m, len(pos)) and
    ``degenerate[i]`` counts uncensored terms of row ``i`` skipped because the
    risk-set weight was below ``eps`` in absolute value.
    """
    risk = _risk_sums(w, group_start)
    event = delta.astype(bool)[None, :]
    bad = event & (np.abs(risk) < eps)
    safe = np.where(bad, 1.0, risk)
    a = np.where(event & ~bad, w / safe, 0.0)
    m = w.shape[0]
    if product_limit:
        cum = np.cumprod(1.0 - a, axis=1)
        surv = np.concatenate((np.ones((m, 1)), cum), axis=1)
        values = 1.0 - surv[:, pos]
    else:
        cum = np.cumsum(a, axis=1)
        total = np.concatenate((np.zeros((m, 1)), cum), axis=1)
        values = 1.0 - np.exp(-total[:, pos])
    return values, bad.sum(axis=1).astype(np.int64)


def beran_exponents(w, delta, group_start, eps):
    """Per-term exponents ``a_j`` (zero for censored or skipped terms)."""
    risk = _risk_sums(w, group_start)
    event = delta.astype(bool)[None, :]
    bad = event & (np.abs(risk) < eps)
    safe = np.where(bad, 1.0, risk)
    return np.where(event & ~bad, w / safe, 0.0)


def weighted_cumsum_at(w, mask, pos):
    """``sum_{l < pos[g]} w[i, l] * mask[l]`` for every row and position."""
    cum = np.cumsum(w * mask[None, :], axis=1)
    total = np.concatenate((np.zeros((w.shape[0], 1)), cum), axis=1)
    return total[:, pos]


def hazard_integral_at(w, delta, group_start, pos, guard):
    """Inner integral ``sum_{k < pos} delta_k w_k / (1 - F(y_k-))**2`` per row.

    ``F(y_k-)`` is the weighted ECDF just below ``y_k``. Also returns, per row,
    the smallest ``|1 - F(y_k-)|`` over terms that entered some requested
    integral, for guard reporting.
    """
    m, n = w.shape
    cum = np.concatenate((np.zeros((m, 1)), np.cumsum(w, axis=1)), axis=1)
    surv_minus = 1.0 - cum[:, group_start]
    event = delta.astype(bool)[None, :] & (w != 0.0)
    active = np.zeros(n, dtype=bool)
    if pos.size:
        active[: int(pos.max())] = True
    used = event & active[None, :]
    denom_abs = np.where(used, np.abs(surv_minus), np.inf)
    min_denom = denom_abs.min(axis=1) if n else np.full(m, np.inf)
    safe = np.where(used & (np.abs(surv_minus) >= guard), surv_minus, 1.0)
    terms = np.where(used, w / (safe * safe), 0.0)
    terms = np.where(delta.astype(bool)[None, :], terms, 0.0)
    tot = np.concatenate((np.zeros((m, 1)), np.cumsum(terms, axis=1)), axis=1)
    return tot[:, pos], min_denom
