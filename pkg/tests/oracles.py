"""Slow, loop-by-loop reference implementations used as test oracles.

Nothing here imports from ``cfkm``: every quantity is written directly from
its defining formula with explicit Python loops, so agreement with the
package is evidence that the vectorized / compiled code is right.

Conventions shared with the package (and stated in the ledger):
left limits ``F(u-)`` in every ``1 / (1 - F)`` denominator, risk sets
``{l : Y_l >= Y_j}``, terms with risk mass below 1e-12 skipped.
"""

import math

import numpy as np

RISK_EPS = 1e-12


def profile(u, kind):
    if abs(u) >= 1.0:
        return 0.0
    if kind == "quartic4":
        return 15.0 / 32.0 * (3.0 - 10.0 * u * u + 7.0 * u**4)
    return 0.75 * (1.0 - u * u)


def kernel(v, kind):
    out = 1.0
    for c in v:
        out *= profile(c, kind)
    return out


def raw_kernel_row(x, xs, h, kind):
    return [kernel([(x[c] - xl[c]) / h for c in range(len(x))], kind) for xl in xs]


def nw_weights(x, xs, h, kind):
    raw = raw_kernel_row(x, xs, h, kind)
    tot = sum(raw)
    if abs(tot) < 1e-12:
        raise ZeroDivisionError("empty neighborhood")
    return [r / tot for r in raw]


def density(x, xs, h, kind):
    d = len(x)
    return sum(raw_kernel_row(x, xs, h, kind)) / (len(xs) * h**d)


def kaplan_meier(y, delta, t):
    """``1 - prod_{u <= t} (1 - d_u / r_u)`` over distinct uncensored times."""
    surv = 1.0
    for u in sorted(set(yy for yy, dd in zip(y, delta) if dd == 1)):
        if u > t:
            break
        d_u = sum(1 for yy, dd in zip(y, delta) if yy == u and dd == 1)
        r_u = sum(1 for yy in y if yy >= u)
        surv *= 1.0 - d_u / r_u
    return 1.0 - surv


def beran(y, delta, w, t, product_limit=False):
    """Conditional CDF with weights ``w`` (one per record)."""
    n = len(y)
    total = 0.0
    surv = 1.0
    for j in range(n):
        if delta[j] != 1 or y[j] > t:
            continue
        risk = sum(w[l] for l in range(n) if y[l] >= y[j])
        if abs(risk) < RISK_EPS:
            continue
        a = w[j] / risk
        total += a
        surv *= 1.0 - a
    return 1.0 - surv if product_limit else 1.0 - math.exp(-total)


def counterfactual(y, delta, xs, xstar, h, kind, t, product_limit=False):
    vals = [beran(y, delta, nw_weights(r, xs, h, kind), t, product_limit) for r in xstar]
    return sum(vals) / len(vals)


def rothe(y, xs, xstar, h, kind, t):
    acc = 0.0
    for r in xstar:
        w = nw_weights(r, xs, h, kind)
        acc += sum(w[j] for j in range(len(y)) if y[j] <= t)
    return acc / len(xstar)


def conditional_ecdf(y, delta, w, t, censored_only=False):
    return sum(w[j] for j in range(len(y)) if y[j] <= t and (not censored_only or delta[j] == 1))


# --- influence functions and covariances -------------------------------------


def _ecdf_minus(y, v):
    return sum(1 for yy in y if yy < v) / len(y)


def _w_minus(y, w, v):
    return sum(w[l] for l in range(len(y)) if y[l] < v)


def xi(y, delta, yi, di, t):
    """Kaplan-Meier influence value of ``(yi, di)`` at ``t``."""
    n = len(y)
    first = 1.0 / (1.0 - _ecdf_minus(y, yi)) if (yi <= t and di == 1) else 0.0
    integral = 0.0
    for k in range(n):
        if delta[k] == 1 and y[k] <= min(yi, t):
            integral += (1.0 / n) / (1.0 - _ecdf_minus(y, y[k])) ** 2
    return (1.0 - kaplan_meier(y, delta, t)) * (first - integral)


def xi_star(y, delta, w, yi, di, t, product_limit=False):
    """Conditional influence value with weights ``w`` at the conditioning point."""
    n = len(y)
    first = 1.0 / (1.0 - _w_minus(y, w, yi)) if (yi <= t and di == 1) else 0.0
    integral = 0.0
    for k in range(n):
        if delta[k] == 1 and y[k] <= min(yi, t):
            integral += w[k] / (1.0 - _w_minus(y, w, y[k])) ** 2
    return (1.0 - beran(y, delta, w, t, product_limit)) * (first - integral)


def _cond_integral(y, delta, w, u):
    total = 0.0
    for k in range(len(y)):
        if delta[k] == 1 and y[k] <= u:
            total += w[k] / (1.0 - _w_minus(y, w, y[k])) ** 2
    return total


def sigma11(y, delta, xs, xstar, h, kind, grid):
    """Plug-in Sigma11 by explicit loops over grid pairs, units and jump points."""
    n = len(y)
    G = len(grid)
    w_star = [nw_weights(r, xs, h, kind) for r in xstar]
    w_own = [nw_weights(r, xs, h, kind) for r in xs]
    ratio = [density(xs[i], xstar, h, kind) / density(xs[i], xs, h, kind) for i in range(n)]
    f_star = [sum(beran(y, delta, w_star[i], u) for i in range(n)) / n for u in grid]
    out = np.zeros((G, G))
    for a in range(G):
        for b in range(G):
            u, v = grid[a], grid[b]
            first = 0.0
            second = 0.0
            for i in range(n):
                first += (beran(y, delta, w_star[i], u) - f_star[a]) * (beran(y, delta, w_star[i], v) - f_star[b])
                second += (
                    ratio[i] ** 2
                    * (1.0 - beran(y, delta, w_own[i], u))
                    * (1.0 - beran(y, delta, w_own[i], v))
                    * _cond_integral(y, delta, w_own[i], min(u, v))
                )
            out[a, b] = first / n + second / n
    return out


def sigma22(y, delta, grid, discrete=False):
    n = len(y)
    G = len(grid)
    out = np.zeros((G, G))
    for a in range(G):
        for b in range(G):
            m = min(grid[a], grid[b])
            integral = 0.0
            for k in range(n):
                if delta[k] == 1 and y[k] <= m:
                    sm = 1.0 - _ecdf_minus(y, y[k])
                    term = (1.0 / n) / sm**2
                    if discrete:
                        s_at = 1.0 - sum(1 for yy in y if yy <= y[k]) / n
                        term *= s_at / sm
                    integral += term
            out[a, b] = (1.0 - kaplan_meier(y, delta, grid[a])) * (1.0 - kaplan_meier(y, delta, grid[b])) * integral
    return out


def sigma12(y, delta, xs, xstar, h, kind, grid, covariate_term=True):
    n = len(y)
    G = len(grid)
    w_star = [nw_weights(r, xs, h, kind) for r in xstar]
    w_own = [nw_weights(r, xs, h, kind) for r in xs]
    ratio = [density(xs[i], xstar, h, kind) / density(xs[i], xs, h, kind) for i in range(n)]
    f_star = [sum(beran(y, delta, w_star[i], u) for i in range(n)) / n for u in grid]
    out = np.zeros((G, G))
    for a in range(G):
        for b in range(G):
            acc = 0.0
            for i in range(n):
                left = xi_star(y, delta, w_own[i], y[i], delta[i], grid[a]) * ratio[i]
                if covariate_term:
                    left += beran(y, delta, w_star[i], grid[a]) - f_star[a]
                acc += left * xi(y, delta, y[i], delta[i], grid[b])
            out[a, b] = acc / n
    return out
