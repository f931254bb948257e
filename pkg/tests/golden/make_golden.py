"""Regenerate the golden corpus and its frozen oracle values.

    python tests/golden/make_golden.py

Writes ``<case>_sample.csv``, ``<case>_xstar.csv`` and ``expected.json``
next to this file. Expected values come from ``tests/oracles.py`` only.
"""

import json
import sys
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

import oracles  # noqa: E402


def _case_tiny_d1(rng):
    y = [2.0, 0.5, 3.1, 1.2, 2.6]
    delta = [1, 1, 0, 1, 1]
    x = [[0.3], [0.6], [0.2], [0.5], [0.4]]
    xstar = [[0.05 + 0.9 * r[0]] for r in x]
    return y, delta, x, xstar, 1.5, "quartic4", [1.0, 2.0, 2.3]


def _case_ties_d1(rng):
    y = [1.0, 1.0, 2.0, 2.0, 2.0, 3.0, 3.5, 3.5, 4.0, 4.5, 5.0, 6.0]
    delta = [1, 0, 1, 1, 0, 1, 0, 1, 1, 1, 0, 1]
    x = rng.uniform(size=(12, 1)).round(3).tolist()
    xstar = [[0.05 + 0.9 * r[0]] for r in x]
    return y, delta, x, xstar, 1.4, "quartic4", [1.0, 2.0, 3.5, 4.2]


def _dgp_like(rng, n, censor_scale):
    x = rng.beta(2, 2, size=(n, 2))
    t = 5 - 3 * x[:, 0] + 2 * x[:, 1] + rng.exponential(2.0, n) * np.hypot(x[:, 0], x[:, 1])
    c = rng.exponential(censor_scale, n) + 3.0
    y = np.minimum(t, c)
    delta = (t <= c).astype(int)
    return y, delta, x


def _case_uncensored_d2(rng):
    y, _, x = _dgp_like(rng, 15, 1.0)
    delta = np.ones(15, dtype=int)
    xstar = 0.05 + 0.9 * x
    grid = np.quantile(y, [0.2, 0.5, 0.8]).round(2).tolist()
    return y.round(4).tolist(), delta.tolist(), x.round(4).tolist(), xstar.round(4).tolist(), 1.3, "quartic4", grid


def _case_censored_d2(rng):
    y, delta, x = _dgp_like(rng, 20, 4.0)
    xstar = 0.05 + 0.9 * x
    y1 = y[delta == 1]
    grid = np.quantile(y1, [0.25, 0.5, 0.75]).round(2).tolist()
    return y.round(4).tolist(), delta.tolist(), x.round(4).tolist(), xstar.round(4).tolist(), 1.4, "quartic4", grid


def _case_ties_d2(rng):
    y, delta, x = _dgp_like(rng, 18, 4.0)
    y = np.round(y * 2) / 2  # half-unit rounding creates ties
    xstar = 0.05 + 0.9 * x
    y1 = y[delta == 1]
    grid = sorted(set(np.quantile(y1, [0.3, 0.6]).round(2).tolist()))
    return y.tolist(), delta.tolist(), x.round(4).tolist(), xstar.round(4).tolist(), 1.5, "quartic4", grid


def _case_epan_d1(rng):
    x = rng.uniform(size=(10, 1))
    t = 1.0 + 2.0 * x[:, 0] + rng.exponential(1.0, 10)
    c = rng.uniform(1.5, 6.0, 10)
    y = np.minimum(t, c).round(4)
    delta = (t <= c).astype(int)
    xstar = np.clip(x + 0.1, 0, 1)
    y1 = y[delta == 1]
    grid = np.quantile(y1, [0.3, 0.6]).round(2).tolist()
    return y.tolist(), delta.tolist(), x.round(4).tolist(), xstar.round(4).tolist(), 0.9, "epanechnikov", grid


def _case_independent_xstar_d2(rng):
    y, delta, x = _dgp_like(rng, 16, 4.0)
    xstar = 0.05 + 0.9 * rng.beta(2, 2, size=(16, 2))
    y1 = y[delta == 1]
    grid = np.quantile(y1, [0.25, 0.5, 0.75]).round(2).tolist()
    return y.round(4).tolist(), delta.tolist(), x.round(4).tolist(), xstar.round(4).tolist(), 1.4, "quartic4", grid


CASES = {
    "tiny_d1": _case_tiny_d1,
    "ties_d1": _case_ties_d1,
    "uncensored_d2": _case_uncensored_d2,
    "censored_d2": _case_censored_d2,
    "ties_d2": _case_ties_d2,
    "epan_d1": _case_epan_d1,
    "independent_xstar_d2": _case_independent_xstar_d2,
}


def expected_values(y, delta, x, xstar, h, kind, grid):
    km = [oracles.kaplan_meier(y, delta, t) for t in grid]
    cf = [oracles.counterfactual(y, delta, x, xstar, h, kind, t) for t in grid]
    cf_pl = [oracles.counterfactual(y, delta, x, xstar, h, kind, t, product_limit=True) for t in grid]
    ro = [oracles.rothe(y, x, xstar, h, kind, t) for t in grid]
    w0 = oracles.nw_weights(xstar[0], x, h, kind)
    beran0 = [oracles.beran(y, delta, w0, t) for t in grid]
    ecdf0 = [oracles.conditional_ecdf(y, delta, w0, t) for t in grid]
    ecdf0_unc = [oracles.conditional_ecdf(y, delta, w0, t, censored_only=True) for t in grid]
    xi = [[oracles.xi(y, delta, y[i], delta[i], t) for t in grid] for i in range(len(y))]
    w_own = [oracles.nw_weights(r, x, h, kind) for r in x]
    xi_star = [[oracles.xi_star(y, delta, w_own[i], y[i], delta[i], t) for t in grid] for i in range(len(y))]
    return {
        "km": km,
        "counterfactual": cf,
        "counterfactual_product_limit": cf_pl,
        "rothe": ro,
        "beran_first_row": beran0,
        "conditional_ecdf_first_row": ecdf0,
        "conditional_ecdf_uncensored_first_row": ecdf0_unc,
        "xi": xi,
        "xi_star": xi_star,
        "sigma11": oracles.sigma11(y, delta, x, xstar, h, kind, grid).tolist(),
        "sigma22": oracles.sigma22(y, delta, grid).tolist(),
        "sigma22_discrete": oracles.sigma22(y, delta, grid, discrete=True).tolist(),
        "sigma12": oracles.sigma12(y, delta, x, xstar, h, kind, grid).tolist(),
        "sigma12_no_covariate": oracles.sigma12(y, delta, x, xstar, h, kind, grid, covariate_term=False).tolist(),
    }


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) if not isinstance(v, int) else str(v) for v in r) + "\n")


def main():
    rng = np.random.default_rng(20240917)
    doc = {}
    for name, make in CASES.items():
        y, delta, x, xstar, h, kind, grid = make(rng)
        y = [float(v) for v in y]
        delta = [int(v) for v in delta]
        d = len(x[0])
        _write_csv(HERE / f"{name}_sample.csv", ["y", "delta"] + [f"x{k + 1}" for k in range(d)],
                   [[yy, dd] + list(xx) for yy, dd, xx in zip(y, delta, x)])
        _write_csv(HERE / f"{name}_xstar.csv", [f"x{k + 1}" for k in range(d)], xstar)
        doc[name] = {
            "h": h,
            "kernel": kind,
            "grid": grid,
            "expected": expected_values(y, delta, x, xstar, h, kind, grid),
        }
    (HERE / "expected.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
