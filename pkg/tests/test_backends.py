import os
import subprocess
import sys

import numpy as np
import pytest

from cfkm import _accel
from cfkm.core import Grid
from cfkm.counterfactual import counterfactual_cdf, rothe_cdf
from cfkm.estimators import group_starts, positions
from cfkm.inference import build_context, effect_variances, sigma12_hat
from cfkm.kernels import KernelSpec, default_bandwidth, nw_weight_matrix
from cfkm.simulation import derive_seed, generate_draw

SPEC2 = KernelSpec(2)


def _both(fn):
    with _accel.use_backend("numba"):
        a = fn()
    with _accel.use_backend("numpy"):
        b = fn()
    return a, b


@pytest.fixture(scope="module")
def draw():
    return generate_draw(150, derive_seed(31, 150, 0))


def test_use_backend_restores():
    before = _accel.get_backend()
    with _accel.use_backend("numpy"):
        assert _accel.get_backend() == "numpy"
    assert _accel.get_backend() == before
    with pytest.raises(ValueError):
        _accel.set_backend("fortran")


@pytest.mark.parametrize("kind", ["quartic4", "epanechnikov"])
def test_kernel_matrix(draw, kind):
    x = draw.sample.x
    xs = np.asarray(draw.xstar.rows)
    a, b = _both(lambda: nw_weight_matrix(xs, x, 0.4, KernelSpec(2, kind)))
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)


@pytest.mark.parametrize("product_limit", [False, True])
def test_beran_kernels(draw, product_limit):
    from cfkm.core import validate_sample

    s = validate_sample(draw.sample)
    w = nw_weight_matrix(np.asarray(draw.xstar.rows), s.x, 0.5, SPEC2)
    gs = group_starts(s.y)
    pos = positions(s.y, np.linspace(4, 9, 23))
    (ca, da), (cb, db) = _both(lambda: _accel.beran_at(w, s.delta, gs, pos, product_limit, 1e-12))
    np.testing.assert_allclose(ca, cb, rtol=0, atol=1e-13)
    np.testing.assert_array_equal(da, db)
    ea, eb = _both(lambda: _accel.beran_exponents(w, s.delta, gs, 1e-12))
    np.testing.assert_allclose(ea, eb, rtol=0, atol=1e-13)
    ia, ib = _both(lambda: _accel.hazard_integral_at(w, s.delta, gs, pos, 1e-6))
    np.testing.assert_allclose(ia[0], ib[0], rtol=1e-12, atol=1e-13)


def test_estimators_and_inference(draw):
    h = default_bandwidth(150)
    grid = Grid.uniform(4.25, 8.15, 0.05)
    inf_grid = [5.0, 5.5, 6.0, 6.5]

    def run():
        cf = counterfactual_cdf(draw.sample, draw.xstar, h, SPEC2, grid).values
        ro = rothe_cdf(draw.sample, draw.xstar, h, SPEC2, grid).values
        ctx = build_context(draw.sample, draw.xstar, h, SPEC2, inf_grid)
        v = effect_variances(ctx)
        return np.concatenate([cf, ro, sigma12_hat(ctx).ravel()] + [v[k] for k in sorted(v)])

    a, b = _both(run)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_environment_variable_selects_backend():
    env = dict(os.environ, CFKM_BACKEND="numpy")
    r = subprocess.run(
        [sys.executable, "-c", "from cfkm import _accel; print(_accel.get_backend())"],
        env=env, capture_output=True, text=True,
    )
    assert r.returncode == 0 and r.stdout.strip() == "numpy"
