import math

import numpy as np
import pytest

from cfkm.core import Grid
from cfkm.errors import ConfigError, EstimationFailure, GridError, QuadratureError
from cfkm.simulation import (
    PAPER_GRID,
    StudyConfig,
    conditional_truth,
    derive_seed,
    generate_draw,
    integrated_error,
    miae,
    policy_map,
    rmise,
    run_study,
    truth_curves,
)


def test_paper_grid():
    assert len(PAPER_GRID) == 79
    assert PAPER_GRID.points[0] == 4.25
    assert PAPER_GRID.points[-1] == pytest.approx(8.15)


def test_generate_draw_deterministic():
    a = generate_draw(300, 12345)
    b = generate_draw(300, 12345)
    c = generate_draw(300, 12346)
    np.testing.assert_array_equal(a.sample.y, b.sample.y)
    np.testing.assert_array_equal(a.sample.x, b.sample.x)
    np.testing.assert_array_equal(a.c, b.c)
    assert not np.array_equal(a.sample.y, c.sample.y)


def test_seed_derivation():
    s = {derive_seed(20240601, n, r) for n in (100, 200) for r in range(500)}
    assert len(s) == 1000
    assert all(0 <= v < 2**64 for v in s)
    assert derive_seed(1, 100, 0) == derive_seed(1, 100, 0)
    assert derive_seed(1, 100, 0) != derive_seed(2, 100, 0)


def test_draw_structure():
    d = generate_draw(5000, derive_seed(9, 5000, 0))
    y, delta, x = d.sample.y, d.sample.delta, d.sample.x
    np.testing.assert_array_equal(y, np.minimum(d.t, d.c))
    np.testing.assert_array_equal(delta, (d.t <= d.c).astype(int))
    np.testing.assert_array_equal(d.y_star, np.minimum(d.t_star, d.c))
    xs = np.asarray(d.xstar.rows)
    np.testing.assert_array_equal(xs, policy_map(x))
    assert xs.min() >= 0.05 and xs.max() <= 0.95
    assert np.all((x > 0) & (x < 1))
    assert np.all(d.eps >= 0)
    # T is at least its location 5 - 3 x1 + 2 x2
    assert np.all(d.t >= 5 - 3 * x[:, 0] + 2 * x[:, 1] - 1e-12)


def test_beta_and_censoring_moments():
    d = generate_draw(400_000, derive_seed(21, 400_000, 0))
    x = d.sample.x
    np.testing.assert_allclose(x.mean(axis=0), 0.5, atol=0.002)
    np.testing.assert_allclose(x.var(axis=0), 0.05, atol=0.001)
    assert d.eps.mean() == pytest.approx(2.0, abs=0.02)
    logc = np.log(d.c)
    assert logc.mean() == pytest.approx(2.5, abs=0.01)
    assert logc.std() == pytest.approx(1.0, abs=0.01)


def test_conditional_truth():
    # x = (0.5, 0.5): location 4.5, scale sqrt(0.5)
    s = math.sqrt(0.5)
    assert conditional_truth(4.0, 0.5, 0.5) == 0.0
    assert conditional_truth(6.0, 0.5, 0.5) == pytest.approx(1 - math.exp(-1.5 / (2 * s)))


def test_truth_against_monte_carlo():
    grid = Grid.uniform(4.25, 8.15, 0.65)
    truth = truth_curves(grid)
    counts = np.zeros(len(grid))
    counts_star = np.zeros(len(grid))
    chunk, total = 1_000_000, 10_000_000
    for k in range(total // chunk):
        d = generate_draw(chunk, derive_seed(77, chunk, k))
        counts += np.searchsorted(np.sort(d.t), grid.points, side="right")
        counts_star += np.searchsorted(np.sort(d.t_star), grid.points, side="right")
    np.testing.assert_allclose(counts / total, truth.f_t, atol=1e-3)
    np.testing.assert_allclose(counts_star / total, truth.f_t_star, atol=1e-3)


def test_truth_properties():
    truth = truth_curves()
    assert np.all(np.diff(truth.f_t) > 0)
    assert np.all(np.diff(truth.f_t_star) > 0)
    np.testing.assert_allclose(truth.lambda_t, -np.log1p(-truth.f_t))
    # the policy compresses covariates toward the centre, so the curves differ
    assert np.max(np.abs(truth.f_t_star - truth.f_t)) > 0.01
    with pytest.raises(QuadratureError):
        truth_curves(Grid([6.0]), nodes=2, tol=1e-14)


def test_offset_errors():
    truth = np.linspace(0.1, 0.9, 79)
    est = truth + 0.1
    assert miae(est[None, :], truth, PAPER_GRID) == pytest.approx(0.395, abs=1e-12)
    assert rmise(est[None, :], truth, PAPER_GRID) == pytest.approx(0.19875, abs=1e-5)
    per_row = integrated_error(np.vstack((est, truth)), truth, PAPER_GRID)
    np.testing.assert_allclose(per_row, [0.395, 0.0], atol=1e-12)


def test_integrated_error_grid_checks():
    with pytest.raises(GridError):
        integrated_error([0.1, 0.2], [0.1, 0.2, 0.3], Grid([1.0, 2.0, 3.0]))
    with pytest.raises(GridError):
        integrated_error([0.1, 0.2, 0.3], [0.0, 0.0, 0.0], Grid([1.0, 2.0, 4.0]))


def test_config_validation():
    with pytest.raises(ConfigError):
        StudyConfig(sizes=())
    with pytest.raises(ConfigError):
        StudyConfig(reps=0)
    with pytest.raises(ConfigError):
        StudyConfig(estimators=("km", "magic"))
    with pytest.raises(ConfigError):
        StudyConfig(hazard_method="cox")
    with pytest.raises(ConfigError):
        generate_draw(0, 1)


def test_small_study_runs_and_repeats():
    cfg = StudyConfig(sizes=(60, 120), reps=4, base_seed=5, strict=False)
    a = run_study(cfg)
    b = run_study(cfg)
    assert set(a.rows) == {(n, e, t) for n in (60, 120) for e in cfg.estimators for t in ("cdf", "hazard")}
    for key, row in a.rows.items():
        assert row == b.rows[key]
        assert row["reps"] + row["failed"] == 4
    table = a.table("cdf", "miae")
    assert [r[0] for r in table] == [60, 120]
    assert len(table[0]) == 1 + len(cfg.estimators)
    assert a.seeds[60] == [derive_seed(5, 60, r) for r in range(4)]
    # KM is a consistent estimator of the wrong target
    assert a.cell(120, "km", "cdf", "miae") > 0.1


def test_strict_study_raises_on_failure():
    # a tiny bandwidth leaves counterfactual rows without neighbours
    from cfkm.kernels import BandwidthRule

    cfg = StudyConfig(sizes=(30,), reps=1, base_seed=1, bandwidth=BandwidthRule(0.01, 1 / 7))
    with pytest.raises(EstimationFailure):
        run_study(cfg)
