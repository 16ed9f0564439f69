import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tsuq.errors import InvalidArgumentError, UndefinedMetricError
from tsuq.metrics import (
    DEFAULT_LEVELS,
    MetricBundle,
    ReliabilityCurve,
    bundle,
    ece,
    error_vs_confidence,
    mape,
    mse,
    nll_metric,
    r2,
    read_conf_error_csv,
    read_reliability_csv,
    reliability_curve,
    write_conf_error_csv,
    write_reliability_csv,
)


def calibrated_sample(n=10_000, seed=0):
    g = np.random.default_rng(seed)
    mu = g.standard_normal(n)
    sigma = g.uniform(0.5, 2.0, n)
    y = mu + sigma * g.standard_normal(n)
    return y, mu, sigma


# ---------------------------------------------------------- point metrics

def test_mape_values():
    assert mape([100, 200], [90, 220]) == pytest.approx(10.0)
    assert mape([3.0, 4.0], [3.0, 4.0]) == 0.0
    assert mape([0, 2], [5, 1]) == pytest.approx(50.0)
    with pytest.raises(UndefinedMetricError):
        mape([0.0, 1e-7], [1.0, 1.0])


def test_mse_values():
    assert mse([1, 2], [1, 2]) == 0.0
    assert mse([1, -1], [0, 0]) == 1.0
    with pytest.raises(InvalidArgumentError):
        mse([1, 2], [1])


def test_r2_values():
    y = np.array([1.0, 3.0, 2.0, 7.0])
    assert r2(y, y) == 1.0
    assert r2(y, np.full(4, y.mean())) == 0.0
    assert r2([0, 1], [1, 0]) == pytest.approx(-3.0)
    with pytest.raises(UndefinedMetricError):
        r2([2, 2, 2], [1, 2, 3])


# -------------------------------------------------------------------- nll

def test_nll_values():
    assert nll_metric([1.0, 2.0], [1.0, 2.0], [1.0, 1.0]) == 0.0
    assert nll_metric([0.0], [2.0], [2.0]) == pytest.approx(math.log(4) + 1, abs=1e-12)


def test_nll_penalises_overconfidence():
    g = np.random.default_rng(1)
    y = g.standard_normal(100)
    mu = np.zeros(100)
    assert nll_metric(y, mu, np.full(100, 0.05)) > nll_metric(y, mu, np.full(100, 0.1))


def test_nll_minimised_at_residual_variance():
    g = np.random.default_rng(2)
    y = g.normal(0, 1.7, 500)
    mu = np.zeros(500)
    grid = np.linspace(0.5, 4.0, 3501)
    best = grid[np.argmin([nll_metric(y, mu, np.full(500, s)) for s in grid])]
    assert abs(best - math.sqrt(np.mean(y**2))) <= grid[1] - grid[0]


def test_nll_floors_zero_sigma():
    value = nll_metric([1.0], [1.0], [0.0])
    assert value == pytest.approx(math.log(1e-12))


# ------------------------------------------------------------ calibration

def test_calibrated_oracle():
    y, mu, sigma = calibrated_sample()
    curve = reliability_curve(y, mu, sigma)
    assert np.all(np.abs(curve.coverage - curve.levels) <= 0.02)
    assert ece(curve) < 0.02


def test_overconfident_oracle():
    y, mu, sigma = calibrated_sample()
    assert ece(reliability_curve(y, mu, sigma / 2)) > 0.15


def test_reliability_extremes():
    y = np.array([1.0, -2.0, 0.5])
    mu = np.zeros(3)
    wide = reliability_curve(y, mu, np.full(3, 1e12))
    assert np.all(wide.coverage == 1.0)
    narrow = reliability_curve(y, mu, np.zeros(3))
    assert np.all(narrow.coverage == 0.0)
    assert ece(narrow) == pytest.approx(0.5)
    assert ece(wide) == pytest.approx(0.5)


def test_reliability_rejects_empty_and_bad_levels():
    with pytest.raises(InvalidArgumentError):
        reliability_curve([], [], [])
    with pytest.raises(InvalidArgumentError):
        reliability_curve([1.0], [0.0], [1.0], levels=[0.5, 0.2])


# ------------------------------------------------------ error vs confidence

def test_conf_error_perfect_ordering():
    g = np.random.default_rng(3)
    y = g.standard_normal(2000)
    mu = np.zeros(2000)
    curve = error_vs_confidence(y, mu, np.abs(y - mu), 20)
    assert np.all(np.diff(curve.mae) >= 0)
    assert curve.x[0] == 0.0 and curve.x[-1] == 1.0
    assert np.all(np.diff(curve.x) > 0)
    assert np.all(np.diff(curve.count) <= 0)
    assert curve.mae[0] == pytest.approx(np.mean(np.abs(y)), abs=1e-15)


def test_conf_error_constant_sigma():
    y = np.array([1.0, -1.0, 3.0])
    curve = error_vs_confidence(y, np.zeros(3), np.full(3, 0.7))
    assert list(curve.x) == [0.0]
    assert curve.mae[0] == pytest.approx(5.0 / 3.0)
    assert list(curve.count) == [3]


def test_conf_error_needs_two_steps():
    with pytest.raises(InvalidArgumentError):
        error_vs_confidence([1.0], [0.0], [1.0], steps=1)


# ---------------------------------------------------------------- bundle

def test_bundle_perfect_prediction():
    y = np.array([1.0, 2.0, 4.0])
    b = bundle(y, y, np.ones(3))
    assert (b.mape, b.mse, b.r2, b.nll) == (0.0, 0.0, 1.0, 0.0)
    assert b.ece == pytest.approx(0.5)


def test_bundle_matches_standalone_metrics():
    y, mu, sigma = calibrated_sample(500, seed=5)
    b = bundle(y, mu, sigma, target_scale=(10.0, 3.0))
    assert b.mape == mape(y * 3 + 10, mu * 3 + 10)
    assert b.mse == mse(y, mu)
    assert b.r2 == r2(y, mu)
    assert b.ece == ece(reliability_curve(y, mu, sigma))
    assert b.nll == nll_metric(y, mu, sigma)
    assert bundle(y, mu, sigma, (10.0, 3.0)) == b


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_metrics_permutation_invariant(seed):
    y, mu, sigma = calibrated_sample(60, seed)
    perm = np.random.default_rng(seed + 1).permutation(60)
    a = bundle(y, mu, sigma, (5.0, 2.0))
    b = bundle(y[perm], mu[perm], sigma[perm], (5.0, 2.0))
    for name in ("mape", "mse", "r2", "ece", "nll"):
        assert getattr(a, name) == pytest.approx(getattr(b, name), rel=1e-12, abs=1e-12)
    ca = error_vs_confidence(y, mu, sigma)
    cb = error_vs_confidence(y[perm], mu[perm], sigma[perm])
    assert np.allclose(ca.mae, cb.mae, rtol=1e-12)


def test_metric_bundle_dict_round_trip():
    b = MetricBundle(1.5, 0.2, 0.8, 0.1, -0.3)
    assert MetricBundle.from_dict(b.to_dict()) == b


def test_curve_files_round_trip(tmp_path):
    y, mu, sigma = calibrated_sample(300, seed=6)
    rel = reliability_curve(y, mu, sigma)
    write_reliability_csv(rel, tmp_path / "r.csv")
    back = read_reliability_csv(tmp_path / "r.csv")
    assert np.array_equal(back.coverage, rel.coverage) and np.array_equal(back.levels, rel.levels)
    ce = error_vs_confidence(y, mu, sigma)
    write_conf_error_csv(ce, tmp_path / "c.csv")
    back = read_conf_error_csv(tmp_path / "c.csv")
    assert np.array_equal(back.x, ce.x) and np.array_equal(back.mae, ce.mae)
    assert np.array_equal(back.count, ce.count)


def test_default_levels():
    assert np.allclose(DEFAULT_LEVELS, np.arange(1, 10) / 10)
