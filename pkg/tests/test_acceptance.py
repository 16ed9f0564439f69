"""The ten acceptance criteria, one test each. A summary line per criterion
is printed at the end of the pytest run."""
import math
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

import gradients
from published_tables import AIR_PRESSURE, AIR_PRESSURE_RANKS, PM25, PM25_RANKS, bundles
from test_uq import oracle_moments, scalar_bbb_model
from tsuq.harness import ExperimentConfig, classify_conf_error, classify_horizon, horizon_sweep, rank_models, run_experiment
from tsuq.metrics import ConfidenceErrorCurve, ece, error_vs_confidence, nll_metric, reliability_curve
from tsuq.ndcore import RngStream
from tsuq.neural import ModelConfig, TrainConfig, build_model, gaussian_nll_loss
from tsuq.neural.layers import (
    bbb_dense_forward,
    dense_forward,
    dropconnect_forward,
    dropout_forward,
    flipout_dense_forward,
)
from tsuq.uq import ensemble_predict, mc_predict

criterion = pytest.mark.criterion


@criterion(1, "analytic gradients match finite differences (rel. err < 1e-4, < 60 s)")
def test_criterion_01_gradients():
    start = time.perf_counter()
    errors = {kind: gradients.layer_gradient_error(kind, 50) for kind in gradients.LAYER_FACTORIES}
    errors["lstm12"] = gradients.lstm_gradient_error(50, steps=12)
    errors["mse"] = gradients.mse_gradient_error(50)
    errors["nll"] = gradients.nll_gradient_error(50)
    errors["kl"] = gradients.kl_gradient_error(50)
    elapsed = time.perf_counter() - start
    print({k: f"{v:.2e}" for k, v in errors.items()}, f"{elapsed:.1f}s")
    assert max(errors.values()) < 1e-4, errors
    assert elapsed < 60


@criterion(2, "closed-form Gaussian NLL values (1e-9)")
def test_criterion_02_nll_closed_form():
    one = math.log(4.0) + 1.0
    assert abs(one - 2.3863) < 5e-5
    for value, expected in (
        (nll_metric([1.0], [1.0], [1.0]), 0.0),
        (nll_metric([0.0], [2.0], [2.0]), one),
        (nll_metric([0.0, 0.0], [0.0, 2.0], [1.0, 2.0]), one / 2),
        (gaussian_nll_loss([[2.0]], [[math.log(4.0)]], [[0.0]]), one),
        (gaussian_nll_loss([0.0, 2.0], [0.0, math.log(4.0)], [0.0, 0.0]), one / 2),
    ):
        assert abs(value - expected) < 1e-9
    assert abs(one / 2 - 1.1931) < 5e-5


@criterion(3, "stochastic layers reduce to deterministic ones (1e-12)")
def test_criterion_03_deterministic_reduction():
    g = np.random.default_rng(0)
    x = g.standard_normal((16, 5))
    dense = {"W": g.standard_normal((5, 3)), "b": g.standard_normal(3)}
    with np.errstate(divide="ignore"):
        variational = {"W_mu": dense["W"], "W_rho": np.full((5, 3), -np.inf),
                       "b_mu": dense["b"], "b_rho": np.full(3, -np.inf)}
    noisy = {"W_mu": dense["W"], "W_rho": np.full((5, 3), 0.3), "b_mu": dense["b"], "b_rho": np.full(3, 0.3)}
    for act in ("identity", "relu"):
        ref = dense_forward(x, dense, act)
        outs = [
            dropout_forward(x, dense, 0.0, RngStream(1), activation=act),
            dropout_forward(x, dense, 0.5, RngStream(1), stochastic=False, activation=act),
            dropconnect_forward(x, dense, 0.0, RngStream(1), activation=act),
            dropconnect_forward(x, dense, 0.5, RngStream(1), stochastic=False, activation=act),
            bbb_dense_forward(x, variational, RngStream(1), activation=act),
            bbb_dense_forward(x, noisy, RngStream(1), stochastic=False, activation=act),
            flipout_dense_forward(x, variational, RngStream(1), activation=act),
            flipout_dense_forward(x, noisy, RngStream(1), stochastic=False, activation=act),
        ]
        for out in outs:
            assert np.max(np.abs(out - ref)) <= 1e-12


@criterion(4, "Monte Carlo consistency: BBB toy std and aggregation oracle")
def test_criterion_04_monte_carlo():
    M = 10_000
    std = mc_predict(scalar_bbb_model(0.5), np.ones((1, 1, 1)), M, RngStream(11)).std[0, 0]
    assert abs(std - 0.5) <= 3 * 0.5 / math.sqrt(2 * (M - 1))

    X = np.random.default_rng(1).standard_normal((6, 12, 1))
    for method in ("dropout", "dropconnect", "bbb", "flipout"):
        model = build_model(ModelConfig("mlp", method, hidden_units=8), RngStream(2))
        dist = mc_predict(model, X, 200, RngStream(3), keep_samples=True)
        mean, sd = oracle_moments(dist.samples)
        assert np.max(np.abs(dist.mean - mean)) < 1e-12
        assert np.max(np.abs(dist.std - sd)) < 1e-12
    members = [build_model(ModelConfig("mlp", "ensemble"), RngStream(4).split(k)) for k in range(10)]
    dist = ensemble_predict(members, X, keep_samples=True)
    mean, sd = oracle_moments(np.stack([m.forward(X) for m in members]))
    assert np.max(np.abs(dist.mean - mean)) < 1e-12
    assert np.max(np.abs(dist.std - sd)) < 1e-12


@criterion(5, "calibration oracle: ECE < 0.02 calibrated, > 0.15 overconfident")
def test_criterion_05_calibration():
    g = np.random.default_rng(5)
    mu = g.standard_normal(10_000)
    sigma = g.uniform(0.5, 2.0, 10_000)
    y = mu + sigma * g.standard_normal(10_000)
    curve = reliability_curve(y, mu, sigma)
    assert ece(curve) < 0.02
    assert np.all(np.abs(curve.coverage - curve.levels) <= 0.02)
    assert ece(reliability_curve(y, mu, sigma / 2)) > 0.15


@criterion(6, "published rank columns reproduced (NLL, CE, MAPE; < 1 s)")
def test_criterion_06_ranking():
    start = time.perf_counter()
    pm = rank_models(bundles(PM25))
    air = rank_models(bundles(AIR_PRESSURE))
    elapsed = time.perf_counter() - start
    assert list(pm.ranks["nll"]) == PM25_RANKS["nll"]
    assert list(pm.ranks["ece"]) == PM25_RANKS["ece"]
    assert list(air.ranks["mape"]) == AIR_PRESSURE_RANKS["mape"]
    assert elapsed < 1.0


@criterion(7, "sine MLP Baseline: R2 > 0.8 in < 2 min, byte-identical reruns")
def test_criterion_07_end_to_end(tmp_path):
    def config(name):
        return ExperimentConfig(dataset="sine", synth_n=2000, synth_noise=0.1, out_dir=str(tmp_path / name),
                                model=ModelConfig("mlp", "baseline"), train=TrainConfig(epochs=100, seed=0))

    start = time.perf_counter()
    report = run_experiment(config("a"))
    elapsed = time.perf_counter() - start
    run_experiment(config("b"))
    print(f"R2={report.bundle.r2:.4f} {elapsed:.1f}s")
    assert report.bundle.r2 > 0.8
    assert elapsed < 120
    a_dir, b_dir = tmp_path / "a" / "sine" / "mlp_baseline", tmp_path / "b" / "sine" / "mlp_baseline"
    names = sorted(p.name for p in a_dir.iterdir() if p.is_file())
    assert "metrics.json" in names
    for name in names:
        assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes(), name


@criterion(8, "AR(1) sweep: error grows with horizon")
def test_criterion_08_horizon():
    cfg = ExperimentConfig(dataset="ar1", synth_n=2000, synth_noise=0.5,
                           model=ModelConfig("mlp", "baseline"), train=TrainConfig(epochs=100, seed=0))
    steps = horizon_sweep(cfg, 12)
    assert len(steps) == 12
    idx = np.arange(1, 13)
    rho_mse = spearmanr(idx, [b.mse for b in steps]).statistic
    rho_r2 = spearmanr(idx, [b.r2 for b in steps]).statistic
    print(f"rho(MSE)={rho_mse:.3f} rho(R2)={rho_r2:.3f}")
    assert rho_mse > 0
    assert rho_r2 < 0


@criterion(9, "error-vs-confidence construction and degenerate case")
def test_criterion_09_conf_error():
    g = np.random.default_rng(9)
    y = g.standard_normal(5000)
    mu = 0.3 * g.standard_normal(5000)
    curve = error_vs_confidence(y, mu, np.abs(y - mu), 20)
    assert np.all(np.diff(curve.mae) >= 0)
    assert classify_conf_error(curve) == "Good"
    flat = error_vs_confidence(y, mu, np.full(5000, 0.4), 20)
    assert list(flat.x) == [0.0] and list(flat.count) == [5000]
    assert flat.mae[0] == pytest.approx(np.mean(np.abs(y - mu)), abs=1e-15)


STEPS = np.arange(1, 13, dtype=float)
WILD = np.where(STEPS % 2 == 0, 10.0, 0.1)


def _steps(mape, mse, r2, ce, nll):
    return {"mape": mape, "mse": mse, "r2": r2, "ece": ce, "nll": nll}


def _curve(values):
    values = np.asarray(values, dtype=float)
    return ConfidenceErrorCurve(np.linspace(0, 1, len(values)), values, np.arange(len(values), 0, -1))


HORIZON_EXAMPLES = [
    (_steps(10 + STEPS, 0.1 * STEPS, 1 - 0.05 * STEPS, np.full(12, 0.2), np.full(12, 1.3)), "Good"),
    (_steps(30 - STEPS, 0.1 * STEPS, 1 - 0.05 * STEPS, WILD, 3 * WILD), "Moderate"),
    (_steps(*[np.full(12, 0.4)] * 4, 50 * WILD), "Bad"),
    (_steps(10 + STEPS, 0.1 * STEPS, 1 - 0.05 * STEPS, WILD, WILD), "Good"),
]
CONF_EXAMPLES = [
    (_curve(np.arange(20.0)), "Good"),
    (_curve(list(range(11)) + [5]), "Moderate"),
    (_curve([0, 2, 1, 3, 2, 4, 3, 5, 4]), "Bad"),
    (_curve([0, 1, 2, 1.9, 3, 4, 5, 4.9, 6, 7, 8]), "Moderate"),
    (_curve(np.full(6, 0.3)), "Good"),
]


@criterion(10, "qualitative classifiers on the nine constructed examples")
def test_criterion_10_classifiers():
    got = [classify_horizon(s) for s, _ in HORIZON_EXAMPLES] + [classify_conf_error(c) for c, _ in CONF_EXAMPLES]
    want = [label for _, label in HORIZON_EXAMPLES + CONF_EXAMPLES]
    assert len(want) == 9
    assert got == want
