"""Point, probabilistic and calibration metrics for regression forecasts."""
import csv
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import norm

from .errors import InvalidArgumentError, UndefinedMetricError

SIGMA_FLOOR = 1e-6
MAPE_MIN_TARGET = 1e-6
DEFAULT_LEVELS = tuple(np.round(np.arange(1, 10) / 10.0, 1))
METRIC_NAMES = ("mape", "mse", "r2", "ece", "nll")


@dataclass
class MetricBundle:
    mape: float
    mse: float
    r2: float
    ece: float
    nll: float

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: float(d[k]) for k in METRIC_NAMES})


@dataclass
class ReliabilityCurve:
    levels: np.ndarray
    coverage: np.ndarray
    count: int


@dataclass
class ConfidenceErrorCurve:
    x: np.ndarray
    mae: np.ndarray
    count: np.ndarray


def _pair(y, mu):
    y = np.asarray(y, dtype=np.float64).ravel()
    mu = np.asarray(mu, dtype=np.float64).ravel()
    if y.shape != mu.shape:
        raise InvalidArgumentError(f"shape mismatch: {y.shape} vs {mu.shape}")
    return y, mu


def _floored_sigma(sigma, n):
    sigma = np.asarray(sigma, dtype=np.float64).ravel()
    if sigma.shape != (n,):
        raise InvalidArgumentError(f"sigma has {sigma.size} entries, expected {n}")
    sigma = np.maximum(sigma, SIGMA_FLOOR)
    if not np.all(sigma > 0):
        raise InvalidArgumentError("sigma must be positive")
    return sigma


def mape(y, mu):
    """Mean absolute percentage error (in %), skipping targets with
    ``|y| < 1e-6``."""
    y, mu = _pair(y, mu)
    keep = np.abs(y) >= MAPE_MIN_TARGET
    if not keep.any():
        raise UndefinedMetricError("MAPE undefined: every target is (near) zero")
    return float(100.0 * np.mean(np.abs((y[keep] - mu[keep]) / y[keep])))


def mse(y, mu):
    y, mu = _pair(y, mu)
    return float(np.mean((y - mu) ** 2))


def r2(y, mu):
    y, mu = _pair(y, mu)
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0:
        raise UndefinedMetricError("R^2 undefined for constant targets")
    return float(1.0 - np.sum((y - mu) ** 2) / ss_tot)


def nll_metric(y, mu, sigma):
    """Gaussian NLL without constants: mean of log(s^2) + r^2 / s^2."""
    y, mu = _pair(y, mu)
    s2 = _floored_sigma(sigma, y.size) ** 2
    return float(np.mean(np.log(s2) + (mu - y) ** 2 / s2))


def reliability_curve(y, mu, sigma, levels=DEFAULT_LEVELS):
    """Observed coverage of central Gaussian intervals at each nominal level."""
    y, mu = _pair(y, mu)
    if y.size == 0:
        raise InvalidArgumentError("reliability curve of empty input")
    levels = np.asarray(levels, dtype=np.float64)
    if levels.ndim != 1 or levels.size == 0 or np.any(np.diff(levels) <= 0) \
            or levels[0] <= 0 or levels[-1] >= 1:
        raise InvalidArgumentError("levels must be strictly increasing inside (0, 1)")
    sigma = _floored_sigma(sigma, y.size)
    z = norm.ppf(0.5 * (1.0 + levels))
    ratio = np.abs(y - mu) / sigma
    coverage = (ratio[None, :] <= z[:, None]).mean(axis=1)
    return ReliabilityCurve(levels, coverage, int(y.size))


def ece(curve):
    """Mean absolute gap between observed coverage and nominal level."""
    if len(curve.levels) == 0:
        raise InvalidArgumentError("empty reliability curve")
    return float(np.mean(np.abs(curve.coverage - curve.levels)))


def error_vs_confidence(y, mu, sigma, steps=20):
    """MAE of predictions whose sigma reaches a sweeping threshold.

    Thresholds are ``steps`` points spaced evenly over [min sigma, max sigma];
    x is the min-max normalised threshold. A constant sigma collapses to a
    single point at x=0 holding the overall MAE.
    """
    y, mu = _pair(y, mu)
    if steps < 2:
        raise InvalidArgumentError("steps must be >= 2")
    if y.size == 0:
        raise InvalidArgumentError("error-vs-confidence curve of empty input")
    sigma = np.asarray(sigma, dtype=np.float64).ravel()
    if sigma.shape != y.shape:
        raise InvalidArgumentError("sigma and targets differ in size")
    err = np.abs(y - mu)
    lo, hi = float(sigma.min()), float(sigma.max())
    if hi <= lo:
        return ConfidenceErrorCurve(np.array([0.0]), np.array([err.mean()]), np.array([y.size]))
    thresholds = np.linspace(lo, hi, steps)
    xs, maes, counts = [], [], []
    for t in thresholds:
        keep = sigma >= t
        k = int(keep.sum())
        if k == 0:
            break
        xs.append((t - lo) / (hi - lo))
        maes.append(err[keep].mean())
        counts.append(k)
    return ConfidenceErrorCurve(np.array(xs), np.array(maes), np.array(counts))


def bundle(y, mu, sigma, target_scale=(0.0, 1.0)):
    """All five metrics for one prediction set.

    ``y``/``mu``/``sigma`` are on the standardised scale; ``target_scale``
    ``(mean, std)`` maps targets back to data units for MAPE only.
    """
    y, mu = _pair(y, mu)
    m, s = target_scale
    return MetricBundle(
        mape=mape(y * s + m, mu * s + m),
        mse=mse(y, mu),
        r2=r2(y, mu),
        ece=ece(reliability_curve(y, mu, sigma)),
        nll=nll_metric(y, mu, sigma),
    )


def _fmt(v):
    return format(float(v), ".17g")


def write_reliability_csv(curve, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("level", "coverage", "count"))
        for p, c in zip(curve.levels, curve.coverage):
            w.writerow((_fmt(p), _fmt(c), curve.count))


def read_reliability_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return ReliabilityCurve(
        np.array([float(r["level"]) for r in rows]),
        np.array([float(r["coverage"]) for r in rows]),
        int(rows[0]["count"]) if rows else 0,
    )


def write_conf_error_csv(curve, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("x", "mae", "count"))
        for x, e, k in zip(curve.x, curve.mae, curve.count):
            w.writerow((_fmt(x), _fmt(e), int(k)))


def read_conf_error_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return ConfidenceErrorCurve(
        np.array([float(r["x"]) for r in rows]),
        np.array([float(r["mae"]) for r in rows]),
        np.array([int(r["count"]) for r in rows]),
    )
