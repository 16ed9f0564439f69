"""Predictive distributions from trained models: Monte Carlo sampling of
stochastic models, ensemble aggregation and the baseline Gaussian head."""
import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import FormatError, InvalidArgumentError, WrongMethodError


@dataclass
class PredictiveDistribution:
    mean: np.ndarray
    std: np.ndarray
    sample_count: int
    method: str
    samples: Optional[np.ndarray] = None  # (M, n, H) when requested

    def __post_init__(self):
        if self.mean.shape != self.std.shape:
            raise InvalidArgumentError(f"mean {self.mean.shape} and std {self.std.shape} differ")
        if np.any(self.std < 0):
            raise InvalidArgumentError("std must be non-negative")


def sample_moments(stack):
    """Mean and sample std (ddof=1) over the leading axis.

    Moments are taken around the first sample, so identical samples give
    exactly that sample as mean and exactly zero spread.
    """
    stack = np.asarray(stack, dtype=np.float64)
    shifted = stack - stack[0]
    mean = stack[0] + shifted.mean(axis=0)
    std = shifted.std(axis=0, ddof=1)
    return mean, std


def mc_predict(model, X, M=None, rng=None, keep_samples=False):
    """Run ``M`` stochastic forward passes and summarise them.

    Each pass draws its noise from ``rng.split(pass index)`` so passes are
    independent and reproducible regardless of evaluation order.
    """
    if M is None:
        M = model.config.mc_samples if model.config else 50
    if M < 2:
        raise InvalidArgumentError(f"need at least 2 samples, got M={M}")
    if not model.stochastic:
        raise WrongMethodError(f"{model.method} model is deterministic; MC sampling needs a stochastic method")
    if model.gaussian_head:
        raise WrongMethodError("baseline models are summarised with baseline_predict")
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    samples = None
    for m in range(M):
        noise = model.sample_noise(n, rng.split(m))
        out = model.forward(X, noise)
        if samples is None:
            samples = np.empty((M,) + out.shape)
        samples[m] = out
    mean, std = sample_moments(samples)
    return PredictiveDistribution(mean, std, M, model.method, samples if keep_samples else None)


def ensemble_predict(members, X, keep_samples=False):
    if len(members) < 2:
        raise InvalidArgumentError("an ensemble needs at least 2 members")
    sig = members[0].signature()
    for k, member in enumerate(members[1:], start=1):
        if member.signature() != sig:
            raise InvalidArgumentError(f"ensemble member {k} has a different parameter layout")
    stack = np.stack([member.forward(X) for member in members])
    mean, std = sample_moments(stack)
    return PredictiveDistribution(mean, std, len(members), "ensemble", stack if keep_samples else None)


def baseline_predict(model, X):
    if not model.gaussian_head:
        raise WrongMethodError(f"{model.method} model has no Gaussian head")
    mu, log_var = model.split_head(model.forward(X))
    return PredictiveDistribution(mu, np.exp(0.5 * log_var), 1, model.method)


def combine_mixture(means, variances):
    """Moment-matched Gaussian for an equal-weight mixture over the leading
    axis. Returns ``(mean, std)``."""
    means = np.asarray(means, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    if means.shape != variances.shape:
        raise InvalidArgumentError(f"shapes {means.shape} and {variances.shape} differ")
    if np.any(variances < 0):
        raise InvalidArgumentError("component variances must be non-negative")
    mean = means.mean(axis=0)
    second = (variances + means**2).mean(axis=0)
    var = np.maximum(second - mean**2, 0.0)
    return mean, np.sqrt(var)


def predict(model_or_members, X, rng=None, M=None):
    """Dispatch to the right summary for a model or a list of members."""
    if isinstance(model_or_members, (list, tuple)):
        return ensemble_predict(list(model_or_members), X)
    model = model_or_members
    if model.gaussian_head:
        return baseline_predict(model, X)
    return mc_predict(model, X, M, rng)


PREDICTION_COLUMNS = ("example_id", "step", "y_true", "mean", "std")


def write_predictions(path, y_true, dist):
    """Write one row per example and horizon step."""
    y_true = np.asarray(y_true)
    n, H = dist.mean.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PREDICTION_COLUMNS)
        for i in range(n):
            for s in range(H):
                w.writerow([
                    i, s + 1,
                    format(y_true[i, s], ".17g"),
                    format(dist.mean[i, s], ".17g"),
                    format(dist.std[i, s], ".17g"),
                ])


def read_predictions(path):
    """Returns ``(y_true, mean, std)`` arrays of shape (n, H)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != PREDICTION_COLUMNS:
            raise FormatError(f"{path}: expected header {','.join(PREDICTION_COLUMNS)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append((int(row[0]), int(row[1]), float(row[2]), float(row[3]), float(row[4])))
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}: {exc}", line=lineno) from None
    if not rows:
        raise FormatError(f"{path}: no prediction rows")
    n = max(r[0] for r in rows) + 1
    H = max(r[1] for r in rows)
    out = np.full((3, n, H), np.nan)
    for i, s, y, m, sd in rows:
        out[:, i, s - 1] = (y, m, sd)
    if np.isnan(out).any():
        raise FormatError(f"{path}: incomplete example/step grid")
    return out[0], out[1], out[2]
