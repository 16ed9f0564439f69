import numpy as np

from ..errors import InvalidArgumentError

LOG_VAR_MIN = -10.0
LOG_VAR_MAX = 10.0


def _same_shape(*arrays):
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise InvalidArgumentError(f"shape mismatch: {sorted(shapes)}")


def mse_loss(mu, y):
    _same_shape(mu, y)
    r = np.asarray(mu) - np.asarray(y)
    return float(np.mean(r * r))


def mse_grad(mu, y):
    _same_shape(mu, y)
    mu = np.asarray(mu)
    return 2.0 * (mu - np.asarray(y)) / mu.size


def gaussian_nll_loss(mu, log_var, y):
    """Mean of ``log(s2) + (mu - y)^2 / s2`` with ``s2 = exp(log_var)``.

    The constant ``log(2*pi)`` and the factor 1/2 are omitted.
    """
    _same_shape(mu, log_var, y)
    r = np.asarray(mu) - np.asarray(y)
    log_var = np.asarray(log_var)
    return float(np.mean(log_var + r * r * np.exp(-log_var)))


def gaussian_nll_grad(mu, log_var, y):
    """Gradients of :func:`gaussian_nll_loss` w.r.t. ``mu`` and ``log_var``."""
    _same_shape(mu, log_var, y)
    r = np.asarray(mu) - np.asarray(y)
    inv_var = np.exp(-np.asarray(log_var))
    n = r.size
    return 2.0 * r * inv_var / n, (1.0 - r * r * inv_var) / n


def clamp_log_var(raw):
    return np.clip(raw, LOG_VAR_MIN, LOG_VAR_MAX)
