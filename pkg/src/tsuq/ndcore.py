"""Numeric substrate: float64 arrays, splittable RNG streams, samplers and a
finite-difference gradient oracle.

Tensors are plain ``numpy.ndarray`` objects of dtype float64.
"""
import hashlib

import numpy as np

from .errors import InvalidArgumentError, NumericError

DTYPE = np.float64


def as_tensor(x):
    return np.ascontiguousarray(x, dtype=DTYPE)


def _label_key(label):
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class RngStream:
    """Counter-based random stream (Philox) with label-derived children.

    A child created with ``split(label)`` depends only on the parent's seed
    path and the label, never on how much the parent has been consumed.
    """

    def __init__(self, seed, _path=()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._path = tuple(_path)
        ss = np.random.SeedSequence([self.seed, *self._path])
        self.generator = np.random.Generator(np.random.Philox(ss))

    def split(self, label):
        return RngStream(self.seed, self._path + (_label_key(label),))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, depth={len(self._path)})"


def _shape(shape):
    if isinstance(shape, (int, np.integer)):
        return (int(shape),)
    return tuple(int(s) for s in shape)


def sample_gaussian(shape, mean, std, rng):
    if std < 0:
        raise InvalidArgumentError(f"std must be >= 0, got {std}")
    eps = rng.generator.standard_normal(_shape(shape))
    return mean + std * eps


def sample_bernoulli_mask(shape, keep_prob, rng):
    if not 0.0 <= keep_prob <= 1.0:
        raise InvalidArgumentError(f"keep_prob must be in [0, 1], got {keep_prob}")
    u = rng.generator.random(_shape(shape))
    return (u < keep_prob).astype(DTYPE)


def sample_rademacher(shape, rng):
    bits = rng.generator.integers(0, 2, size=_shape(shape))
    return (2 * bits - 1).astype(DTYPE)


def finite_diff_grad(f, x, eps=1e-6):
    """Central-difference gradient of scalar ``f`` at ``x``.

    ``x`` is perturbed in place and restored, so ``f`` may close over it.
    """
    if eps <= 0:
        raise InvalidArgumentError("eps must be positive")
    x = np.asarray(x)
    grad = np.zeros(x.shape, dtype=DTYPE)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f(x))
        flat[i] = orig - eps
        fm = float(f(x))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite function value at element {i}")
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad


def relative_error(a, b):
    """Norm-based relative difference, the usual gradient-check statistic."""
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def matmul(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise InvalidArgumentError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b
