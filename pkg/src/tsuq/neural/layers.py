"""Dense layer family: plain, MC-Dropout, MC-DropConnect, Bayes-by-Backprop
and Flipout.

Every layer keeps its parameters in ``self.params`` (name -> float64 array),
separates noise sampling from the forward pass, and fills ``self.grads`` in
``backward``. Passing ``noise=None`` to ``forward`` gives the deterministic
(mean / no-drop) path, which is how inference without sampling works.
"""
import numpy as np

from ..errors import InvalidArgumentError
from ..ndcore import (
    DTYPE,
    sample_bernoulli_mask,
    sample_gaussian,
    sample_rademacher,
)

ACTIVATIONS = ("relu", "identity")
INIT_SIGMA = 0.05


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def inverse_softplus(y):
    return np.log(np.expm1(y))


def _activate(z, activation):
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "identity":
        return z
    raise InvalidArgumentError(f"unknown activation {activation!r}")


def _activation_grad(dout, z, activation):
    if activation == "relu":
        return dout * (z > 0.0)
    return dout


def _check_input(x, W):
    if x.ndim != 2 or x.shape[1] != W.shape[0]:
        raise InvalidArgumentError(
            f"input shape {x.shape} incompatible with weight shape {W.shape}"
        )
    return x


def glorot_uniform(n_in, n_out, rng):
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.generator.uniform(-limit, limit, size=(n_in, n_out))


class Dense:
    stochastic = False
    variational = False

    def __init__(self, n_in, n_out, activation="identity", rng=None, params=None):
        if activation not in ACTIVATIONS:
            raise InvalidArgumentError(f"unknown activation {activation!r}")
        self.n_in = n_in
        self.n_out = n_out
        self.activation = activation
        if params is None:
            params = self.init_params(rng)
        self.params = {k: np.asarray(v, dtype=DTYPE) for k, v in params.items()}
        self.grads = {}
        self._cache = None

    def init_params(self, rng):
        return {
            "W": glorot_uniform(self.n_in, self.n_out, rng),
            "b": np.zeros(self.n_out),
        }

    def sample_noise(self, n, rng):
        return None

    def forward(self, x, noise=None):
        W, b = self.params["W"], self.params["b"]
        _check_input(x, W)
        z = x @ W + b
        self._cache = (x, z)
        return _activate(z, self.activation)

    def backward(self, dout):
        x, z = self._cache
        dz = _activation_grad(dout, z, self.activation)
        self.grads = {"W": x.T @ dz, "b": dz.sum(axis=0)}
        return dz @ self.params["W"].T


class DropoutDense(Dense):
    """Dense layer whose output activations are masked (inverted dropout)."""

    stochastic = True

    def __init__(self, n_in, n_out, activation="identity", drop_prob=0.2, rng=None, params=None):
        if not 0.0 <= drop_prob < 1.0:
            raise InvalidArgumentError(f"drop_prob must be in [0, 1), got {drop_prob}")
        self.drop_prob = drop_prob
        super().__init__(n_in, n_out, activation, rng, params)

    def sample_noise(self, n, rng):
        return {"mask": sample_bernoulli_mask((n, self.n_out), 1.0 - self.drop_prob, rng)}

    def forward(self, x, noise=None):
        a = super().forward(x)
        if noise is None:
            self._scaled_mask = None
            return a
        self._scaled_mask = noise["mask"] * (1.0 / (1.0 - self.drop_prob))
        return a * self._scaled_mask

    def backward(self, dout):
        if self._scaled_mask is not None:
            dout = dout * self._scaled_mask
        return super().backward(dout)


class Dropout:
    """Standalone inverted-dropout mask on its input (no parameters)."""

    stochastic = True
    variational = False

    def __init__(self, n_units, drop_prob=0.2):
        if not 0.0 <= drop_prob < 1.0:
            raise InvalidArgumentError(f"drop_prob must be in [0, 1), got {drop_prob}")
        self.n_units = n_units
        self.drop_prob = drop_prob
        self.params = {}
        self.grads = {}

    def sample_noise(self, n, rng):
        return {"mask": sample_bernoulli_mask((n, self.n_units), 1.0 - self.drop_prob, rng)}

    def forward(self, x, noise=None):
        if noise is None:
            self._scaled_mask = None
            return x
        self._scaled_mask = noise["mask"] * (1.0 / (1.0 - self.drop_prob))
        return x * self._scaled_mask

    def backward(self, dout):
        if self._scaled_mask is None:
            return dout
        return dout * self._scaled_mask


class DropConnectDense(Dense):
    """Dense layer with a Bernoulli mask on weights and bias.

    One mask is shared by the whole batch.
    """

    stochastic = True

    def __init__(self, n_in, n_out, activation="identity", drop_prob=0.05, rng=None, params=None):
        if not 0.0 <= drop_prob < 1.0:
            raise InvalidArgumentError(f"drop_prob must be in [0, 1), got {drop_prob}")
        self.drop_prob = drop_prob
        super().__init__(n_in, n_out, activation, rng, params)

    def sample_noise(self, n, rng):
        keep = 1.0 - self.drop_prob
        return {
            "W_mask": sample_bernoulli_mask((self.n_in, self.n_out), keep, rng),
            "b_mask": sample_bernoulli_mask((self.n_out,), keep, rng),
        }

    def forward(self, x, noise=None):
        W, b = self.params["W"], self.params["b"]
        _check_input(x, W)
        if noise is None:
            self._scaled = None
        else:
            scale = 1.0 / (1.0 - self.drop_prob)
            self._scaled = (noise["W_mask"] * scale, noise["b_mask"] * scale)
            W = W * self._scaled[0]
            b = b * self._scaled[1]
        z = x @ W + b
        self._cache = (x, z, W)
        return _activate(z, self.activation)

    def backward(self, dout):
        x, z, W_eff = self._cache
        dz = _activation_grad(dout, z, self.activation)
        dW = x.T @ dz
        db = dz.sum(axis=0)
        if self._scaled is not None:
            dW = dW * self._scaled[0]
            db = db * self._scaled[1]
        self.grads = {"W": dW, "b": db}
        return dz @ W_eff.T


class _VariationalDense:
    """Shared parameterisation: W ~ N(W_mu, softplus(W_rho)^2), same for b."""

    stochastic = True
    variational = True

    def __init__(self, n_in, n_out, activation="identity", rng=None, params=None):
        if activation not in ACTIVATIONS:
            raise InvalidArgumentError(f"unknown activation {activation!r}")
        self.n_in = n_in
        self.n_out = n_out
        self.activation = activation
        if params is None:
            rho0 = inverse_softplus(INIT_SIGMA)
            params = {
                "W_mu": glorot_uniform(n_in, n_out, rng),
                "W_rho": np.full((n_in, n_out), rho0),
                "b_mu": np.zeros(n_out),
                "b_rho": np.full(n_out, rho0),
            }
        self.params = {k: np.asarray(v, dtype=DTYPE) for k, v in params.items()}
        self.grads = {}

    def sample_noise(self, n, rng):
        return {
            "W_eps": sample_gaussian((self.n_in, self.n_out), 0.0, 1.0, rng),
            "b_eps": sample_gaussian((self.n_out,), 0.0, 1.0, rng),
        }

    def kl(self, prior_std=1.0):
        return kl_gaussian(self.params, prior_std)

    def kl_grads(self, prior_std=1.0):
        return kl_gaussian_grad(self.params, prior_std)


class BBBDense(_VariationalDense):
    """Bayes-by-Backprop dense layer; one weight sample per batch."""

    def forward(self, x, noise=None):
        p = self.params
        _check_input(x, p["W_mu"])
        if noise is None:
            W, b = p["W_mu"], p["b_mu"]
        else:
            W = p["W_mu"] + softplus(p["W_rho"]) * noise["W_eps"]
            b = p["b_mu"] + softplus(p["b_rho"]) * noise["b_eps"]
        z = x @ W + b
        self._cache = (x, z, W, noise)
        return _activate(z, self.activation)

    def backward(self, dout):
        x, z, W, noise = self._cache
        p = self.params
        dz = _activation_grad(dout, z, self.activation)
        dW = x.T @ dz
        db = dz.sum(axis=0)
        grads = {"W_mu": dW, "b_mu": db}
        if noise is None:
            grads["W_rho"] = np.zeros_like(p["W_rho"])
            grads["b_rho"] = np.zeros_like(p["b_rho"])
        else:
            grads["W_rho"] = dW * noise["W_eps"] * sigmoid(p["W_rho"])
            grads["b_rho"] = db * noise["b_eps"] * sigmoid(p["b_rho"])
        self.grads = grads
        return dz @ W.T


class FlipoutDense(_VariationalDense):
    """Flipout dense layer: one shared perturbation, decorrelated per example
    by Rademacher sign vectors on the input and output side."""

    def sample_noise(self, n, rng):
        noise = super().sample_noise(n, rng)
        noise["s"] = sample_rademacher((n, self.n_in), rng)
        noise["r"] = sample_rademacher((n, self.n_out), rng)
        noise["t"] = sample_rademacher((n, self.n_out), rng)
        return noise

    def forward(self, x, noise=None):
        p = self.params
        _check_input(x, p["W_mu"])
        z = x @ p["W_mu"] + p["b_mu"]
        if noise is not None:
            dW = softplus(p["W_rho"]) * noise["W_eps"]
            db = softplus(p["b_rho"]) * noise["b_eps"]
            z = z + ((x * noise["s"]) @ dW) * noise["r"] + db * noise["t"]
        else:
            dW = None
        self._cache = (x, z, dW, noise)
        return _activate(z, self.activation)

    def backward(self, dout):
        x, z, delta_W, noise = self._cache
        p = self.params
        dz = _activation_grad(dout, z, self.activation)
        grads = {"W_mu": x.T @ dz, "b_mu": dz.sum(axis=0)}
        dx = dz @ p["W_mu"].T
        if noise is None:
            grads["W_rho"] = np.zeros_like(p["W_rho"])
            grads["b_rho"] = np.zeros_like(p["b_rho"])
        else:
            dzr = dz * noise["r"]
            d_delta_W = (x * noise["s"]).T @ dzr
            d_delta_b = (dz * noise["t"]).sum(axis=0)
            grads["W_rho"] = d_delta_W * noise["W_eps"] * sigmoid(p["W_rho"])
            grads["b_rho"] = d_delta_b * noise["b_eps"] * sigmoid(p["b_rho"])
            dx = dx + (dzr @ delta_W.T) * noise["s"]
        self.grads = grads
        return dx


def kl_gaussian(params, prior_std=1.0):
    """KL(q || N(0, prior_std^2)) summed over all weights and biases of a
    variational layer."""
    if prior_std <= 0:
        raise InvalidArgumentError("prior_std must be positive")
    total = 0.0
    for name in ("W", "b"):
        mu = params[f"{name}_mu"]
        sigma = softplus(params[f"{name}_rho"])
        total += np.sum(
            np.log(prior_std / sigma)
            + (sigma**2 + mu**2) / (2.0 * prior_std**2)
            - 0.5
        )
    return float(total)


def kl_gaussian_grad(params, prior_std=1.0):
    grads = {}
    for name in ("W", "b"):
        mu = params[f"{name}_mu"]
        rho = params[f"{name}_rho"]
        sigma = softplus(rho)
        grads[f"{name}_mu"] = mu / prior_std**2
        grads[f"{name}_rho"] = (-1.0 / sigma + sigma / prior_std**2) * sigmoid(rho)
    return grads


# Functional forms over explicit parameter mappings.

def dense_forward(x, params, activation="identity"):
    W = np.asarray(params["W"], dtype=DTYPE)
    layer = Dense(W.shape[0], W.shape[1], activation, params=params)
    return layer.forward(np.asarray(x, dtype=DTYPE))


def dropout_forward(x, params, drop_prob, rng, stochastic=True, activation="identity"):
    W = np.asarray(params["W"], dtype=DTYPE)
    layer = DropoutDense(W.shape[0], W.shape[1], activation, drop_prob, params=params)
    x = np.asarray(x, dtype=DTYPE)
    noise = layer.sample_noise(x.shape[0], rng) if stochastic else None
    return layer.forward(x, noise)


def dropconnect_forward(x, params, drop_prob, rng, stochastic=True, activation="identity"):
    W = np.asarray(params["W"], dtype=DTYPE)
    layer = DropConnectDense(W.shape[0], W.shape[1], activation, drop_prob, params=params)
    x = np.asarray(x, dtype=DTYPE)
    noise = layer.sample_noise(x.shape[0], rng) if stochastic else None
    return layer.forward(x, noise)


def bbb_dense_forward(x, params, rng, stochastic=True, activation="identity"):
    W = np.asarray(params["W_mu"], dtype=DTYPE)
    layer = BBBDense(W.shape[0], W.shape[1], activation, params=params)
    x = np.asarray(x, dtype=DTYPE)
    noise = layer.sample_noise(x.shape[0], rng) if stochastic else None
    return layer.forward(x, noise)


def flipout_dense_forward(x, params, rng, stochastic=True, activation="identity"):
    W = np.asarray(params["W_mu"], dtype=DTYPE)
    layer = FlipoutDense(W.shape[0], W.shape[1], activation, params=params)
    x = np.asarray(x, dtype=DTYPE)
    noise = layer.sample_noise(x.shape[0], rng) if stochastic else None
    return layer.forward(x, noise)
