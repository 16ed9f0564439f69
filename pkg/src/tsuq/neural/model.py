"""Model configuration and assembly of the MLP / LSTM forecasters."""
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigurationError
from .layers import (
    BBBDense,
    Dense,
    DropConnectDense,
    Dropout,
    DropoutDense,
    FlipoutDense,
)
from .losses import clamp_log_var
from .lstm import LSTM

ARCHITECTURES = ("mlp", "lstm")
METHODS = ("baseline", "ensemble", "dropout", "dropconnect", "bbb", "flipout")
STOCHASTIC_METHODS = ("dropout", "dropconnect", "bbb", "flipout")
DEFAULT_DROP_PROB = {"dropout": 0.2, "dropconnect": 0.05}
DISPLAY_NAMES = {
    "mlp": "MLP",
    "lstm": "LSTM",
    "baseline": "Baseline",
    "ensemble": "Ensemble",
    "dropout": "Dropout",
    "dropconnect": "Dropconnect",
    "bbb": "BBB",
    "flipout": "Flipout",
}


@dataclass
class ModelConfig:
    architecture: str = "mlp"
    uq_method: str = "baseline"
    hidden_units: int = 32
    hidden_layers: int = 2
    horizon: int = 1
    window: int = 12
    n_features: int = 1
    drop_prob: Optional[float] = None
    mc_samples: int = 50
    ensemble_size: int = 10
    prior_std: float = 1.0

    def __post_init__(self):
        if self.drop_prob is None:
            self.drop_prob = DEFAULT_DROP_PROB.get(self.uq_method, 0.0)
        self.validate()

    def validate(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigurationError(f"unknown architecture {self.architecture!r}")
        if self.uq_method not in METHODS:
            raise ConfigurationError(f"unknown uq_method {self.uq_method!r}")
        if not 1 <= self.horizon <= 12:
            raise ConfigurationError(f"horizon must be in [1, 12], got {self.horizon}")
        if self.hidden_units < 1 or self.hidden_layers < 1:
            raise ConfigurationError("hidden_units and hidden_layers must be >= 1")
        if self.window < 1 or self.n_features < 1:
            raise ConfigurationError("window and n_features must be >= 1")
        if not 0.0 <= self.drop_prob < 1.0:
            raise ConfigurationError(f"drop_prob must be in [0, 1), got {self.drop_prob}")
        if self.mc_samples < 1:
            raise ConfigurationError("mc_samples must be >= 1")
        if self.ensemble_size < 1:
            raise ConfigurationError("ensemble_size must be >= 1")
        if self.prior_std <= 0:
            raise ConfigurationError("prior_std must be positive")

    def to_dict(self):
        return asdict(self)


class Model:
    """A stack of layers ending in an output head.

    For the baseline method the head emits ``2*H`` values: the first ``H``
    are means, the rest unclamped log-variances.
    """

    def __init__(self, layers, method, horizon, flatten_input=True, config=None):
        self.layers = list(layers)
        self.method = method
        self.horizon = horizon
        self.flatten_input = flatten_input
        self.config = config

    @property
    def gaussian_head(self):
        return self.method == "baseline"

    @property
    def stochastic(self):
        return any(layer.stochastic for layer in self.layers)

    @property
    def variational(self):
        return any(layer.variational for layer in self.layers)

    def sample_noise(self, n, rng):
        return [layer.sample_noise(n, rng) for layer in self.layers]

    def forward(self, X, noise=None):
        """Raw head output for inputs ``X`` of shape (n, window, features)."""
        X = np.asarray(X, dtype=np.float64)
        h = X.reshape(X.shape[0], -1) if self.flatten_input else X
        if noise is None:
            noise = [None] * len(self.layers)
        for layer, nz in zip(self.layers, noise):
            h = layer.forward(h, nz)
        return h

    def split_head(self, out):
        """``(mu, log_var)`` for the Gaussian head, ``(out, None)`` otherwise."""
        if not self.gaussian_head:
            return out, None
        H = self.horizon
        return out[:, :H], clamp_log_var(out[:, H:])

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def named_params(self):
        return {f"{i}.{k}": v for i, layer in enumerate(self.layers) for k, v in layer.params.items()}

    def named_grads(self):
        return {f"{i}.{k}": v for i, layer in enumerate(self.layers) for k, v in layer.grads.items()}

    def load_params(self, named):
        for key, value in named.items():
            i, name = key.split(".", 1)
            target = self.layers[int(i)].params[name]
            if target.shape != value.shape:
                raise ConfigurationError(f"parameter {key}: shape {value.shape} != {target.shape}")
            target[...] = value

    def n_params(self):
        return int(sum(v.size for v in self.named_params().values()))

    def kl(self):
        prior = self.config.prior_std if self.config else 1.0
        return sum(layer.kl(prior) for layer in self.layers if layer.variational)

    def kl_grads(self):
        prior = self.config.prior_std if self.config else 1.0
        out = {}
        for i, layer in enumerate(self.layers):
            if layer.variational:
                for k, v in layer.kl_grads(prior).items():
                    out[f"{i}.{k}"] = v
        return out

    def signature(self):
        return tuple((k, v.shape) for k, v in self.named_params().items())


def _dense_factory(cfg, rng):
    method = cfg.uq_method
    if method == "dropout":
        return lambda n_in, n_out, act: DropoutDense(n_in, n_out, act, cfg.drop_prob, rng=rng)
    if method == "dropconnect":
        return lambda n_in, n_out, act: DropConnectDense(n_in, n_out, act, cfg.drop_prob, rng=rng)
    if method == "bbb":
        return lambda n_in, n_out, act: BBBDense(n_in, n_out, act, rng=rng)
    if method == "flipout":
        return lambda n_in, n_out, act: FlipoutDense(n_in, n_out, act, rng=rng)
    return lambda n_in, n_out, act: Dense(n_in, n_out, act, rng=rng)


def build_model(config, rng):
    """Assemble an untrained model for ``config``.

    Ensemble configs produce a single member; the caller builds the rest.
    """
    if isinstance(config, dict):
        config = ModelConfig(**config)
    config.validate()
    units = config.hidden_units
    H = config.horizon
    n_out = 2 * H if config.uq_method == "baseline" else H
    make = _dense_factory(config, rng)
    layers = []
    if config.architecture == "mlp":
        n_in = config.window * config.n_features
        for _ in range(config.hidden_layers):
            layers.append(make(n_in, units, "relu"))
            n_in = units
        # Dropout masks hidden activations; a mask on the mean output would
        # zero predictions, so the head stays plain.
        if config.uq_method == "dropout":
            layers.append(Dense(units, n_out, "identity", rng=rng))
        else:
            layers.append(make(units, n_out, "identity"))
        return Model(layers, config.uq_method, H, flatten_input=True, config=config)

    n_in = config.n_features
    for k in range(config.hidden_layers):
        last = k == config.hidden_layers - 1
        layers.append(LSTM(n_in, units, return_sequences=not last, rng=rng))
        n_in = units
    if config.uq_method == "dropout":
        layers.append(Dropout(units, config.drop_prob))
        layers.append(Dense(units, n_out, "identity", rng=rng))
    else:
        layers.append(make(units, n_out, "identity"))
    return Model(layers, config.uq_method, H, flatten_input=False, config=config)
