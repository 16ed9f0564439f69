from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ..errors import ConfigurationError, InvalidArgumentError, TrainingDivergedError
from .losses import gaussian_nll_grad, gaussian_nll_loss, mse_grad, mse_loss
from .optim import adam_init, adam_step

LOSSES = ("mse", "nll")


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 100
    batch_size: int = 32
    loss: Optional[str] = None  # None picks nll for baseline, mse otherwise
    kl_weight: Optional[float] = None  # None -> 1 / number of training examples
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.loss is not None and self.loss not in LOSSES:
            raise ConfigurationError(f"unknown loss {self.loss!r}")
        if self.kl_weight is not None and self.kl_weight < 0:
            raise ConfigurationError("kl_weight must be >= 0")

    def to_dict(self):
        return asdict(self)


def resolve_loss(model, tcfg):
    loss = tcfg.loss or ("nll" if model.gaussian_head else "mse")
    if loss == "nll" and not model.gaussian_head:
        raise ConfigurationError("the Gaussian NLL loss needs the baseline Gaussian head")
    if loss == "mse" and model.gaussian_head:
        raise ConfigurationError("the baseline model is trained with the Gaussian NLL loss")
    return loss


def data_loss_and_grad(model, out, y, loss):
    if loss == "nll":
        H = model.horizon
        raw_lv = out[:, H:]
        mu, log_var = model.split_head(out)
        value = gaussian_nll_loss(mu, log_var, y)
        dmu, dlv = gaussian_nll_grad(mu, log_var, y)
        # clamp passes gradient only inside its range
        dlv = dlv * ((raw_lv >= -10.0) & (raw_lv <= 10.0))
        return value, np.concatenate([dmu, dlv], axis=1)
    return mse_loss(out, y), mse_grad(out, y)


def train(model, windows, tcfg, rng, context=""):
    """Minibatch Adam training. Returns ``(model, per-epoch mean loss)``.

    Stochastic layers draw fresh noise for every minibatch; variational
    models add ``kl_weight * KL`` to each minibatch loss.
    """
    X = np.asarray(windows.X, dtype=np.float64)
    Y = np.asarray(windows.Y, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise InvalidArgumentError("cannot train on an empty window set")
    if Y.shape[1] != model.horizon:
        raise InvalidArgumentError(f"targets have {Y.shape[1]} steps, model predicts {model.horizon}")
    tcfg.validate()
    loss = resolve_loss(model, tcfg)
    kl_weight = 0.0
    if model.variational:
        kl_weight = tcfg.kl_weight if tcfg.kl_weight is not None else 1.0 / n

    params = model.named_params()
    state = adam_init(params)
    history = []
    bs = tcfg.batch_size
    for epoch in range(1, tcfg.epochs + 1):
        order = rng.generator.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            xb, yb = X[idx], Y[idx]
            noise = model.sample_noise(len(idx), rng) if model.stochastic else None
            out = model.forward(xb, noise)
            value, dout = data_loss_and_grad(model, out, yb, loss)
            model.backward(dout)
            grads = model.named_grads()
            if kl_weight:
                value += kl_weight * model.kl()
                for k, g in model.kl_grads().items():
                    grads[k] = grads[k] + kl_weight * g
            if not np.isfinite(value):
                raise TrainingDivergedError(epoch, context)
            adam_step(params, grads, state, tcfg.learning_rate)
            total += value * len(idx)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(epoch, context)
        history.append(epoch_loss)
    return model, history
