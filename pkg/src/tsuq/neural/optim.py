import numpy as np

from ..errors import InvalidArgumentError

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


def adam_init(params):
    return {
        "m": {k: np.zeros_like(v) for k, v in params.items()},
        "v": {k: np.zeros_like(v) for k, v in params.items()},
        "t": 0,
    }


def adam_step(params, grads, state, lr=0.001, t=None):
    """One bias-corrected Adam update.

    ``params`` arrays are updated in place (so a model holding them sees the
    change) and returned together with the state. ``t`` defaults to the
    state's step counter plus one.
    """
    if t is None:
        t = state["t"] + 1
    if t < 1:
        raise InvalidArgumentError("t must be >= 1")
    m, v = state["m"], state["v"]
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape or m[k].shape != p.shape:
            raise InvalidArgumentError(f"shape mismatch for {k}: {p.shape} vs {g.shape}")
        m[k] *= BETA1
        m[k] += (1.0 - BETA1) * g
        v[k] *= BETA2
        v[k] += (1.0 - BETA2) * g * g
        m_hat = m[k] / (1.0 - BETA1**t)
        v_hat = v[k] / (1.0 - BETA2**t)
        p -= lr * m_hat / (np.sqrt(v_hat) + EPSILON)
    state["t"] = t
    return params, state
