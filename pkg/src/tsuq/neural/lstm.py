"""Standard LSTM cell and a sequence layer trained with backpropagation
through time. Gate order everywhere is (i, f, o, g)."""
import numpy as np

from ..errors import InvalidArgumentError
from ..ndcore import DTYPE
from .layers import glorot_uniform, sigmoid

GATES = ("i", "f", "o", "g")


def _stacked(params):
    Wx = np.concatenate([params[f"W_{k}"] for k in GATES], axis=1)
    Uh = np.concatenate([params[f"U_{k}"] for k in GATES], axis=1)
    b = np.concatenate([params[f"b_{k}"] for k in GATES])
    return Wx, Uh, b


def _cell(x_t, h, c, Wx, Uh, b, xw=None):
    u = h.shape[1]
    if xw is None:
        xw = x_t @ Wx + b
    a = xw + h @ Uh
    i = sigmoid(a[:, :u])
    f = sigmoid(a[:, u:2 * u])
    o = sigmoid(a[:, 2 * u:3 * u])
    g = np.tanh(a[:, 3 * u:])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new, (i, f, o, g)


def lstm_step(x_t, h, c, params):
    """One LSTM step; returns ``(h', c')``."""
    Wx, Uh, b = _stacked(params)
    x_t = np.asarray(x_t, dtype=DTYPE)
    if x_t.ndim != 2 or x_t.shape[1] != Wx.shape[0]:
        raise InvalidArgumentError(f"x_t shape {x_t.shape} incompatible with W {Wx.shape}")
    if h.shape != c.shape or h.shape[1] != Uh.shape[0] or h.shape[0] != x_t.shape[0]:
        raise InvalidArgumentError(f"state shapes {h.shape}/{c.shape} do not match")
    h_new, c_new, _ = _cell(x_t, h, c, Wx, Uh, b)
    return h_new, c_new


class LSTM:
    """LSTM over inputs of shape (batch, time, features).

    With ``return_sequences`` the output is (batch, time, units), otherwise
    the final hidden state (batch, units).
    """

    stochastic = False
    variational = False

    def __init__(self, n_in, units, return_sequences=False, rng=None, params=None):
        self.n_in = n_in
        self.units = units
        self.return_sequences = return_sequences
        if params is None:
            params = {}
            for k in GATES:
                params[f"W_{k}"] = glorot_uniform(n_in, units, rng)
                params[f"U_{k}"] = glorot_uniform(units, units, rng)
                params[f"b_{k}"] = np.ones(units) if k == "f" else np.zeros(units)
        self.params = {k: np.asarray(v, dtype=DTYPE) for k, v in params.items()}
        self.grads = {}

    def sample_noise(self, n, rng):
        return None

    def forward(self, x, noise=None):
        if x.ndim != 3 or x.shape[2] != self.n_in:
            raise InvalidArgumentError(f"LSTM expects (batch, time, {self.n_in}), got {x.shape}")
        n, T, _ = x.shape
        Wx, Uh, b = _stacked(self.params)
        h = np.zeros((n, self.units))
        c = np.zeros((n, self.units))
        hs, cs, gates = [h], [c], []
        xw = x @ Wx + b  # input projection for every step at once
        for t in range(T):
            h, c, gate = _cell(None, h, c, Wx, Uh, b, xw[:, t, :])
            hs.append(h)
            cs.append(c)
            gates.append(gate)
        self._cache = (x, hs, cs, gates, Wx, Uh)
        if self.return_sequences:
            return np.stack(hs[1:], axis=1)
        return h

    def backward(self, dout):
        x, hs, cs, gates, Wx, Uh = self._cache
        n, T, _ = x.shape
        u = self.units
        dUh = np.zeros_like(Uh)
        da_all = np.empty((n, T, 4 * u))
        dh_next = np.zeros((n, u))
        dc_next = np.zeros((n, u))
        for t in reversed(range(T)):
            i, f, o, g = gates[t]
            if self.return_sequences:
                dh = dout[:, t, :] + dh_next
            elif t == T - 1:
                dh = dout + dh_next
            else:
                dh = dh_next
            tanh_c = np.tanh(cs[t + 1])
            do = dh * tanh_c
            dc = dh * o * (1.0 - tanh_c**2) + dc_next
            di = dc * g
            df = dc * cs[t]
            dg = dc * i
            dc_next = dc * f
            da = np.concatenate(
                [di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g**2)],
                axis=1,
            )
            da_all[:, t, :] = da
            dUh += hs[t].T @ da
            dh_next = da @ Uh.T
        dWx = x.reshape(n * T, -1).T @ da_all.reshape(n * T, -1)
        db = da_all.sum(axis=(0, 1))
        dx = da_all @ Wx.T
        grads = {}
        for j, k in enumerate(GATES):
            sl = slice(j * u, (j + 1) * u)
            grads[f"W_{k}"] = dWx[:, sl]
            grads[f"U_{k}"] = dUh[:, sl]
            grads[f"b_{k}"] = db[sl]
        self.grads = grads
        return dx
