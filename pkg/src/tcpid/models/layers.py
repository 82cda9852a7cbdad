"""Trainable layers with explicit forward and backward passes (numpy only)."""
from __future__ import annotations

import numpy as np

FORGET_BIAS = 1.0
PRELU_INIT = 0.25


def uniform_fan_in(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Dense:
    """Affine map y = x W + b for 2-d inputs (batch, features)."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, dtype=np.float32):
        self.w = uniform_fan_in(rng, (n_in, n_out), n_in, dtype)
        self.b = np.zeros(n_out, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.dw, "b": self.db}

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        if train:
            self._x = x
        return x @ self.w + self.b

    def backward(self, dout: np.ndarray) -> np.ndarray:
        self.dw = self._x.T @ dout
        self.db = dout.sum(axis=0)
        return dout @ self.w.T


class PRelu:
    """Parametric ReLU with a single learned slope for the whole layer."""

    def __init__(self, dtype=np.float32, init: float = PRELU_INIT):
        self.a = np.array(init, dtype=dtype)
        self.da = np.zeros_like(self.a)
        self._x = None

    def params(self):
        return {"a": self.a}

    def grads(self):
        return {"a": self.da}

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        if train:
            self._x = x
        return np.where(x > 0, x, self.a * x)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        x = self._x
        neg = x <= 0
        self.da = np.array((dout * np.where(neg, x, 0.0)).sum(), dtype=self.a.dtype)
        return dout * np.where(neg, self.a, np.asarray(1.0, dtype=self.a.dtype))


class Lstm:
    """One recurrent layer over (batch, time, features) with stacked gates.

    Gate weights are stored stacked in i, f, g, o order: w maps the input,
    u the previous hidden state, b starts with the forget slice at 1 so
    early training does not wipe the cell state. Returns the full hidden
    sequence; backward runs truncation-free through every step.
    """

    def __init__(self, n_in: int, n_units: int, rng: np.random.Generator, dtype=np.float32):
        self.n_in = n_in
        self.n_units = n_units
        self.dtype = dtype
        self.w = uniform_fan_in(rng, (n_in, 4 * n_units), n_in, dtype)
        self.u = uniform_fan_in(rng, (n_units, 4 * n_units), n_units, dtype)
        self.b = np.zeros(4 * n_units, dtype=dtype)
        self.b[n_units:2 * n_units] = FORGET_BIAS
        self.dw = np.zeros_like(self.w)
        self.du = np.zeros_like(self.u)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def params(self):
        return {"w": self.w, "u": self.u, "b": self.b}

    def grads(self):
        return {"w": self.dw, "u": self.du, "b": self.db}

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        n, t, _ = x.shape
        h = self.n_units
        hs = np.zeros((n, t, h), dtype=self.dtype)
        h_prev = np.zeros((n, h), dtype=self.dtype)
        c_prev = np.zeros((n, h), dtype=self.dtype)
        cache = [] if train else None
        for step in range(t):
            xt = x[:, step, :]
            z = xt @ self.w + h_prev @ self.u + self.b
            i = sigmoid(z[:, :h])
            f = sigmoid(z[:, h:2 * h])
            g = np.tanh(z[:, 2 * h:3 * h])
            o = sigmoid(z[:, 3 * h:])
            c = f * c_prev + i * g
            tc = np.tanh(c)
            ht = o * tc
            hs[:, step, :] = ht
            if train:
                cache.append((xt, h_prev, c_prev, i, f, g, o, tc))
            h_prev = ht
            c_prev = c
        if train:
            self._cache = (x.shape, cache)
        return hs

    def backward(self, dhs: np.ndarray) -> np.ndarray:
        (n, t, _), cache = self._cache
        h = self.n_units
        dx = np.zeros((n, t, self.n_in), dtype=self.dtype)
        self.dw = np.zeros_like(self.w)
        self.du = np.zeros_like(self.u)
        self.db = np.zeros_like(self.b)
        dh_next = np.zeros((n, h), dtype=self.dtype)
        dc_next = np.zeros((n, h), dtype=self.dtype)
        for step in range(t - 1, -1, -1):
            xt, h_prev, c_prev, i, f, g, o, tc = cache[step]
            dh = dhs[:, step, :] + dh_next
            do = dh * tc
            dc = dc_next + dh * o * (1.0 - tc * tc)
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dz = np.concatenate(
                [
                    di * i * (1.0 - i),
                    df * f * (1.0 - f),
                    dg * (1.0 - g * g),
                    do * o * (1.0 - o),
                ],
                axis=1,
            )
            self.dw += xt.T @ dz
            self.du += h_prev.T @ dz
            self.db += dz.sum(axis=0)
            dx[:, step, :] = dz @ self.w.T
            dh_next = dz @ self.u.T
            dc_next = dc * f
        return dx
