"""Classifier architectures built from the layer primitives.

Two families are provided: a recurrent classifier that reads windows as
(batch, time, features) sequences, and a flat dense classifier that reads
the same windows flattened to (batch, time * features). Both end in a
linear layer producing one logit per class.
"""
from __future__ import annotations

import numpy as np

from .layers import Dense, Lstm, PRelu

LSTM_UNITS = (600, 600)
LSTM_DENSE = (256, 128)
REDUCED_LSTM_UNITS = (64, 64)
REDUCED_LSTM_DENSE = (32,)
DNN_HIDDEN = (1024, 512, 256, 128)


class LstmClassifier:
    """Stacked recurrent layers, then a dense head on the last hidden state."""

    kind = "lstm"

    def __init__(self, input_dim: int, n_classes: int, lstm_units=LSTM_UNITS,
                 dense_units=LSTM_DENSE, seed: int = 0, dtype=np.float32):
        self.input_dim = int(input_dim)
        self.n_classes = int(n_classes)
        self.lstm_units = tuple(int(u) for u in lstm_units)
        self.dense_units = tuple(int(u) for u in dense_units)
        self.dtype = np.dtype(dtype).type
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        self.lstms = []
        n_in = self.input_dim
        for units in self.lstm_units:
            self.lstms.append(Lstm(n_in, units, rng, self.dtype))
            n_in = units
        self.head = []
        for units in self.dense_units:
            self.head.append(Dense(n_in, units, rng, self.dtype))
            self.head.append(PRelu(self.dtype))
            n_in = units
        self.out = Dense(n_in, self.n_classes, rng, self.dtype)
        self._seq_shape = None

    def _layers(self):
        named = []
        for idx, layer in enumerate(self.lstms):
            named.append((f"lstm{idx}", layer))
        for idx, layer in enumerate(self.head):
            name = "dense" if isinstance(layer, Dense) else "prelu"
            named.append((f"{name}{idx // 2}", layer))
        named.append(("out", self.out))
        return named

    def params(self) -> dict:
        return {f"{ln}.{pn}": arr for ln, layer in self._layers()
                for pn, arr in layer.params().items()}

    def grads(self) -> dict:
        return {f"{ln}.{pn}": arr for ln, layer in self._layers()
                for pn, arr in layer.grads().items()}

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=self.dtype)
        for lstm in self.lstms:
            x = lstm.forward(x, train=train)
        self._seq_shape = x.shape
        h = x[:, -1, :]
        for layer in self.head:
            h = layer.forward(h, train=train)
        return self.out.forward(h, train=train)

    def backward(self, dlogits: np.ndarray) -> None:
        d = self.out.backward(dlogits)
        for layer in reversed(self.head):
            d = layer.backward(d)
        dseq = np.zeros(self._seq_shape, dtype=self.dtype)
        dseq[:, -1, :] = d
        for lstm in reversed(self.lstms):
            dseq = lstm.backward(dseq)

    def config(self) -> dict:
        return {
            "kind": self.kind,
            "input_dim": self.input_dim,
            "n_classes": self.n_classes,
            "lstm_units": list(self.lstm_units),
            "dense_units": list(self.dense_units),
        }


class DenseClassifier:
    """Fully connected baseline over flattened windows."""

    kind = "dense"

    def __init__(self, input_dim: int, n_classes: int, hidden=DNN_HIDDEN,
                 seed: int = 0, dtype=np.float32):
        self.input_dim = int(input_dim)
        self.n_classes = int(n_classes)
        self.hidden = tuple(int(u) for u in hidden)
        self.dtype = np.dtype(dtype).type
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        self.stack = []
        n_in = self.input_dim
        for units in self.hidden:
            self.stack.append(Dense(n_in, units, rng, self.dtype))
            self.stack.append(PRelu(self.dtype))
            n_in = units
        self.out = Dense(n_in, self.n_classes, rng, self.dtype)

    def _layers(self):
        named = []
        for idx, layer in enumerate(self.stack):
            name = "dense" if isinstance(layer, Dense) else "prelu"
            named.append((f"{name}{idx // 2}", layer))
        named.append(("out", self.out))
        return named

    def params(self) -> dict:
        return {f"{ln}.{pn}": arr for ln, layer in self._layers()
                for pn, arr in layer.params().items()}

    def grads(self) -> dict:
        return {f"{ln}.{pn}": arr for ln, layer in self._layers()
                for pn, arr in layer.grads().items()}

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=self.dtype)
        if x.ndim == 3:
            x = x.reshape(x.shape[0], -1)
        for layer in self.stack:
            x = layer.forward(x, train=train)
        return self.out.forward(x, train=train)

    def backward(self, dlogits: np.ndarray) -> None:
        d = self.out.backward(dlogits)
        for layer in reversed(self.stack):
            d = layer.backward(d)

    def config(self) -> dict:
        return {
            "kind": self.kind,
            "input_dim": self.input_dim,
            "n_classes": self.n_classes,
            "hidden": list(self.hidden),
        }


def build_model(config: dict, seed: int = 0, dtype=np.float32):
    """Construct a classifier from its config() dictionary."""
    kind = config["kind"]
    if kind == "lstm":
        return LstmClassifier(
            config["input_dim"], config["n_classes"],
            lstm_units=config["lstm_units"], dense_units=config["dense_units"],
            seed=seed, dtype=dtype,
        )
    if kind == "dense":
        return DenseClassifier(
            config["input_dim"], config["n_classes"],
            hidden=config["hidden"], seed=seed, dtype=dtype,
        )
    raise ValueError(f"unknown model kind: {kind!r}")


def reinit_output(model, seed: int = 0) -> None:
    """Reset the final linear layer, keeping every other weight.

    Used when adapting a trained classifier to a new link type: the
    feature extractor transfers, the class boundary is relearned.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    fresh = Dense(model.out.w.shape[0], model.out.w.shape[1], rng, model.dtype)
    model.out.w[...] = fresh.w
    model.out.b[...] = fresh.b
