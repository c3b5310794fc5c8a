"""A small fully connected network with per-layer activation capture.

Layers compute ``T_i = g_i(T_{i-1} W_i^T + b_i)`` with ``W_i`` of shape
``(d_out, d_in)``; the last layer is a softmax. Training is plain mini-batch
SGD on softmax cross-entropy, deterministic given its seed.

Snapshot format (``save_network``/``load_network``), all little-endian::

    magic    4 bytes  b"LDPN"
    version  uint32   1
    layers   uint32   L
    seed     int64
    dims     uint32 x (L + 1)
    acts     uint8 x L    0=tanh 1=relu 2=linear 3=softmax
    frozen   uint8 x L
    then for each layer: W (d_out*d_in float64, row-major), b (d_out float64)
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

import numpy as np

from .datasets import rng
from .errors import FormatError, ParameterError, ShapeError, TrainingError

SNAPSHOT_MAGIC = b"LDPN"
SNAPSHOT_VERSION = 1


class Activation(str, enum.Enum):
    TANH = "tanh"
    RELU = "relu"
    LINEAR = "linear"
    SOFTMAX_OUT = "softmax"


_ACT_CODES = [Activation.TANH, Activation.RELU, Activation.LINEAR, Activation.SOFTMAX_OUT]


def softmax(Z):
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def apply_activation(act, Z):
    if act is Activation.TANH:
        return np.tanh(Z)
    if act is Activation.RELU:
        return np.maximum(Z, 0.0)
    if act is Activation.LINEAR:
        return Z
    return softmax(Z)


@dataclass
class ProbeNetwork:
    weights: list
    biases: list
    activations: list
    frozen: list = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        L = len(self.weights)
        if L == 0 or len(self.biases) != L or len(self.activations) != L:
            raise ShapeError("weights, biases and activations must be non-empty and equally long")
        self.activations = [Activation(a) for a in self.activations]
        if not self.frozen:
            self.frozen = [False] * L
        for i in range(1, L):
            if self.weights[i].shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeError(f"layer {i} expects {self.weights[i].shape[1]} inputs, "
                                 f"layer {i - 1} gives {self.weights[i - 1].shape[0]}")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (W.shape[0],):
                raise ShapeError(f"layer {i} bias has shape {b.shape}, expected ({W.shape[0]},)")
        soft = [a is Activation.SOFTMAX_OUT for a in self.activations]
        if not soft[-1] or any(soft[:-1]):
            raise ParameterError("exactly the last layer must use the softmax output")

    @property
    def dims(self):
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def n_layers(self):
        return len(self.weights)

    def freeze(self, prefix):
        """Freeze the first ``prefix`` layers."""
        if not 0 <= prefix <= self.n_layers:
            raise ParameterError(f"freeze prefix {prefix} outside [0, {self.n_layers}]")
        self.frozen = [i < prefix for i in range(self.n_layers)]

    def copy(self):
        return ProbeNetwork([W.copy() for W in self.weights], [b.copy() for b in self.biases],
                            list(self.activations), list(self.frozen), self.seed)

    def parameters(self):
        return [p for W, b in zip(self.weights, self.biases) for p in (W, b)]


def init_network(dims, activation=Activation.TANH, seed=0):
    """Weights ~ N(0, 1/d_in), zero biases, softmax on the last layer."""
    if len(dims) < 2:
        raise ParameterError(f"need at least input and output sizes, got {dims}")
    g = rng(seed)
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        weights.append(g.standard_normal((d_out, d_in)) / np.sqrt(d_in))
        biases.append(np.zeros(d_out))
    acts = [Activation(activation)] * (len(dims) - 2) + [Activation.SOFTMAX_OUT]
    return ProbeNetwork(weights, biases, acts, seed=seed)


def one_hot(labels, classes):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise ParameterError(f"labels must lie in [0, {classes})")
    Y = np.zeros((len(labels), classes))
    Y[np.arange(len(labels)), labels] = 1.0
    return Y


@dataclass
class ActivationTrace:
    X: np.ndarray
    layers: list
    Y: np.ndarray | None = None

    def __post_init__(self):
        n = self.X.shape[0]
        if any(T.shape[0] != n for T in self.layers):
            raise ShapeError("all captured layers must share the sample count")
        if self.Y is not None and self.Y.shape[0] != n:
            raise ShapeError("labels must share the sample count")

    @property
    def output(self):
        return self.layers[-1]


def _forward(net, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.dims[0]:
        raise ShapeError(f"network expects inputs of width {net.dims[0]}, got shape {X.shape}")
    outs = []
    T = X
    for W, b, act in zip(net.weights, net.biases, net.activations):
        T = apply_activation(act, T @ W.T + b)
        outs.append(T)
    return X, outs


def forward(net, X, labels=None):
    """Run the network and capture every post-activation output."""
    X, outs = _forward(net, X)
    Y = None if labels is None else one_hot(labels, net.dims[-1])
    return ActivationTrace(X, outs, Y)


def predict(net, X):
    return np.argmax(_forward(net, X)[1][-1], axis=1)


def accuracy(net, X, labels):
    return float(np.mean(predict(net, X) == np.asarray(labels)))


def cross_entropy(P, labels):
    p = P[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(p, np.finfo(np.float64).tiny))))


def loss_and_gradients(net, X, labels):
    """Mean softmax cross-entropy and its gradients ``[(dW, db), ...]``."""
    labels = np.asarray(labels, dtype=np.int64)
    X, outs = _forward(net, X)
    n = X.shape[0]
    loss = cross_entropy(outs[-1], labels)
    delta = outs[-1].copy()
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    grads = [None] * net.n_layers
    for i in range(net.n_layers - 1, -1, -1):
        inp = X if i == 0 else outs[i - 1]
        grads[i] = (delta.T @ inp, delta.sum(axis=0))
        if i == 0:
            break
        delta = delta @ net.weights[i]
        prev_act = net.activations[i - 1]
        if prev_act is Activation.TANH:
            delta = delta * (1.0 - outs[i - 1] ** 2)
        elif prev_act is Activation.RELU:
            delta = delta * (outs[i - 1] > 0.0)
    return loss, grads


def train_epoch(net, X, labels, lr=0.05, batch=64, seed=0):
    """One epoch of shuffled mini-batch SGD; returns the sample-weighted mean loss.

    Frozen layers are skipped entirely, so their parameters stay bit-identical.
    """
    if lr < 0:
        raise ParameterError(f"learning rate must be non-negative, got {lr}")
    if batch < 1:
        raise ParameterError(f"batch size must be >= 1, got {batch}")
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    order = rng(seed).permutation(n)
    total = 0.0
    for b, start in enumerate(range(0, n, batch)):
        idx = order[start:start + batch]
        # overflow surfaces as a non-finite loss, reported below
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grads = loss_and_gradients(net, X[idx], labels[idx])
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss in batch {b}", batch=b)
        total += loss * len(idx)
        if lr == 0:
            continue
        for i, (dW, db) in enumerate(grads):
            if net.frozen[i]:
                continue
            net.weights[i] -= lr * dW
            net.biases[i] -= lr * db
    return total / n


def scaled_single_layer(d, w, activation=Activation.TANH, n=3000, seed=0, d_out=None):
    """Inputs ``X ~ N(0, I_d)`` and ``T = g(w * X W0^T)`` for a fixed random ``W0``.

    ``W0`` has entries ``N(0, 1/d)``. ``X`` is drawn before ``W0`` from one
    stream, so a sweep over ``w`` at a fixed seed reuses both.
    """
    d_out = d if d_out is None else d_out
    g = rng(seed)
    X = g.standard_normal((n, d))
    W0 = g.standard_normal((d_out, d)) / np.sqrt(d)
    T = apply_activation(Activation(activation), w * (X @ W0.T))
    return X, T


def save_network(net, path):
    L = net.n_layers
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<IIq", SNAPSHOT_VERSION, L, int(net.seed)))
        fh.write(struct.pack(f"<{L + 1}I", *net.dims))
        fh.write(bytes(_ACT_CODES.index(a) for a in net.activations))
        fh.write(bytes(int(f) for f in net.frozen))
        for W, b in zip(net.weights, net.biases):
            fh.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_network(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != SNAPSHOT_MAGIC:
        raise FormatError("not a network snapshot (bad magic)", path, 0)
    if len(raw) < 20:
        raise FormatError("truncated snapshot header", path, len(raw))
    version, L, seed = struct.unpack_from("<IIq", raw, 4)
    if version != SNAPSHOT_VERSION:
        raise FormatError(f"unsupported snapshot version {version}", path, 4)
    off = 20
    if len(raw) < off + 4 * (L + 1) + 2 * L:
        raise FormatError("truncated snapshot header", path, len(raw))
    dims = struct.unpack_from(f"<{L + 1}I", raw, off)
    off += 4 * (L + 1)
    codes = raw[off:off + L]
    off += L
    frozen = [bool(x) for x in raw[off:off + L]]
    off += L
    if any(c >= len(_ACT_CODES) for c in codes):
        raise FormatError("unknown activation code", path, off - 2 * L)
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        count = d_out * d_in + d_out
        if len(raw) < off + 8 * count:
            raise FormatError("truncated snapshot parameters", path, len(raw))
        W = np.frombuffer(raw, dtype="<f8", count=d_out * d_in, offset=off).reshape(d_out, d_in).astype(np.float64)
        off += 8 * d_out * d_in
        b = np.frombuffer(raw, dtype="<f8", count=d_out, offset=off).astype(np.float64)
        off += 8 * d_out
        weights.append(W)
        biases.append(b)
    return ProbeNetwork(weights, biases, [_ACT_CODES[c] for c in codes], frozen, seed)
