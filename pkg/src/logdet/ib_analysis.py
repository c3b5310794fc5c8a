"""Information-plane and Layer Transmission Capacity tracking over training.

For captured activations ``T_1 .. T_L`` of a probe set with inputs ``X``
and one-hot labels ``Y``:

* information plane: ``I_D(X; T_i)`` and ``I_D(T_i; Y)`` per layer;
* Layer Transmission Capacity: ``LTC_i = I_D(T_{i-1}; T_i)`` with ``T_0 = X``,
  the information passed across one layer.

Every mutual information uses the ``100 * (d1 + d2)`` scaling rule of the
estimator config it is given.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn_probe
from .errors import ParameterError, TrainingError
from .estimator import DEFAULT_CONFIG, mutual_information


@dataclass(frozen=True)
class LayerInfo:
    I_XT: float
    I_TY: float
    LTC: float


@dataclass
class TrajectoryRecord:
    epoch: int
    layers: list
    train_acc: float
    test_acc: float
    loss: float = float("nan")

    def rows(self):
        for i, info in enumerate(self.layers, start=1):
            yield {
                "epoch": self.epoch,
                "layer": i,
                "I_XT": info.I_XT,
                "I_TY": info.I_TY,
                "LTC": info.LTC,
                "train_acc": self.train_acc,
                "test_acc": self.test_acc,
            }


def information_plane(trace, cfg=DEFAULT_CONFIG):
    """``[(I_XT, I_TY), ...]`` per captured layer."""
    if trace.X.shape[0] < 2:
        raise ParameterError("information plane needs at least two probe samples")
    if trace.Y is None:
        raise ParameterError("trace has no labels; capture it with labels to get I(T;Y)")
    return [(mutual_information(trace.X, T, cfg), mutual_information(T, trace.Y, cfg)) for T in trace.layers]


def layer_transmission_capacity(trace, cfg=DEFAULT_CONFIG):
    """``[I_D(T_{i-1}; T_i), ...]`` with ``T_0`` the network input."""
    if trace.X.shape[0] < 2:
        raise ParameterError("LTC needs at least two probe samples")
    inputs = [trace.X] + list(trace.layers[:-1])
    return [mutual_information(T_in, T_out, cfg) for T_in, T_out in zip(inputs, trace.layers)]


def analyse(net, X_probe, y_probe, cfg=DEFAULT_CONFIG):
    trace = nn_probe.forward(net, X_probe, y_probe)
    plane = information_plane(trace, cfg)
    ltc = layer_transmission_capacity(trace, cfg)
    return [LayerInfo(ixt, ity, c) for (ixt, ity), c in zip(plane, ltc)]


def sample_schedule(epochs, count=100):
    """Epochs at which to record: 0, the last epoch, and about ``count``
    points in between spaced geometrically.
    """
    if epochs <= 0:
        return [0]
    if count >= epochs + 1:
        return list(range(epochs + 1))
    pts = np.unique(np.round(np.geomspace(1, epochs, max(count - 1, 1))).astype(int))
    return sorted({0, epochs, *pts.tolist()})


def run_ib_experiment(dims, train, probe, epochs=100, sample_epochs=None, freeze_prefix=0,
                      cfg=DEFAULT_CONFIG, seed=0, activation="tanh", lr=0.05, batch=64):
    """Train a probe network; return one :class:`TrajectoryRecord` per
    sampled epoch.

    ``train`` and ``probe`` are ``(X, labels)`` pairs; the probe set is fixed
    for the whole run. ``sample_epochs`` is a list of epochs, an int count
    for :func:`sample_schedule`, or ``None`` for a count of 100. Epoch 0 is the initialised network.
    """
    if not 0 <= freeze_prefix < len(dims) - 1:
        raise ParameterError(f"freeze_prefix must be in [0, {len(dims) - 2}], got {freeze_prefix}")
    if epochs < 0:
        raise ParameterError(f"epochs must be non-negative, got {epochs}")
    X_tr, y_tr = train
    X_pr, y_pr = probe
    if sample_epochs is None:
        sample_epochs = 100
    wanted = set(sample_schedule(epochs, sample_epochs) if isinstance(sample_epochs, int) else sample_epochs)
    wanted = {e for e in wanted if 0 <= e <= epochs}

    net = nn_probe.init_network(dims, activation, seed)
    net.freeze(freeze_prefix)
    records = []

    def record(epoch, loss):
        info = analyse(net, X_pr, y_pr, cfg)
        records.append(TrajectoryRecord(epoch, info, nn_probe.accuracy(net, X_tr, y_tr),
                                        nn_probe.accuracy(net, X_pr, y_pr), loss))

    if 0 in wanted:
        record(0, float("nan"))
    for epoch in range(1, epochs + 1):
        try:
            loss = nn_probe.train_epoch(net, X_tr, y_tr, lr, batch, seed=seed * 1_000_003 + epoch)
        except TrainingError as exc:
            raise TrainingError(f"training diverged at epoch {epoch}: {exc}", exc.batch, epoch) from exc
        if epoch in wanted:
            record(epoch, loss)
    return records
