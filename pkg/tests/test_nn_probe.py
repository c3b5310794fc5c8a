import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logdet import datasets as ds
from logdet import nn_probe as nn
from logdet.errors import FormatError, ParameterError, ShapeError, TrainingError
from logdet.nn_probe import Activation, ProbeNetwork


def numeric_gradients(net, X, y, h=1e-4):
    out = []
    for W, b in zip(net.weights, net.biases):
        grads = []
        for P in (W, b):
            G = np.zeros_like(P)
            for idx in np.ndindex(P.shape):
                old = P[idx]
                P[idx] = old + h
                lp = nn.cross_entropy(nn.forward(net, X).output, y)
                P[idx] = old - h
                lm = nn.cross_entropy(nn.forward(net, X).output, y)
                P[idx] = old
                G[idx] = (lp - lm) / (2 * h)
            grads.append(G)
        out.append(tuple(grads))
    return out


def scalar_net(w, act="tanh"):
    # one hidden unit with weight w, then a fixed softmax head
    return ProbeNetwork([np.array([[w]]), np.zeros((2, 1))], [np.zeros(1), np.zeros(2)],
                        [act, "softmax"])


class TestStructure:
    def test_shapes(self):
        net = nn.init_network([4, 3, 2], seed=1)
        assert [W.shape for W in net.weights] == [(3, 4), (2, 3)]
        assert [b.shape for b in net.biases] == [(3,), (2,)]
        assert net.dims == [4, 3, 2]
        assert net.activations == [Activation.TANH, Activation.SOFTMAX_OUT]

    def test_same_seed_same_parameters(self):
        a, b = nn.init_network([5, 4, 3], seed=7), nn.init_network([5, 4, 3], seed=7)
        for p, q in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(p, q)

    def test_weight_variance(self):
        W = nn.init_network([784, 1024, 10], seed=0).weights[0]
        assert W.var() == pytest.approx(1 / 784, rel=0.1)

    def test_biases_zero(self):
        assert all(np.all(b == 0) for b in nn.init_network([3, 3, 3], seed=2).biases)

    def test_dims_must_chain(self):
        with pytest.raises(ShapeError):
            ProbeNetwork([np.ones((3, 2)), np.ones((2, 4))], [np.zeros(3), np.zeros(2)], ["tanh", "softmax"])

    @pytest.mark.parametrize("acts", [["tanh", "tanh"], ["softmax", "softmax"]])
    def test_softmax_only_last(self, acts):
        with pytest.raises(ParameterError):
            ProbeNetwork([np.ones((2, 2)), np.ones((2, 2))], [np.zeros(2), np.zeros(2)], acts)

    def test_too_few_dims(self):
        with pytest.raises(ParameterError):
            nn.init_network([3])

    @pytest.mark.parametrize("prefix", [-1, 4])
    def test_freeze_range(self, prefix):
        with pytest.raises(ParameterError):
            nn.init_network([2, 2, 2, 2]).freeze(prefix)


class TestForward:
    def test_zero_network(self):
        net = nn.init_network([3, 4, 5], seed=0)
        for p in net.parameters():
            p[...] = 0.0
        trace = nn.forward(net, ds.rng(0).standard_normal((6, 3)))
        assert np.all(trace.layers[0] == 0.0)
        np.testing.assert_allclose(trace.output, 0.2, rtol=1e-15)

    def test_scalar_tanh(self):
        trace = nn.forward(scalar_net(1.0), np.array([[2.0]]))
        assert trace.layers[0][0, 0] == pytest.approx(0.96403, abs=5e-6)
        assert trace.layers[0][0, 0] == math.tanh(2.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 20), st.integers(0, 2**32 - 1), st.floats(0.1, 30.0))
    def test_softmax_rows_and_relu(self, n, seed, scale):
        net = nn.init_network([3, 6, 4], "relu", seed=seed % 1000)
        X = scale * ds.rng(seed).standard_normal((n, 3))
        trace = nn.forward(net, X)
        assert np.all(trace.layers[0] >= 0.0)
        np.testing.assert_allclose(trace.output.sum(axis=1), 1.0, atol=1e-9)

    def test_softmax_extreme_logits(self):
        P = nn.softmax(np.array([[1000.0, 0.0, -1000.0]]))
        np.testing.assert_allclose(P, [[1.0, 0.0, 0.0]])

    def test_labels_one_hot(self):
        trace = nn.forward(nn.init_network([2, 3], seed=0), np.zeros((3, 2)), labels=[0, 2, 1])
        np.testing.assert_array_equal(trace.Y, np.eye(3)[[0, 2, 1]])

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            nn.forward(nn.init_network([3, 2]), np.zeros((4, 5)))

    def test_trace_rows_must_match(self):
        with pytest.raises(ShapeError):
            nn.ActivationTrace(np.zeros((3, 2)), [np.zeros((4, 1))])

    @pytest.mark.parametrize("labels", [[-1], [3]])
    def test_one_hot_range(self, labels):
        with pytest.raises(ParameterError):
            nn.one_hot(labels, 3)

    def test_cross_entropy_nonnegative(self):
        P = nn.softmax(ds.rng(1).standard_normal((10, 4)))
        assert nn.cross_entropy(P, np.arange(10) % 4) >= 0.0


class TestGradients:
    @pytest.mark.parametrize("act", ["tanh", "relu", "linear"])
    @pytest.mark.parametrize("dims", [[3, 4, 3], [2, 3, 3, 2], [4, 2]])
    def test_central_differences(self, act, dims):
        net = nn.init_network(dims, act, seed=5)
        assert sum(p.size for p in net.parameters()) <= 50
        g = ds.rng(6)
        for p in net.biases:
            p[...] = 0.1 * g.standard_normal(p.shape)
        X = g.standard_normal((7, dims[0]))
        y = np.arange(7) % dims[-1]
        _, grads = nn.loss_and_gradients(net, X, y)
        for (dW, db), (nW, nb) in zip(grads, numeric_gradients(net, X, y)):
            for a, b in ((dW, nW), (db, nb)):
                rel = np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
                assert rel.max() <= 1e-5

    def test_smallest_probe(self):
        # 1 -> 1 -> 2, the smallest chain with a non-trivial softmax head
        net = ProbeNetwork([np.array([[0.7]]), np.array([[0.5], [-0.3]])], [np.array([0.1]), np.zeros(2)],
                           ["tanh", "softmax"])
        assert sum(p.size for p in net.parameters()) == 6
        X = np.array([[0.3], [-1.2], [2.0]])
        y = np.array([0, 1, 1])
        _, grads = nn.loss_and_gradients(net, X, y)
        for (dW, db), (nW, nb) in zip(grads, numeric_gradients(net, X, y)):
            np.testing.assert_allclose(dW, nW, rtol=1e-5, atol=1e-10)
            np.testing.assert_allclose(db, nb, rtol=1e-5, atol=1e-10)


class TestTraining:
    def setup_method(self):
        self.X, self.y = ds.synthetic_task(400, 6, 2, seed=0)

    def test_zero_lr_bitwise(self):
        net = nn.init_network([6, 5, 2], seed=0)
        before = [p.copy() for p in net.parameters()]
        nn.train_epoch(net, self.X, self.y, lr=0.0)
        for p, q in zip(before, net.parameters()):
            assert p.tobytes() == q.tobytes()

    def test_frozen_layer_unchanged(self):
        net = nn.init_network([6, 5, 4, 2], seed=1)
        net.freeze(1)
        W0, b0 = net.weights[0].copy(), net.biases[0].copy()
        W1 = net.weights[1].copy()
        for epoch in range(5):
            nn.train_epoch(net, self.X, self.y, lr=0.1, seed=epoch)
        assert W0.tobytes() == net.weights[0].tobytes()
        assert b0.tobytes() == net.biases[0].tobytes()
        assert not np.array_equal(W1, net.weights[1])

    def test_loss_decreases(self):
        X, y = ds.synthetic_task(2000, 20, 2, seed=0)
        net = nn.init_network([20, 16, 2], seed=0)
        losses = [nn.train_epoch(net, X, y, lr=0.1, seed=epoch) for epoch in range(5)]
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_deterministic_trajectory(self):
        nets = [nn.init_network([6, 5, 2], seed=3) for _ in range(2)]
        for net in nets:
            for epoch in range(3):
                nn.train_epoch(net, self.X, self.y, lr=0.05, batch=16, seed=epoch)
        for p, q in zip(*(n.parameters() for n in nets)):
            assert p.tobytes() == q.tobytes()

    def test_divergence_reports_batch(self):
        net = nn.init_network([6, 5, 2], seed=0)
        X = self.X.copy()
        X[self.X.shape[0] // 2] = np.nan
        with pytest.raises(TrainingError) as info:
            nn.train_epoch(net, X, self.y, lr=0.1, batch=50, seed=0)
        assert info.value.batch is not None and 0 <= info.value.batch < 8

    @pytest.mark.parametrize("kwargs", [{"lr": -1.0}, {"batch": 0}])
    def test_validation(self, kwargs):
        with pytest.raises(ParameterError):
            nn.train_epoch(nn.init_network([6, 2]), self.X, self.y, **kwargs)


class TestScaledSingleLayer:
    def test_zero_weight_constant(self):
        _, T = nn.scaled_single_layer(10, 0.0, n=50)
        assert np.all(T == 0.0)

    def test_tanh_saturates(self):
        _, T = nn.scaled_single_layer(10, 1e6, n=200)
        assert np.mean(np.abs(np.abs(T) - 1.0) < 1e-6) > 0.99

    def test_relu_is_scaled_copy(self):
        _, T1 = nn.scaled_single_layer(8, 1.0, "relu", n=40, seed=2)
        _, T5 = nn.scaled_single_layer(8, 5.0, "relu", n=40, seed=2)
        np.testing.assert_allclose(T5, 5.0 * T1, rtol=1e-14)

    def test_same_inputs_across_weights(self):
        X1, _ = nn.scaled_single_layer(6, 1.0, n=30, seed=4)
        X2, _ = nn.scaled_single_layer(6, 64.0, n=30, seed=4)
        np.testing.assert_array_equal(X1, X2)

    def test_output_width(self):
        X, T = nn.scaled_single_layer(6, 1.0, n=30, d_out=3)
        assert X.shape == (30, 6) and T.shape == (30, 3)


class TestSnapshot:
    def test_round_trip(self, tmp_path):
        net = nn.init_network([4, 3, 2], "relu", seed=9)
        net.freeze(1)
        nn.save_network(net, tmp_path / "n.bin")
        back = nn.load_network(tmp_path / "n.bin")
        assert back.dims == net.dims and back.frozen == net.frozen and back.seed == 9
        assert back.activations == net.activations
        for p, q in zip(net.parameters(), back.parameters()):
            assert p.tobytes() == q.tobytes()

    def test_layout(self, tmp_path):
        net = nn.init_network([2, 3], seed=1)
        nn.save_network(net, tmp_path / "n.bin")
        raw = (tmp_path / "n.bin").read_bytes()
        header = 4 + 4 + 4 + 8 + 4 * 2 + 1 + 1
        assert raw[:4] == b"LDPN"
        assert len(raw) == header + 8 * (6 + 3)
        np.testing.assert_array_equal(np.frombuffer(raw, "<f8", 6, header).reshape(3, 2), net.weights[0])

    def test_bad_magic(self, tmp_path):
        (tmp_path / "n.bin").write_bytes(b"XXXX" + bytes(40))
        with pytest.raises(FormatError, match="magic"):
            nn.load_network(tmp_path / "n.bin")

    def test_truncated(self, tmp_path):
        nn.save_network(nn.init_network([4, 3, 2]), tmp_path / "n.bin")
        raw = (tmp_path / "n.bin").read_bytes()
        (tmp_path / "n.bin").write_bytes(raw[:-8])
        with pytest.raises(FormatError, match="truncated"):
            nn.load_network(tmp_path / "n.bin")

    def test_unknown_activation(self, tmp_path):
        nn.save_network(nn.init_network([4, 2]), tmp_path / "n.bin")
        raw = bytearray((tmp_path / "n.bin").read_bytes())
        raw[4 + 4 + 4 + 8 + 8] = 9
        (tmp_path / "n.bin").write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="activation"):
            nn.load_network(tmp_path / "n.bin")
