import gzip
import math
import os
import struct
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from logdet import datasets as ds
from logdet import nn_probe
from logdet.datasets import GaussianKind, GaussianSpec, ImageSet, Source
from logdet.errors import FormatError, ParameterError


def fake_images(n=60, d=784, seed=0, classes=10):
    g = ds.rng(seed)
    return ImageSet(g.uniform(0, 1, (n, d)), np.arange(n) % classes, Source.MNIST)


class TestGaussianSpec:
    @pytest.mark.parametrize("d,rho", [(2, -1.0), (3, -0.5), (11, -0.1), (5, 1.0), (5, 0.0)])
    def test_equicorrelated_valid(self, d, rho):
        GaussianSpec(d, 10, "equicorrelated", rho)

    @pytest.mark.parametrize("d,rho", [(3, -0.51), (11, -0.11), (4, 1.01)])
    def test_equicorrelated_not_psd(self, d, rho):
        with pytest.raises(ParameterError, match="non-PSD"):
            GaussianSpec(d, 10, "equicorrelated", rho)

    @pytest.mark.parametrize("kind,param", [("paired", 1.5), ("paired", -1.01), ("independent", -0.1)])
    def test_param_range(self, kind, param):
        with pytest.raises(ParameterError):
            GaussianSpec(3, 10, kind, param)

    @pytest.mark.parametrize("d,n", [(0, 5), (3, 0)])
    def test_sizes(self, d, n):
        with pytest.raises(ParameterError):
            GaussianSpec(d, n, "independent", 1.0)


class TestSampleGaussian:
    def test_paired_rho_one(self):
        X, Y = ds.sample_gaussian(GaussianSpec(4, 50, "paired", 1.0, seed=3))
        np.testing.assert_array_equal(X, Y)

    def test_paired_rho_zero(self):
        X, Y = ds.sample_gaussian(GaussianSpec(3, 10_000, "paired", 0.0, seed=4))
        cross = (X - X.mean(0)).T @ (Y - Y.mean(0)) / len(X)
        assert np.max(np.abs(cross)) <= 0.05

    @pytest.mark.parametrize("rho", [-0.7, 0.3, 0.9])
    def test_paired_moments(self, rho):
        X, Y = ds.sample_gaussian(GaussianSpec(3, 10_000, "paired", rho, seed=5))
        C = np.cov(np.hstack([X, Y]).T)
        np.testing.assert_allclose(C[:3, 3:], rho * np.eye(3), atol=0.05)
        np.testing.assert_allclose(C[3:, 3:], np.eye(3), atol=0.05)
        np.testing.assert_allclose(C[:3, :3], np.eye(3), atol=0.05)

    @pytest.mark.parametrize("d", [1, 3, 20])
    def test_equicorrelated_rho_one_rank_one(self, d):
        X = ds.sample_gaussian(GaussianSpec(d, 30, "equicorrelated", 1.0, seed=6))
        np.testing.assert_allclose(X, np.repeat(X[:, :1], d, axis=1), rtol=1e-12, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 30), st.floats(0.0, 1.0))
    def test_equicorrelated_sqrt_squares_to_covariance(self, d, frac):
        lo = -1.0 / (d - 1) if d > 1 else -1.0
        rho = lo + frac * (1.0 - lo)
        a, c = ds.equicorrelated_sqrt_coeffs(d, rho)
        S = a * np.eye(d) + c * np.ones((d, d))
        target = (1 - rho) * np.eye(d) + rho * np.ones((d, d))
        np.testing.assert_allclose(S @ S, target, atol=1e-12)

    def test_independent_variance(self):
        X = ds.sample_gaussian(GaussianSpec(5, 20_000, "independent", 0.25, seed=7))
        np.testing.assert_allclose(X.var(axis=0), 0.25, rtol=0.05)

    @pytest.mark.parametrize("kind,param", [("independent", 2.0), ("equicorrelated", 0.4), ("paired", 0.4)])
    def test_bit_reproducible(self, kind, param):
        a = ds.sample_gaussian(GaussianSpec(4, 20, kind, param, seed=9))
        b = ds.sample_gaussian(GaussianSpec(4, 20, kind, param, seed=9))
        np.testing.assert_array_equal(np.asarray(a), np.asarray(b))


class TestIDX:
    def test_round_trip(self, tmp_path):
        g = ds.rng(1)
        imgs = g.integers(0, 256, (9, 784), dtype=np.uint8)
        labels = g.integers(0, 10, 9)
        ds.write_idx_images(tmp_path / "i", imgs)
        ds.write_idx_labels(tmp_path / "l", labels)
        np.testing.assert_array_equal(ds.read_idx_images(tmp_path / "i"), imgs)
        np.testing.assert_array_equal(ds.read_idx_labels(tmp_path / "l"), labels)

    def test_header_bytes(self, tmp_path):
        ds.write_idx_images(tmp_path / "i", np.zeros((2, 784), dtype=np.uint8))
        raw = (tmp_path / "i").read_bytes()
        assert raw[:16] == bytes.fromhex("00000803 00000002 0000001c 0000001c")

    def test_label_magic_on_image_file(self, tmp_path):
        ds.write_idx_labels(tmp_path / "l", [1, 2])
        with pytest.raises(FormatError, match="magic 0x00000801") as info:
            ds.read_idx_images(tmp_path / "l")
        assert info.value.offset == 0

    def test_truncated_images(self, tmp_path):
        ds.write_idx_images(tmp_path / "i", np.zeros((3, 784), dtype=np.uint8))
        raw = (tmp_path / "i").read_bytes()
        (tmp_path / "i").write_bytes(raw[:-5])
        with pytest.raises(FormatError, match="truncated") as info:
            ds.read_idx_images(tmp_path / "i")
        assert info.value.offset == len(raw) - 5

    def test_label_out_of_range_offset(self, tmp_path):
        (tmp_path / "l").write_bytes(struct.pack(">II", 0x801, 4) + bytes([1, 2, 12, 3]))
        with pytest.raises(FormatError, match="out of range") as info:
            ds.read_idx_labels(tmp_path / "l")
        assert info.value.offset == 10

    def test_gzip_fallback(self, tmp_path):
        ds.write_idx_labels(tmp_path / "l", [4, 5, 6])
        raw = (tmp_path / "l").read_bytes()
        (tmp_path / "l").unlink()
        with gzip.open(tmp_path / "l.gz", "wb") as fh:
            fh.write(raw)
        np.testing.assert_array_equal(ds.read_idx_labels(tmp_path / "l"), [4, 5, 6])

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="missing dataset file"):
            ds.read_idx_labels(tmp_path / "nope")

    def test_load_mnist_scales_pixels(self, tmp_path):
        imgs = np.array([[0] * 783 + [255], [128] * 784], dtype=np.uint8)
        files = ds.MNIST_FILES["test"]
        ds.write_idx_images(tmp_path / files[0], imgs)
        ds.write_idx_labels(tmp_path / files[1], [3, 7])
        s = ds.load_mnist(tmp_path, "test")
        assert s.images.shape == (2, 784)
        assert s.images.min() == 0.0 and s.images.max() == 1.0
        assert s.images[1, 0] == 128 / 255
        assert s.source is Source.MNIST

    def test_bad_split(self, tmp_path):
        with pytest.raises(ParameterError):
            ds.load_mnist(tmp_path, "validation")

    @pytest.mark.skipif(not os.environ.get("LOGDET_MNIST_DIR"), reason="needs the canonical MNIST files")
    def test_first_canonical_label(self):
        path = Path(os.environ["LOGDET_MNIST_DIR"]) / ds.MNIST_FILES["train"][1]
        raw = gzip.open(str(path) + ".gz").read() if not path.exists() else path.read_bytes()
        assert raw[8] == 5
        assert ds.load_mnist(os.environ["LOGDET_MNIST_DIR"]).labels[0] == 5


class TestCIFAR:
    def test_record_arithmetic(self, tmp_path):
        g = ds.rng(2)
        pix = g.integers(0, 256, (10_000, 3072), dtype=np.uint8)
        labels = g.integers(0, 10, 10_000)
        ds.write_cifar_batch(tmp_path / "b.bin", pix, labels)
        assert (tmp_path / "b.bin").stat().st_size == 10_000 * 3073
        p2, l2 = ds.read_cifar_batch(tmp_path / "b.bin")
        assert p2.shape == (10_000, 3072)
        np.testing.assert_array_equal(l2, labels)
        np.testing.assert_array_equal(p2, pix)

    def test_truncated(self, tmp_path):
        (tmp_path / "b.bin").write_bytes(bytes(3073 * 2 + 100))
        with pytest.raises(FormatError, match="truncated") as info:
            ds.read_cifar_batch(tmp_path / "b.bin")
        assert info.value.offset == 3073 * 2

    def test_bad_label_offset(self, tmp_path):
        rec = np.zeros((3, 3073), dtype=np.uint8)
        rec[2, 0] = 10
        (tmp_path / "b.bin").write_bytes(rec.tobytes())
        with pytest.raises(FormatError) as info:
            ds.read_cifar_batch(tmp_path / "b.bin")
        assert info.value.offset == 2 * 3073

    def test_directory_load(self, tmp_path):
        pix = np.full((2, 3072), 51, dtype=np.uint8)
        ds.write_cifar_batch(tmp_path / "data_batch_1.bin", pix, [0, 9])
        ds.write_cifar_batch(tmp_path / "data_batch_3.bin", pix, [4, 4])
        s = ds.load_cifar10(tmp_path)
        np.testing.assert_array_equal(s.labels, [0, 9, 4, 4])
        assert s.images.shape == (4, 3072)
        assert np.all(s.images == 0.2)

    def test_directory_without_batches(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ds.load_cifar10(tmp_path, "test")


class TestSubstitutionSeries:
    def test_endpoints(self):
        images = fake_images()
        series = ds.class_substitution_series(images, 3, n_total=40, steps=5, seed=1)
        assert len(series) == 5
        assert len(set(series.labels[0].tolist())) > 1
        assert np.all(series.labels[-1] == 3)
        assert series.fractions == [0.0, 0.25, 0.5, 0.75, 1.0]

    def test_fraction_of_target_rows(self):
        images = fake_images(n=200, classes=4)
        series = ds.class_substitution_series(images, 2, n_total=100, steps=11, seed=2)
        for t, labels in enumerate(series.labels):
            assert np.sum(labels == 2) >= 10 * t

    def test_nested_steps(self):
        images = fake_images()
        s = ds.class_substitution_series(images, 1, n_total=40, steps=5, seed=3)
        # rows not yet replaced are identical to the base draw
        for t in range(1, 5):
            m = 10 * t
            np.testing.assert_array_equal(s[t][m:], s[0][m:])

    def test_noise_variance(self):
        images = fake_images(n=200, d=784)
        clean = ds.class_substitution_series(images, 0, n_total=150, steps=2, seed=4)
        noisy = ds.class_substitution_series(images, 0, n_total=150, steps=2, noise_sigma=0.6, seed=4)
        diff = noisy[0] - clean[0]
        assert diff.size > 10**5
        assert diff.var() == pytest.approx(0.36, abs=0.02)

    def test_variance_mode(self):
        images = fake_images(n=200)
        clean = ds.class_substitution_series(images, 0, n_total=150, steps=2, seed=4)
        noisy = ds.class_substitution_series(images, 0, n_total=150, steps=2, noise_sigma=0.36, seed=4,
                                             noise_mode="variance")
        assert (noisy[1] - clean[1]).var() == pytest.approx(0.36, abs=0.02)
        assert noisy.meta["noise_std"] == pytest.approx(0.6)

    def test_replacement_fallback_metadata(self):
        images = fake_images(n=60)
        assert ds.class_substitution_series(images, 0, n_total=5, steps=2).meta["with_replacement"] is False
        s = ds.class_substitution_series(images, 0, n_total=50, steps=2)
        assert s.meta["with_replacement"] is True
        assert np.all(s.labels[-1] == 0)

    def test_deterministic(self):
        images = fake_images()
        a = ds.class_substitution_series(images, 5, n_total=30, steps=3, noise_sigma=0.2, seed=8)
        b = ds.class_substitution_series(images, 5, n_total=30, steps=3, noise_sigma=0.2, seed=8)
        for x, y in zip(a.sets, b.sets):
            np.testing.assert_array_equal(x, y)

    @pytest.mark.parametrize("kwargs", [{"steps": 1}, {"noise_sigma": -0.1}, {"noise_mode": "snr"},
                                        {"n_total": 1000}, {"target_class": 11}])
    def test_validation(self, kwargs):
        args = {"target_class": 0, "n_total": 10, "steps": 3, **kwargs}
        with pytest.raises(ParameterError):
            ds.class_substitution_series(fake_images(), **args)


class TestSyntheticTask:
    def test_deterministic_bytes(self):
        a = ds.synthetic_task(100, 5, 3, seed=4)
        b = ds.synthetic_task(100, 5, 3, seed=4)
        assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()

    @pytest.mark.parametrize("classes", [2, 3, 10])
    def test_balanced(self, classes):
        _, y = ds.synthetic_task(100 * classes, 4, classes, seed=1)
        np.testing.assert_array_equal(np.bincount(y), [100] * classes)

    @pytest.mark.parametrize("classes,d", [(2, 5), (10, 20), (5, 2)])
    def test_means_separated(self, classes, d):
        X, y = ds.synthetic_task(20_000, d, classes, seed=2)
        means = np.stack([X[y == k].mean(0) for k in range(classes)])
        dist = np.sqrt(((means[:, None] - means[None]) ** 2).sum(-1))
        assert dist[np.triu_indices(classes, 1)].min() >= 3.0 - 0.15

    def test_requires_two_classes(self):
        with pytest.raises(ParameterError):
            ds.synthetic_task(10, 2, 1)

    def test_bayes_error_two_classes(self):
        X, y = ds.synthetic_task(10_000, 2, 2, seed=0)
        net = nn_probe.init_network([2, 2], seed=0)
        for epoch in range(10):
            nn_probe.train_epoch(net, X, y, lr=0.1, batch=64, seed=epoch)
        err = 1.0 - nn_probe.accuracy(net, X, y)
        bayes = norm.cdf(-1.5)
        assert bayes == pytest.approx(0.0668, abs=1e-4)
        assert abs(err - bayes) <= 0.02

    def test_linear_probe_high_accuracy(self):
        X, y = ds.synthetic_task(4000, 10, 2, seed=0)
        net = nn_probe.init_network([10, 2], seed=0)
        for epoch in range(5):
            nn_probe.train_epoch(net, X, y, lr=0.1, batch=64, seed=epoch)
        assert nn_probe.accuracy(net, X, y) > 0.9
        assert math.isfinite(nn_probe.cross_entropy(nn_probe.forward(net, X).output, y))
