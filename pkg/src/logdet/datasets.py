"""Synthetic Gaussian generators, MNIST/CIFAR-10 readers, the
class-substitution series, and a small synthetic classification task.

Random streams come from numpy's counter-based Philox bit generator seeded
with the caller's 64-bit seed (``rng(seed)``), so every generator is
bit-reproducible given its arguments.
"""

from __future__ import annotations

import enum
import gzip
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073
CIFAR_PIXELS = 3072
MNIST_PIXELS = 784


def rng(seed):
    """Philox-backed generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


class GaussianKind(str, enum.Enum):
    INDEPENDENT = "independent"
    EQUICORRELATED = "equicorrelated"
    PAIRED = "paired"


@dataclass(frozen=True)
class GaussianSpec:
    """``param`` is the variance for INDEPENDENT and the correlation otherwise."""

    d: int
    n: int
    kind: GaussianKind
    param: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", GaussianKind(self.kind))
        if self.d < 1 or self.n < 1:
            raise ParameterError(f"need d >= 1 and n >= 1, got d={self.d}, n={self.n}")
        if self.kind is GaussianKind.INDEPENDENT:
            if self.param < 0:
                raise ParameterError(f"variance must be non-negative, got {self.param}")
        elif self.kind is GaussianKind.EQUICORRELATED:
            lo = -1.0 / (self.d - 1) if self.d > 1 else -1.0
            if not lo <= self.param <= 1.0:
                raise ParameterError(
                    f"equicorrelation {self.param} gives a non-PSD covariance for d={self.d}; need [{lo:.4g}, 1]"
                )
        elif not -1.0 <= self.param <= 1.0:
            raise ParameterError(f"paired correlation must lie in [-1, 1], got {self.param}")


def equicorrelated_sqrt_coeffs(d, rho):
    """``(a, c)`` with ``(a I + c 11^T)^2 = (1 - rho) I + rho 11^T``."""
    a = math.sqrt(max(1.0 - rho, 0.0))
    c = (math.sqrt(max(1.0 - rho + rho * d, 0.0)) - a) / d
    return a, c


def sample_gaussian(spec):
    """Draw samples for ``spec``; PAIRED returns ``(X, Y)``.

    INDEPENDENT: ``X = sqrt(var) Z``. EQUICORRELATED: ``X = Z S`` with ``S``
    the symmetric square root of the unit-variance equicorrelated covariance.
    PAIRED: ``Y = rho X + sqrt(1 - rho^2) W``. ``Z`` (then ``W``) are drawn
    first from the stream, so sweeping the parameter at a fixed seed reuses
    the same underlying normals.
    """
    g = rng(spec.seed)
    Z = g.standard_normal((spec.n, spec.d))
    if spec.kind is GaussianKind.INDEPENDENT:
        return math.sqrt(spec.param) * Z
    if spec.kind is GaussianKind.EQUICORRELATED:
        a, c = equicorrelated_sqrt_coeffs(spec.d, spec.param)
        return a * Z + c * Z.sum(axis=1, keepdims=True)
    W = g.standard_normal((spec.n, spec.d))
    rho = spec.param
    return Z, rho * Z + math.sqrt(max(1.0 - rho * rho, 0.0)) * W


class Source(str, enum.Enum):
    MNIST = "mnist"
    CIFAR10 = "cifar10"


@dataclass
class ImageSet:
    images: np.ndarray
    labels: np.ndarray
    source: Source

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise FormatError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)


def _read_bytes(path):
    path = Path(path)
    if not path.exists() and Path(str(path) + ".gz").exists():
        path = Path(str(path) + ".gz")
    if not path.exists():
        raise FileNotFoundError(f"missing dataset file {path} (also tried {path.name}.gz)")
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read(), path


def _check_magic(raw, expected, what, path):
    if len(raw) < 4:
        raise FormatError(f"truncated IDX {what} header", path, len(raw))
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected:
        raise FormatError(f"bad IDX {what} magic 0x{magic:08x}, expected 0x{expected:08x}", path, 0)


def read_idx_images(path):
    """Images from an IDX3 file as a uint8 array ``(n, rows * cols)``."""
    raw, path = _read_bytes(path)
    _check_magic(raw, IDX_IMAGES_MAGIC, "image", path)
    if len(raw) < 16:
        raise FormatError("truncated IDX image header", path, len(raw))
    _, n, rows, cols = struct.unpack(">IIII", raw[:16])
    need = 16 + n * rows * cols
    if len(raw) < need:
        raise FormatError(f"truncated IDX image data: need {need} bytes, have {len(raw)}", path, len(raw))
    return np.frombuffer(raw, dtype=np.uint8, count=n * rows * cols, offset=16).reshape(n, rows * cols)


def read_idx_labels(path):
    raw, path = _read_bytes(path)
    _check_magic(raw, IDX_LABELS_MAGIC, "label", path)
    if len(raw) < 8:
        raise FormatError("truncated IDX label header", path, len(raw))
    (n,) = struct.unpack(">I", raw[4:8])
    if len(raw) < 8 + n:
        raise FormatError(f"truncated IDX label data: need {8 + n} bytes, have {len(raw)}", path, len(raw))
    labels = np.frombuffer(raw, dtype=np.uint8, count=n, offset=8)
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise FormatError(f"label {labels[bad[0]]} out of range [0, 9]", path, 8 + int(bad[0]))
    return labels.astype(np.int64)


def write_idx_images(path, images, rows=28, cols=28):
    images = np.asarray(images, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, len(images), rows, cols))
        fh.write(images.reshape(len(images), rows * cols).tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        fh.write(labels.tobytes())


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def load_mnist(path, split="train"):
    """MNIST from a directory holding the standard IDX files (optionally gzipped)."""
    if split not in MNIST_FILES:
        raise ParameterError(f"split must be 'train' or 'test', got {split!r}")
    img_name, lbl_name = MNIST_FILES[split]
    images = read_idx_images(os.path.join(path, img_name))
    labels = read_idx_labels(os.path.join(path, lbl_name))
    if images.shape[1] != MNIST_PIXELS:
        raise FormatError(f"MNIST images must have {MNIST_PIXELS} pixels, got {images.shape[1]}", img_name, 8)
    return ImageSet(images.astype(np.float64) / 255.0, labels, Source.MNIST)


def read_cifar_batch(path):
    """``(pixels uint8 (n, 3072), labels)`` from one CIFAR-10 binary batch."""
    raw, path = _read_bytes(path)
    if len(raw) % CIFAR_RECORD_BYTES:
        whole = len(raw) // CIFAR_RECORD_BYTES * CIFAR_RECORD_BYTES
        raise FormatError(
            f"truncated CIFAR-10 batch: {len(raw)} bytes is not a multiple of {CIFAR_RECORD_BYTES}", path, whole
        )
    rec = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
    labels = rec[:, 0].astype(np.int64)
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise FormatError(f"label {labels[bad[0]]} out of range [0, 9]", path, int(bad[0]) * CIFAR_RECORD_BYTES)
    return rec[:, 1:], labels


def write_cifar_batch(path, pixels, labels):
    rec = np.empty((len(labels), CIFAR_RECORD_BYTES), dtype=np.uint8)
    rec[:, 0] = labels
    rec[:, 1:] = pixels
    with open(path, "wb") as fh:
        fh.write(rec.tobytes())


CIFAR_TRAIN = [f"data_batch_{i}.bin" for i in range(1, 6)]
CIFAR_TEST = ["test_batch.bin"]


def load_cifar10(path, split="train"):
    """CIFAR-10 from a single batch file or a directory of ``*.bin`` batches.

    A directory is read batch by batch in canonical order, skipping absent
    batches; at least one must be present.
    """
    path = Path(path)
    if path.is_file():
        files = [path]
    else:
        names = {"train": CIFAR_TRAIN, "test": CIFAR_TEST}.get(split)
        if names is None:
            raise ParameterError(f"split must be 'train' or 'test', got {split!r}")
        files = [path / f for f in names if (path / f).exists()]
        if not files:
            raise FileNotFoundError(f"no CIFAR-10 binary batches ({', '.join(names)}) under {path}")
    pix, lab = zip(*(read_cifar_batch(f) for f in files))
    return ImageSet(np.concatenate(pix).astype(np.float64) / 255.0, np.concatenate(lab), Source.CIFAR10)


@dataclass
class SubstitutionSeries:
    sets: list
    labels: list
    fractions: list
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.sets)

    def __getitem__(self, t):
        return self.sets[t]


def class_substitution_series(images, target_class, n_total=1000, steps=11, noise_sigma=0.0, seed=0,
                              noise_mode="std"):
    """Sample sets sliding from mixed classes to a single ``target_class``.

    A mixed base draw and a single-class draw are made once; step ``t``
    replaces the first ``round(n_total * t / (steps - 1))`` rows of the base
    with single-class rows. One noise field is drawn and added to every step.
    ``noise_mode="std"`` takes ``noise_sigma`` as the standard deviation,
    ``"variance"`` as the variance.
    """
    if steps < 2:
        raise ParameterError(f"steps must be >= 2, got {steps}")
    if noise_mode not in ("std", "variance"):
        raise ParameterError(f"noise_mode must be 'std' or 'variance', got {noise_mode!r}")
    if noise_sigma < 0:
        raise ParameterError(f"noise level must be non-negative, got {noise_sigma}")
    X, y = images.images, images.labels
    if n_total > len(y):
        raise ParameterError(f"n_total={n_total} exceeds the {len(y)} available samples")
    g = rng(seed)
    base = g.permutation(len(y))[:n_total]
    pool = np.flatnonzero(y == target_class)
    if pool.size == 0:
        raise ParameterError(f"class {target_class} has no samples")
    replace = pool.size < n_total
    single = g.choice(pool, size=n_total, replace=replace) if replace else g.permutation(pool)[:n_total]
    std = math.sqrt(noise_sigma) if noise_mode == "variance" else float(noise_sigma)
    noise = std * g.standard_normal((n_total, X.shape[1])) if std > 0 else None
    sets, labels, fractions = [], [], []
    for t in range(steps):
        m = int(round(n_total * t / (steps - 1)))
        idx = np.concatenate([single[:m], base[m:]])
        S = X[idx]
        if noise is not None:
            S = S + noise
        sets.append(S)
        labels.append(y[idx])
        fractions.append(t / (steps - 1))
    meta = {"with_replacement": bool(replace), "target_class": int(target_class), "noise_std": std}
    return SubstitutionSeries(sets, labels, fractions, meta)


def synthetic_task(n, d, classes, seed=0, min_separation=3.0):
    """Balanced Gaussian clusters with unit within-class covariance.

    Class means are random directions scaled and rejection-sampled until all
    pairwise distances are at least ``min_separation``; with two classes the
    means sit exactly ``min_separation`` apart.
    """
    if classes < 2:
        raise ParameterError(f"classes must be >= 2, got {classes}")
    g = rng(seed)
    if classes == 2:
        u = g.standard_normal(d)
        u /= np.linalg.norm(u)
        means = np.stack([-0.5 * min_separation * u, 0.5 * min_separation * u])
    else:
        radius = min_separation
        while True:
            means = radius * g.standard_normal((classes, d)) / math.sqrt(d)
            diff = means[:, None, :] - means[None, :, :]
            dist = np.sqrt((diff**2).sum(-1))
            if np.min(dist[np.triu_indices(classes, 1)]) >= min_separation:
                break
            radius *= 1.05
    labels = np.arange(n) % classes
    labels = labels[g.permutation(n)]
    X = means[labels] + g.standard_normal((n, d))
    return X, labels
