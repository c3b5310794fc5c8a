"""Comparison entropy estimators and a uniform interface over all methods.

``renyi_entropy`` reports bits (its defining formula uses log2); every other
estimator reports nats. Comparison curves are min-max normalised downstream,
so the unit difference does not affect them.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma, gammaln, logsumexp

from . import matkit
from .errors import ParameterError
from .estimator import EstimatorConfig, entropy as logdet_entropy

log = logging.getLogger(__name__)

JITTER_SCALE = 1e-10


class Method(str, enum.Enum):
    LOGDET = "logdet"
    RENYI = "renyi"
    KNN = "knn"
    KDE = "kde"
    BIN = "bin"


def pairwise_sq_dists(X):
    """Squared Euclidean distances, clipped at zero, exact zeros on the diagonal."""
    sq = np.einsum("ij,ij->i", X, X)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def median_distance(X):
    X = matkit.as_sample_matrix(X)
    n = X.shape[0]
    if n < 2:
        return 0.0
    D = pairwise_sq_dists(X)
    iu = np.triu_indices(n, k=1)
    return float(np.sqrt(np.median(D[iu])))


def _renyi_kernel(X, sigma, gamma):
    X = matkit.as_sample_matrix(X)
    if X.shape[0] < 2:
        raise ParameterError("renyi_entropy needs at least two samples")
    D = pairwise_sq_dists(X)
    if sigma is None:
        iu = np.triu_indices(X.shape[0], k=1)
        sigma = gamma * float(np.sqrt(np.median(D[iu])))
    if sigma < 0:
        raise ParameterError(f"kernel width must be non-negative, got {sigma}")
    if sigma == 0.0:
        # zero-width limit: only coincident samples are similar
        return (D == 0.0).astype(np.float64)
    return np.exp(-D / (2.0 * sigma**2))


def _renyi_from_kernel(K, alpha):
    A = K / np.trace(K)
    lam = matkit.eigenvalues_sym(0.5 * (A + A.T)).eigenvalues
    lam = lam[lam > 0.0]
    return float(np.log2(np.sum(lam**alpha)) / (1.0 - alpha))


def _check_alpha(alpha):
    if not alpha > 0 or alpha == 1:
        raise ParameterError(f"alpha must be positive and different from 1, got {alpha}")


def renyi_entropy(X, alpha=1.01, sigma=None, gamma=1.0):
    """Matrix-based Renyi alpha-entropy of a Gaussian-kernel Gram matrix, in bits.

    ``sigma=None`` selects ``gamma`` times the median pairwise distance.
    """
    _check_alpha(alpha)
    (X,) = matkit.canonical_rows(matkit.as_sample_matrix(X))
    return _renyi_from_kernel(_renyi_kernel(X, sigma, gamma), alpha)


def renyi_mutual_information(X, Y, alpha=1.01, sigma_x=None, sigma_y=None, gamma=1.0):
    """Matrix-based Renyi MI, joint entropy from the Hadamard product of Grams."""
    _check_alpha(alpha)
    X = matkit.as_sample_matrix(X, "X")
    Y = matkit.as_sample_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ParameterError("X and Y must share the sample count")
    X, Y = matkit.canonical_rows(X, Y)
    Kx = _renyi_kernel(X, sigma_x, gamma)
    Ky = _renyi_kernel(Y, sigma_y, gamma)
    return _renyi_from_kernel(Kx, alpha) + _renyi_from_kernel(Ky, alpha) - _renyi_from_kernel(Kx * Ky, alpha)


def log_unit_ball_volume(d):
    return 0.5 * d * math.log(math.pi) - float(gammaln(0.5 * d + 1.0))


def _knn_entropy(X, k, jitter, seed):
    (X,) = matkit.canonical_rows(matkit.as_sample_matrix(X))
    n, d = X.shape
    if not (1 <= k < n):
        raise ParameterError(f"k must satisfy 1 <= k < n, got k={k}, n={n}")
    dist = cKDTree(X).query(X, k=k + 1)[0][:, k]
    jittered = False
    if np.any(dist == 0.0):
        if not jitter:
            raise ParameterError("duplicate points give zero neighbour distance; enable jitter")
        scale = JITTER_SCALE * max(1.0, float(np.max(np.abs(X))))
        rng = np.random.Generator(np.random.Philox(seed))
        X = X + rng.uniform(-scale, scale, size=X.shape)
        dist = cKDTree(X).query(X, k=k + 1)[0][:, k]
        jittered = True
        log.info("knn_entropy: duplicate samples jittered at scale %.1e", scale)
    value = float(digamma(n) - digamma(k) + log_unit_ball_volume(d) + d * np.mean(np.log(dist)))
    return value, jittered


def knn_entropy(X, k=3, jitter=True, seed=0):
    """Kozachenko-Leonenko nearest-neighbour differential entropy, in nats."""
    return _knn_entropy(X, k, jitter, seed)[0]


def kde_entropy(X, sigma=1.0):
    """Resubstitution entropy of a Gaussian mixture centred on the samples, in nats.

    An upper bound on the mixture entropy (pairwise-distance KL bound).
    """
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    (X,) = matkit.canonical_rows(matkit.as_sample_matrix(X))
    n, d = X.shape
    D = pairwise_sq_dists(X)
    lse = logsumexp(-D / (2.0 * sigma**2), axis=1) - math.log(n)
    return float(-np.mean(lse) + 0.5 * d * math.log(2.0 * math.pi * sigma**2))


def bin_patterns(X, bins=30, lo=-1.0, hi=1.0):
    if bins < 1:
        raise ParameterError(f"bins must be >= 1, got {bins}")
    if not lo < hi:
        raise ParameterError(f"need lo < hi, got [{lo}, {hi}]")
    X = matkit.as_sample_matrix(X)
    idx = np.floor((X - lo) / (hi - lo) * bins)
    return np.clip(idx, 0, bins - 1).astype(np.int64)


def bin_entropy(X, bins=30, lo=-1.0, hi=1.0):
    """Plug-in Shannon entropy of the per-sample bin patterns, in nats."""
    patterns = bin_patterns(X, bins, lo, hi)
    _, counts = np.unique(patterns, axis=0, return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)))


@dataclass(frozen=True)
class EstimatorKind:
    """An estimator tag plus its parameters; validated on construction."""

    tag: Method
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "tag", Method(self.tag))
        p = self.params
        if self.tag is Method.RENYI:
            _check_alpha(p.get("alpha", 1.01))
            if p.get("sigma") is not None and not p["sigma"] > 0:
                raise ParameterError("renyi sigma must be positive")
        elif self.tag is Method.KNN:
            if int(p.get("k", 3)) < 1:
                raise ParameterError("knn k must be >= 1")
        elif self.tag is Method.KDE:
            if not p.get("sigma", 1.0) > 0:
                raise ParameterError("kde sigma must be positive")
        elif self.tag is Method.BIN:
            if int(p.get("bins", 30)) < 1:
                raise ParameterError("bin count must be >= 1")
            if not p.get("lo", -1.0) < p.get("hi", 1.0):
                raise ParameterError("bin range needs lo < hi")

    @property
    def unit(self):
        return "bits" if self.tag is Method.RENYI else "nats"


@dataclass(frozen=True)
class EntropyEstimate:
    method: Method
    value: float
    unit: str
    meta: dict = field(default_factory=dict)


def estimate_entropy(kind, X, cfg=None):
    """Run any estimator on ``X`` through one call signature."""
    if not isinstance(kind, EstimatorKind):
        kind = EstimatorKind(kind)
    p = kind.params
    meta = {}
    if kind.tag is Method.LOGDET:
        res = logdet_entropy(X, cfg or EstimatorConfig(**p))
        value = res.value
        meta = {"beta": res.beta_used, "rank_hint": res.rank_hint}
    elif kind.tag is Method.RENYI:
        value = renyi_entropy(X, p.get("alpha", 1.01), p.get("sigma"), p.get("gamma", 1.0))
    elif kind.tag is Method.KNN:
        value, jittered = _knn_entropy(X, int(p.get("k", 3)), p.get("jitter", True), p.get("seed", 0))
        meta = {"jittered": jittered}
    elif kind.tag is Method.KDE:
        value = kde_entropy(X, p.get("sigma", 1.0))
    else:
        value = bin_entropy(X, int(p.get("bins", 30)), p.get("lo", -1.0), p.get("hi", 1.0))
    return EntropyEstimate(kind.tag, value, kind.unit, meta)
