"""LogDet entropy and the information measures built on it.

For samples ``X`` (n x d) the estimator is

    H_D(X) = 1/2 log det(I + beta * Xc^T Xc / n)

evaluated through the eigenvalues of whichever of the d x d covariance or the
n x n Gram matrix is smaller; both share their nonzero spectrum. ``beta``
defaults to ``d / epsilon**2`` where ``d`` is the total feature dimension of
the quantity being estimated, so with ``epsilon = 0.1`` a mutual information
between blocks of widths d1 and d2 uses ``beta = 100 * (d1 + d2)``. Every term
of a conditional entropy or mutual information shares that one ``beta``.

All values are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matkit
from .errors import ParameterError, ShapeError


@dataclass(frozen=True)
class EstimatorConfig:
    epsilon: float = 0.1
    beta_override: float | None = None
    center: bool = True
    psd_tol: float = matkit.DEFAULT_PSD_TOL

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.beta_override is not None and not self.beta_override > 0:
            raise ParameterError(f"beta must be positive, got {self.beta_override}")
        if not self.psd_tol >= 0:
            raise ParameterError(f"psd_tol must be non-negative, got {self.psd_tol}")

    def beta_for(self, dim):
        """Scaling parameter for an estimate over ``dim`` total features."""
        if self.beta_override is not None:
            return float(self.beta_override)
        return dim / self.epsilon**2


DEFAULT_CONFIG = EstimatorConfig()


@dataclass(frozen=True)
class EntropyResult:
    value: float
    beta_used: float
    rank_hint: int

    def __float__(self):
        return self.value


def _result(spec, beta):
    lam = spec.eigenvalues
    return EntropyResult(matkit.logdet_shifted(spec, beta), beta, int(np.sum(beta * lam > 1.0)))


def _validated_list(Xs):
    if len(Xs) == 0:
        raise ShapeError("need at least one sample matrix")
    mats = [matkit.as_sample_matrix(X, name=f"X[{i}]") for i, X in enumerate(Xs)]
    n = mats[0].shape[0]
    for i, X in enumerate(mats):
        if X.shape[0] != n:
            raise ShapeError(f"all inputs must share the sample count: X[0] has {n} rows, X[{i}] has {X.shape[0]}")
    return mats


def _joint_at(mats, beta, cfg, route="auto"):
    n = mats[0].shape[0]
    total = sum(X.shape[1] for X in mats)
    mats = matkit.canonical_rows(*mats)
    if cfg.center:
        mats = [matkit.center_columns(X) for X in mats]
    if route == "auto":
        route = "covariance" if total <= n else "gram"
    if route == "covariance":
        Z = np.hstack(mats) if len(mats) > 1 else mats[0]
        M = Z.T @ Z / n
    elif route == "gram":
        # sum of per-signal Grams; the block covariance is never formed
        M = np.zeros((n, n))
        for X in mats:
            M += X @ X.T
        M /= n
    else:
        raise ValueError(f"unknown route {route!r}")
    M = 0.5 * (M + M.T)
    spec = matkit.eigenvalues_sym(M, psd_tol=cfg.psd_tol)
    return _result(spec, beta)


def entropy(X, cfg=DEFAULT_CONFIG, route="auto"):
    """LogDet entropy of one sample matrix."""
    X = matkit.as_sample_matrix(X)
    return _joint_at([X], cfg.beta_for(X.shape[1]), cfg, route)


def joint_entropy(Xs, cfg=DEFAULT_CONFIG, route="auto"):
    """Joint LogDet entropy of signals that share their sample count.

    Equals :func:`entropy` of the column concatenation at the same ``beta``.
    """
    mats = _validated_list(Xs)
    total = sum(X.shape[1] for X in mats)
    return _joint_at(mats, cfg.beta_for(total), cfg, route)


def entropy_at_beta(X, beta, cfg=DEFAULT_CONFIG):
    """Entropy of ``X`` (or a list of signals) at an explicit ``beta``."""
    mats = _validated_list(X if isinstance(X, (list, tuple)) else [X])
    return _joint_at(mats, float(beta), cfg).value


def conditional_entropy(X1, X2, cfg=DEFAULT_CONFIG):
    """``H_D(X1, X2) - H_D(X2)`` with one shared ``beta``."""
    X1, X2 = _validated_list([X1, X2])
    beta = cfg.beta_for(X1.shape[1] + X2.shape[1])
    h12 = _joint_at([X1, X2], beta, cfg).value
    h2 = _joint_at([X2], beta, cfg).value
    return h12 - h2


def mutual_information(X1, X2, cfg=DEFAULT_CONFIG):
    """``H_D(X1) + H_D(X2) - H_D(X1, X2)`` with one shared ``beta``."""
    X1, X2 = _validated_list([X1, X2])
    beta = cfg.beta_for(X1.shape[1] + X2.shape[1])
    h1 = _joint_at([X1], beta, cfg).value
    h2 = _joint_at([X2], beta, cfg).value
    h12 = _joint_at([X1, X2], beta, cfg).value
    return h1 + h2 - h12


def exact_covariance_entropy(Sigma, beta, psd_tol=matkit.DEFAULT_PSD_TOL):
    """``1/2 log det(I + beta * Sigma)`` for a supplied covariance."""
    spec = matkit.eigenvalues_sym(Sigma, psd_tol=psd_tol)
    return matkit.logdet_shifted(spec, beta)


def exact_covariance_mutual_information(Sigma, d1, beta, psd_tol=matkit.DEFAULT_PSD_TOL):
    """LogDet MI between the leading ``d1`` coordinates and the rest of a
    joint covariance ``Sigma``.
    """
    Sigma = matkit.as_symmetric(Sigma, "Sigma")
    if not 0 < d1 < Sigma.shape[0]:
        raise ShapeError(f"split {d1} must lie strictly inside dimension {Sigma.shape[0]}")
    h1 = exact_covariance_entropy(Sigma[:d1, :d1], beta, psd_tol)
    h2 = exact_covariance_entropy(Sigma[d1:, d1:], beta, psd_tol)
    h12 = exact_covariance_entropy(Sigma, beta, psd_tol)
    return h1 + h2 - h12

