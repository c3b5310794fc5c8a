"""Dense linear-algebra kernel: covariance and Gram construction, symmetric
eigenvalues, and the shifted log-determinant every estimator reduces to.

The eigensolver is Householder tridiagonalisation followed by implicit-shift
QL. It runs in the compiled ``_kernels`` extension when that was built and
falls back to the numpy/pure-Python twin otherwise. Set ``LOGDET_BACKEND``
to ``python`` to force the fallback.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from . import _kernels_py
from .errors import InvalidInputError, NumericalFailureError, ParameterError, PSDViolationError

log = logging.getLogger(__name__)

try:
    from . import _kernels as _kernels_native
except ImportError:  # extension not built
    _kernels_native = None

BACKENDS = ("native", "python")


def _default_backend():
    requested = os.environ.get("LOGDET_BACKEND", "").strip().lower()
    if requested == "python" or _kernels_native is None:
        if requested == "native":
            log.warning("LOGDET_BACKEND=native requested but the extension is not built")
        return "python"
    return "native"


BACKEND = _default_backend()

SYMMETRY_RTOL = 1e-10
DEFAULT_PSD_TOL = 1e-10


def _kernel_module(backend):
    backend = backend or BACKEND
    if backend == "native":
        if _kernels_native is None:
            raise RuntimeError("compiled kernels are not available; rebuild the package")
        return _kernels_native
    if backend == "python":
        return _kernels_py
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


def as_sample_matrix(X, name="X"):
    """Validate and return ``X`` as a float64 ``(n, d)`` array.

    A 1-D input is treated as ``n`` samples of a scalar feature.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D (samples x features), got {X.ndim}-D")
    n, d = X.shape
    if n < 1 or d < 1:
        raise InvalidInputError(f"{name} must have at least one sample and one feature, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} contains NaN or infinite entries")
    return X


def canonical_rows(*mats):
    """Reorder the rows of each matrix by the lexicographic order of their
    concatenated rows, making downstream sums independent of sample order.
    """
    Z = mats[0] if len(mats) == 1 else np.hstack(mats)
    order = np.lexsort(Z.T[::-1])
    return [M[order] for M in mats]


def center_columns(X):
    return X - X.mean(axis=0, keepdims=True)


def covariance(X, center=True):
    """``Xc^T Xc / n`` (d x d), with column means removed when ``center``."""
    X = as_sample_matrix(X)
    if center:
        X = center_columns(X)
    C = X.T @ X / X.shape[0]
    return 0.5 * (C + C.T)


def gram(X, center=True):
    """``Xc Xc^T / n`` (n x n); shares its nonzero spectrum with ``covariance``."""
    X = as_sample_matrix(X)
    if center:
        X = center_columns(X)
    G = X @ X.T / X.shape[0]
    return 0.5 * (G + G.T)


def as_symmetric(A, name="A"):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains NaN or infinite entries")
    if A.size:
        scale = np.max(np.abs(A))
        asym = np.max(np.abs(A - A.T))
        if asym > SYMMETRY_RTOL * scale:
            raise InvalidInputError(
                f"{name} is not symmetric: max |A - A^T| = {asym:.3e} exceeds {SYMMETRY_RTOL:g} * max|A|"
            )
    return A


@dataclass(frozen=True)
class SymmetricSpectrum:
    """Eigenvalues sorted descending, with round-off negatives clamped to zero."""

    eigenvalues: np.ndarray
    tol: float

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def lambda_max(self):
        return float(self.eigenvalues[0]) if len(self.eigenvalues) else 0.0

    def is_psd(self):
        return bool(np.all(self.eigenvalues >= 0.0))


def clamp_tolerance(lambda_max, psd_tol=DEFAULT_PSD_TOL):
    return psd_tol * max(1.0, float(lambda_max))


_FINFO = np.finfo(np.float64)
_SAFE_MIN = math.sqrt(_FINFO.tiny / _FINFO.eps)
_SAFE_MAX = math.sqrt(_FINFO.max)


def _safe_scale(A):
    """Power of two bringing ``max|A|`` into a range where the QL sweep
    neither underflows nor overflows; 1 when no scaling is needed.
    """
    amax = float(np.max(np.abs(A))) if A.size else 0.0
    if amax == 0.0 or _SAFE_MIN <= amax <= _SAFE_MAX:
        return 1.0
    # clamped so the factor itself stays finite; 2**1000 lifts any subnormal into range
    return math.ldexp(1.0, max(-1000, min(1000, -math.frexp(amax)[1])))


def _solve(A, want_vectors, backend):
    kern = _kernel_module(backend)
    m = A.shape[0]
    scale = _safe_scale(A)
    work = np.array(A, dtype=np.float64, order="C", copy=True)
    if scale != 1.0:
        work *= scale
    d, e, q = kern.tridiagonalize(work, want_vectors)
    d = np.array(d)
    e = np.array(e)
    status, index, residual = kern.tridiagonal_ql(d, e, q)
    if status:
        raise NumericalFailureError(
            f"QL iteration did not converge for a {m}x{m} matrix "
            f"(eigenvalue {index}, off-diagonal residual {residual / scale:.3e})"
        )
    if scale != 1.0:
        d = d / scale
    return d, q


def eigenvalues_sym(A, psd_tol=DEFAULT_PSD_TOL, backend=None):
    """Full spectrum of symmetric ``A`` as a :class:`SymmetricSpectrum`.

    Values in ``[-tol, 0)`` are clamped to zero, where
    ``tol = psd_tol * max(1, lambda_max)``; larger negatives are kept so
    callers can detect a genuine PSD violation.
    """
    A = as_symmetric(A)
    if A.shape[0] == 0:
        return SymmetricSpectrum(np.zeros(0), psd_tol)
    w, _ = _solve(A, False, backend)
    w = np.sort(w)[::-1]
    tol = clamp_tolerance(w[0], psd_tol)
    w = np.where((w < 0.0) & (w >= -tol), 0.0, w)
    return SymmetricSpectrum(np.ascontiguousarray(w), tol)


def eigh_sym(A, backend=None):
    """Eigenpairs of symmetric ``A``: ``(w, V)`` with ``w`` descending and
    ``A @ V[:, i] = w[i] * V[:, i]``. No clamping is applied.
    """
    A = as_symmetric(A)
    if A.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    w, V = _solve(A, True, backend)
    order = np.argsort(w)[::-1]
    return w[order], V[:, order]


def sample_spectrum(X, center=True, route="auto", psd_tol=DEFAULT_PSD_TOL, backend=None):
    """Nonzero-compatible spectrum of ``X^T X / n`` via the cheaper route.

    ``route`` is ``"covariance"`` (d x d), ``"gram"`` (n x n), or ``"auto"``,
    which picks the smaller matrix.
    """
    X = as_sample_matrix(X)
    n, d = X.shape
    if route == "auto":
        route = "covariance" if d <= n else "gram"
    if route == "covariance":
        M = covariance(X, center)
    elif route == "gram":
        M = gram(X, center)
    else:
        raise ValueError(f"unknown route {route!r}")
    return eigenvalues_sym(M, psd_tol=psd_tol, backend=backend)


def logdet_shifted(spec, beta):
    """``0.5 * sum(log1p(beta * lambda_i))`` in nats.

    ``spec`` is a :class:`SymmetricSpectrum` or a 1-D array of eigenvalues.
    """
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    if isinstance(spec, SymmetricSpectrum):
        lam = spec.eigenvalues
    else:
        lam = np.asarray(spec, dtype=np.float64)
    if lam.size and lam.min() < 0.0:
        raise PSDViolationError(
            f"negative eigenvalue {lam.min():.3e} below the clamp tolerance; matrix is not PSD"
        )
    return 0.5 * float(np.sum(np.log1p(beta * lam)))
