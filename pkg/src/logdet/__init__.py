"""LogDet entropy and mutual information for sample matrices, with the
comparison estimators, data generators, a probe network and the experiment
harness built around them.

>>> import numpy as np, logdet
>>> X = np.random.default_rng(0).standard_normal((500, 3))
>>> h = logdet.entropy(X).value
"""

__version__ = "0.1.0"

from .baselines import (
    EntropyEstimate,
    EstimatorKind,
    Method,
    bin_entropy,
    estimate_entropy,
    kde_entropy,
    knn_entropy,
    renyi_entropy,
    renyi_mutual_information,
)
from .errors import (
    FormatError,
    InvalidInputError,
    LogDetError,
    NumericalFailureError,
    ParameterError,
    PSDViolationError,
    ShapeError,
    TrainingError,
)
from .estimator import (
    DEFAULT_CONFIG,
    EntropyResult,
    EstimatorConfig,
    conditional_entropy,
    entropy,
    entropy_at_beta,
    exact_covariance_entropy,
    exact_covariance_mutual_information,
    joint_entropy,
    mutual_information,
)
from .matkit import BACKEND, SymmetricSpectrum, eigenvalues_sym, eigh_sym, logdet_shifted

__all__ = [
    "BACKEND",
    "DEFAULT_CONFIG",
    "EntropyEstimate",
    "EntropyResult",
    "EstimatorConfig",
    "EstimatorKind",
    "FormatError",
    "InvalidInputError",
    "LogDetError",
    "Method",
    "NumericalFailureError",
    "PSDViolationError",
    "ParameterError",
    "ShapeError",
    "SymmetricSpectrum",
    "TrainingError",
    "bin_entropy",
    "conditional_entropy",
    "eigenvalues_sym",
    "eigh_sym",
    "entropy",
    "entropy_at_beta",
    "estimate_entropy",
    "exact_covariance_entropy",
    "exact_covariance_mutual_information",
    "joint_entropy",
    "kde_entropy",
    "knn_entropy",
    "logdet_shifted",
    "mutual_information",
    "renyi_entropy",
    "renyi_mutual_information",
]
