"""Nearest-neighbour matching and local polynomial estimators under covariate shift."""

from .basis import MultiIndexBasis, build_basis, eval_monomials
from .estimators import (
    AtePanel,
    AteReport,
    BelowTheoryThresholdWarning,
    ConfigError,
    Dataset,
    EstimateReport,
    EstimatorConfig,
    estimate_ate,
    estimate_expectation,
    pointwise_matching,
    pointwise_polynomial,
    predict_many,
)
from .neighbors import NeighborIndex, NeighborResult, PointSet, build_index, knn, knn_bruteforce

__version__ = "0.1.0"

__all__ = [
    "AtePanel",
    "AteReport",
    "BelowTheoryThresholdWarning",
    "ConfigError",
    "Dataset",
    "EstimateReport",
    "EstimatorConfig",
    "MultiIndexBasis",
    "NeighborIndex",
    "NeighborResult",
    "PointSet",
    "build_basis",
    "build_index",
    "estimate_ate",
    "estimate_expectation",
    "eval_monomials",
    "knn",
    "knn_bruteforce",
    "pointwise_matching",
    "pointwise_polynomial",
    "predict_many",
]
