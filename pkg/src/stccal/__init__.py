"""Sparse tensor CCA with multi-order graph Laplacian regularization."""
from .data import MultiViewDataset, make_latent_blobs, make_manifold_clusters
from .errors import (ConfigError, DataError, DatasetError, DimensionError, NumericError,
                     ParameterError, RankError, STCCAError)
from .evaluation import EvalConfig, Report, benchmark, inject_noise, runtime_scaling
from .solver import ABLATIONS, FitResult, ProblemConfig, fit

__version__ = "0.1.0"

__all__ = [
    "ABLATIONS", "ConfigError", "DataError", "DatasetError", "DimensionError", "EvalConfig",
    "FitResult", "MultiViewDataset", "NumericError", "ParameterError", "ProblemConfig", "RankError",
    "Report", "STCCAError", "benchmark", "fit", "inject_noise", "make_latent_blobs",
    "make_manifold_clusters", "runtime_scaling",
]
