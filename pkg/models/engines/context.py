"""
Standardized training inputs shared by the three engines: Y and X column
statistics, the kernel matrix over standardized covariates and the TPRS basis.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from models.basis.kernels import KernelSpec, kernel_matrix
from models.basis.splines import NULL_DIM, SplineBasis, build_tprs
from models.engines.model import ColumnStats
from utils.dataset import Dataset
from utils.logger import logger

__all__ = ["FitContext", "rappca_spline_dim", "PREDICTIVE_SPLINE_DIM", "RAPPCA_SPLINE_CAP"]

RAPPCA_SPLINE_CAP = 200
PREDICTIVE_SPLINE_DIM = 10


def rappca_spline_dim(n_train: int, requested: Optional[int] = None) -> int:
    """Basis dimension for a training set: the request (or min(n, cap)) clipped to [4, n]."""
    m = min(n_train, RAPPCA_SPLINE_CAP) if requested is None else int(requested)
    if m > n_train:
        logger.warning(f"Spline dimension {m} exceeds {n_train} training rows; reduced to {n_train}")
        m = n_train
    return max(m, NULL_DIM + 1)


@dataclass(frozen=True)
class FitContext:
    data: Dataset
    Y: np.ndarray
    y_stats: ColumnStats
    X: np.ndarray
    x_stats: ColumnStats
    kernel: Optional[KernelSpec]
    K: Optional[np.ndarray]
    basis: Optional[SplineBasis]

    @classmethod
    def build(
        cls,
        data: Dataset,
        kernel: Optional[KernelSpec] = None,
        spline_m: Optional[int] = None,
        basis: Optional[SplineBasis] = None,
        standardize: bool = True,
        with_basis: bool = True,
    ) -> "FitContext":
        y_stats = ColumnStats.fit(data.Y, "outcome", standardize)
        x_stats = ColumnStats.fit(data.X, "covariate", standardize)
        X_std = x_stats.transform(data.X)

        K = None
        if kernel is not None and data.has_covariates:
            K = kernel_matrix(kernel, X_std)
        if basis is None and with_basis:
            basis = build_tprs(data.coords, rappca_spline_dim(data.n, spline_m))
        return cls(
            data=data,
            Y=y_stats.transform(data.Y),
            y_stats=y_stats,
            X=X_std,
            x_stats=x_stats,
            kernel=kernel if K is not None else None,
            K=K,
            basis=basis,
        )

    def predictive_design(self) -> np.ndarray:
        """Z = [X_std, B] for predictive PCA."""
        blocks = [self.X] if self.data.has_covariates else []
        blocks.append(self.basis.B)
        return np.column_stack(blocks)
