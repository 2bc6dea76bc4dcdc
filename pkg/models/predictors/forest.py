"""
Random-forest regression used as the first stage of the spatial predictor.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.ensemble import RandomForestRegressor

from utils.errors import DataError, ParameterError, check_matrix
from utils.logger import logger

__all__ = ["ForestParams", "rf_fit", "rf_predict", "oob_mse"]


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 500
    mtry: Optional[int] = None  # None: max(1, f // 3)
    min_leaf: int = 5
    seed: int = 0
    bootstrap: bool = True
    n_jobs: Optional[int] = None

    def __post_init__(self):
        if self.n_trees < 1:
            raise ParameterError(f"n_trees must be at least 1, got {self.n_trees}")
        if self.min_leaf < 1:
            raise ParameterError(f"min_leaf must be at least 1, got {self.min_leaf}")
        if self.mtry is not None and self.mtry < 1:
            raise ParameterError(f"mtry must be at least 1, got {self.mtry}")

    def resolve_mtry(self, n_features: int) -> int:
        mtry = max(1, n_features // 3) if self.mtry is None else self.mtry
        if mtry > n_features:
            raise ParameterError(f"mtry={mtry} exceeds the number of features {n_features}")
        return mtry


def rf_fit(features, y, params: ForestParams) -> RandomForestRegressor:
    """
    Bagged regression trees with greedy variance-reduction splits over mtry
    random features per node. Deterministic given params.seed.
    """
    features = check_matrix(features, "features", min_rows=2)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != features.shape[0]:
        raise DataError(f"forest target has {y.shape[0]} rows, features have {features.shape[0]}")
    if not np.isfinite(y).all():
        raise DataError("forest target contains non-finite values")

    forest = RandomForestRegressor(
        n_estimators=params.n_trees,
        max_features=params.resolve_mtry(features.shape[1]),
        min_samples_leaf=params.min_leaf,
        bootstrap=params.bootstrap,
        oob_score=params.bootstrap and features.shape[0] >= 10,
        random_state=params.seed,
        n_jobs=params.n_jobs,
    )
    forest.fit(features, y)
    logger.debug(f"Random forest: {params.n_trees} trees on {features.shape[0]}x{features.shape[1]} features")
    return forest


def rf_predict(forest: RandomForestRegressor, features_new) -> np.ndarray:
    """Average of per-tree predictions."""
    features_new = check_matrix(features_new, "features_new")
    if features_new.shape[1] != forest.n_features_in_:
        raise DataError(f"forest was trained on {forest.n_features_in_} features, got {features_new.shape[1]}")
    return forest.predict(features_new)


def oob_mse(forest: RandomForestRegressor, y) -> float:
    if not getattr(forest, "oob_score", False):
        raise ParameterError("out-of-bag error needs a bootstrapped forest fit with at least 10 rows")
    y = np.asarray(y, dtype=np.float64).ravel()
    return float(np.mean((forest.oob_prediction_ - y) ** 2))
