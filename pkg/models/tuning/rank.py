"""
Elbow curves for choosing the number of components.
"""

from typing import Optional

import numpy as np
import pandas as pd

from models.pipeline import MethodSpec, evaluate_folds, fit_method
from models.predictors.spatial import PredictorParams
from models.tuning.cv import CVPlan
from utils.dataset import Dataset
from utils.errors import ParameterError
from utils.logger import logger

__all__ = ["rank_curves", "knee_index"]


def knee_index(values) -> Optional[int]:
    """1-based l maximizing the discrete second difference; None with fewer than 3 points."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] < 3:
        return None
    second = values[:-2] - 2.0 * values[1:-1] + values[2:]
    return int(np.argmax(second)) + 2


def rank_curves(
    data: Dataset,
    spec: MethodSpec,
    r_max: int,
    plan: CVPlan,
    predictor: Optional[PredictorParams] = None,
    max_workers: int = 1,
) -> pd.DataFrame:
    """
    Per-l cumulative cross-validated prediction MSE, training representation
    error after l components, and the deflated training residual ‖Y^{(l+1)}‖²/n.

    Returns:
        DataFrame with columns l, cum_pred_mse, msre_trn, deflated_residual, knee
    """
    if not 1 <= r_max <= min(data.n, data.p):
        raise ParameterError(f"r_max={r_max} must lie in [1, {min(data.n, data.p)}]")
    spec = spec.with_rank(r_max)

    evaluation = evaluate_folds(data, [spec], plan, predictor, max_workers)[spec.method]
    per_pc = np.mean([rep.per_pc_mse for rep in evaluation.reports], axis=0)

    model = fit_method(data, spec)
    Y, V, U = model.Y_train_std, model.V, model.U_train
    n = Y.shape[0]
    msre_trn = np.array([np.linalg.norm(Y - U[:, :l] @ V[:, :l].T) ** 2 / n for l in range(1, r_max + 1)])

    residual = Y.copy()
    deflated = np.empty(r_max)
    for l, comp in enumerate(model.components):
        residual = residual - np.outer(comp.u, comp.v)
        deflated[l] = np.sum(residual ** 2) / n

    knee = knee_index(msre_trn)
    if knee is not None:
        logger.info(f"Rank curve knee (advisory) at l={knee}")
    return pd.DataFrame({
        "l": np.arange(1, r_max + 1),
        "cum_pred_mse": np.cumsum(per_pc),
        "msre_trn": msre_trn,
        "deflated_residual": deflated,
        "knee": [l == knee for l in range(1, r_max + 1)],
    })
