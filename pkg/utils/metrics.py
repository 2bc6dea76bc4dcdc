"""
Evaluation metrics relating representation and prediction quality.

All inputs are on the standardized scale of the training data.
"""

from dataclasses import asdict, dataclass
from typing import Dict, List

import numpy as np
import pandas as pd

from utils.errors import DataError

__all__ = ["MetricsReport", "compute_metrics", "tmse_component", "aggregate_reports"]


@dataclass(frozen=True)
class MetricsReport:
    tmse: float
    mspe: float
    msre_tst: float
    msre_trn: float
    per_pc_mse: np.ndarray
    n_trn: int
    n_tst: int

    def as_row(self) -> Dict[str, float]:
        row = {k: v for k, v in asdict(self).items() if k != "per_pc_mse"}
        for l, mse in enumerate(self.per_pc_mse, start=1):
            row[f"mse_pc{l}"] = float(mse)
        return row


def _shape_check(Y_tst, V, U_hat, Y_trn, U_trn):
    p, r = V.shape
    if Y_tst.shape[1] != p or Y_trn.shape[1] != p:
        raise DataError(f"outcome matrices must have {p} columns to match the loadings")
    if U_hat.shape != (Y_tst.shape[0], r):
        raise DataError(f"predicted scores must be {Y_tst.shape[0]}x{r}, got {U_hat.shape}")
    if U_trn.shape != (Y_trn.shape[0], r):
        raise DataError(f"training scores must be {Y_trn.shape[0]}x{r}, got {U_trn.shape}")


def compute_metrics(Y_tst, V, U_hat, Y_trn, U_trn) -> MetricsReport:
    """
    TMSE, MSPE, MSRE on the test set, MSRE on the training set and per-PC
    prediction MSEs for one train/test split.

    Args:
        Y_tst: n*×p standardized test outcomes
        V: p×r loadings
        U_hat: n*×r predicted test scores
        Y_trn: n×p standardized training outcomes
        U_trn: n×r training scores (Y_trn·V)
    """
    Y_tst, V, U_hat, Y_trn, U_trn = (np.atleast_2d(np.asarray(a, dtype=np.float64)) for a in (Y_tst, V, U_hat, Y_trn, U_trn))
    _shape_check(Y_tst, V, U_hat, Y_trn, U_trn)
    n_tst, n_trn = Y_tst.shape[0], Y_trn.shape[0]

    U_star = Y_tst @ V
    mspe = np.linalg.norm((U_hat - U_star) @ V.T) ** 2 / n_tst
    msre_tst = np.linalg.norm(Y_tst - U_star @ V.T) ** 2 / n_tst
    tmse = np.linalg.norm(Y_tst - U_hat @ V.T) ** 2 / n_tst
    msre_trn = np.linalg.norm(Y_trn - U_trn @ V.T) ** 2 / n_trn
    per_pc = np.sum((U_hat - U_star) ** 2, axis=0) / n_tst

    return MetricsReport(
        tmse=float(tmse),
        mspe=float(mspe),
        msre_tst=float(msre_tst),
        msre_trn=float(msre_trn),
        per_pc_mse=per_pc,
        n_trn=n_trn,
        n_tst=n_tst,
    )


def tmse_component(Y_l_tst, u_hat, v) -> float:
    """Per-component TMSE on the deflated test residual: ‖Y_l − û v⊤‖²_F / n*."""
    Y_l_tst = np.atleast_2d(np.asarray(Y_l_tst, dtype=np.float64))
    u_hat = np.asarray(u_hat, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u_hat.shape[0] != Y_l_tst.shape[0] or v.shape[0] != Y_l_tst.shape[1]:
        raise DataError("tmse_component: score/loading lengths do not match the residual")
    return float(np.linalg.norm(Y_l_tst - np.outer(u_hat, v)) ** 2 / Y_l_tst.shape[0])


def aggregate_reports(reports: List[MetricsReport]) -> pd.DataFrame:
    """Per-fold rows followed by a ``mean`` and an ``sd`` row."""
    rows = [dict(fold=str(i + 1), **rep.as_row()) for i, rep in enumerate(reports)]
    folds = pd.DataFrame(rows)
    numeric = folds.drop(columns=["fold"])
    mean = numeric.mean(axis=0).to_dict()
    sd = numeric.std(axis=0, ddof=1).fillna(0.0).to_dict() if len(rows) > 1 else {k: 0.0 for k in numeric.columns}
    summary = pd.DataFrame([dict(fold="mean", **mean), dict(fold="sd", **sd)])
    return pd.concat([folds, summary], ignore_index=True)
