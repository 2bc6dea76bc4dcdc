"""
Baseline engines: classical PCA as a sequence of rank-one problems, and
predictive PCA whose scores are constrained to the column span of a design Z.
"""

from typing import List

import numpy as np
from scipy import linalg

from models.engines.model import ColumnStats, Hyperparams, PCComponent, PCModel, fix_sign
from utils.errors import DataError, NumericalError, ParameterError, RankError, check_matrix
from utils.logger import logger

__all__ = ["check_rank", "classical_components", "classical_pca_fit", "orthonormal_span", "predictive_components", "predictive_pca_fit"]

ZERO_HYPER = Hyperparams()


def check_rank(r: int, n: int, p: int) -> int:
    r = int(r)
    if not 1 <= r <= min(n, p):
        raise ParameterError(f"number of components r={r} must lie in [1, {min(n, p)}]")
    return r


def classical_components(Y: np.ndarray, r: int) -> List[PCComponent]:
    """Leading right-singular vector of each deflated residual."""
    Y_l = np.array(Y, dtype=np.float64)
    components = []
    for l in range(r):
        _, s, Vt = linalg.svd(Y_l, full_matrices=False)
        v = Vt[0].copy()
        u = Y_l @ v
        objective = float(np.sum(Y_l ** 2) - u @ u)
        components.append(fix_sign(PCComponent(v=v, u=u, alpha=np.zeros(0), beta=np.zeros(0), hyper=ZERO_HYPER, objective=objective)))
        comp = components[-1]
        Y_l = Y_l - np.outer(comp.u, comp.v)
        logger.debug(f"classical PC{l + 1}: singular value {s[0]:.4g}")
    return components


def classical_pca_fit(Y, r: int, standardize: bool = True) -> PCModel:
    """
    Classical PCA by sequential rank-one deflation.

    Args:
        Y: n×p outcomes
        r: number of components
        standardize: center and scale columns with training statistics first

    Returns:
        PCModel with method "classical"
    """
    Y = check_matrix(Y, "Y")
    r = check_rank(r, *Y.shape)
    y_stats = ColumnStats.fit(Y, "outcome", standardize)
    Y_std = y_stats.transform(Y)
    return PCModel(method="classical", components=classical_components(Y_std, r), y_stats=y_stats, Y_train_std=Y_std)


def orthonormal_span(Z: np.ndarray) -> np.ndarray:
    """
    Orthonormal basis G of col(Z) from a pivoted QR. Numerically dependent
    columns are dropped with a warning.
    """
    Q, R, piv = linalg.qr(Z, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        raise RankError("design matrix Z has no nonzero columns")
    rank = int(np.sum(diag > max(Z.shape) * np.finfo(float).eps * diag[0]))
    if rank < Z.shape[1]:
        dropped = sorted(int(c) for c in piv[rank:])
        logger.warning(f"Design matrix is rank deficient ({rank} < {Z.shape[1]}); dropped columns {dropped}")
    return Q[:, :rank]


def predictive_components(Y: np.ndarray, Z: np.ndarray, r: int) -> List[PCComponent]:
    G = orthonormal_span(Z)
    Y_l = np.array(Y, dtype=np.float64)
    components = []
    for l in range(r):
        H = G.T @ Y_l
        w, E = linalg.eigh(H @ H.T)
        e = E[:, -1]
        u_unit = G @ e
        v = Y_l.T @ u_unit
        norm = np.linalg.norm(v)
        if norm <= 1e-14:
            raise NumericalError(f"predictive PC{l + 1}: residual is orthogonal to the design span")
        v = v / norm
        comp = fix_sign(PCComponent(v=v, u=Y_l @ v, alpha=np.zeros(0), beta=np.zeros(0), hyper=ZERO_HYPER, objective=float(w[-1])))
        components.append(comp)
        Y_l = Y_l - np.outer(Y_l @ comp.v, comp.v)
        logger.debug(f"predictive PC{l + 1}: captured variance {w[-1]:.4g}")
    return components


def predictive_pca_fit(Y, Z, r: int, standardize: bool = True) -> PCModel:
    """
    Predictive PCA: each score is the unit vector in col(Z) that maximizes
    u⊤Y_l Y_l⊤u; the loading is Y_l⊤u normalized to unit length.
    """
    Y = check_matrix(Y, "Y")
    Z = check_matrix(Z, "Z")
    if Z.shape[0] != Y.shape[0]:
        raise DataError(f"Z has {Z.shape[0]} rows, Y has {Y.shape[0]}")
    r = check_rank(r, *Y.shape)
    y_stats = ColumnStats.fit(Y, "outcome", standardize)
    Y_std = y_stats.transform(Y)
    return PCModel(method="predictive", components=predictive_components(Y_std, Z, r), y_stats=y_stats, Y_train_std=Y_std)
