"""
Thin-plate regression spline (TPRS) bases over 2-D coordinates.

The basis is the eigen-truncated thin-plate spline: with E_ij = η(‖s_i − s_j‖),
η(r) = r² log r, and T = [1, s₁, s₂], the wiggly part is restricted to the
null space N of T⊤ and truncated to the leading eigenvectors W of N⊤EN.
At data points the basis is B = [T | E·N·W] and the wiggliness penalty is
Q = blockdiag(0₃, Γ). New points are evaluated through the representer
weights N·W. The usual 1/(8π) factor of η is absorbed into λ.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from utils.errors import DataError, RankError, check_matrix
from utils.logger import logger

__all__ = ["NULL_DIM", "SplineBasis", "tprs_radial", "build_tprs", "eval_basis", "smooth_fit", "gcv_lambda_grid"]

NULL_DIM = 3
GCV_POINTS = 30


def tprs_radial(r: np.ndarray) -> np.ndarray:
    """η(r) = r² log r with η(0) = 0."""
    r = np.asarray(r, dtype=np.float64)
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = r[pos] ** 2 * np.log(r[pos])
    return out


def _polynomial_part(coords: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(coords.shape[0]), coords])


@dataclass(frozen=True)
class SplineBasis:
    coords: np.ndarray
    m: int
    B: np.ndarray
    Q: np.ndarray
    transfer: np.ndarray
    eigenvalues: np.ndarray
    null_dim: int = NULL_DIM

    @property
    def penalty_root(self) -> np.ndarray:
        """R with Q = R⊤R; rows only for the wiggly coefficients."""
        R = np.zeros((self.m - self.null_dim, self.m))
        R[:, self.null_dim:] = np.diag(np.sqrt(self.eigenvalues))
        return R


def build_tprs(coords, m: int) -> SplineBasis:
    """
    Build an m-dimensional TPRS basis at n training locations.

    Args:
        coords: n×2 coordinates
        m: basis dimension, 4 <= m <= n

    Returns:
        SplineBasis
    """
    coords = check_matrix(coords, "coords", ncols=2)
    n = coords.shape[0]
    m = int(m)
    if m < NULL_DIM + 1:
        raise DataError(f"TPRS basis dimension must be at least {NULL_DIM + 1}, got {m}")
    if m > n:
        raise DataError(f"TPRS basis dimension {m} exceeds the number of locations {n}")

    T = _polynomial_part(coords)
    Q_full, R_t = np.linalg.qr(T, mode="complete")
    diag = np.abs(np.diag(R_t))
    if diag.min() <= 1e-10 * max(diag.max(), 1.0):
        raise RankError("coordinates are collinear; a TPRS basis needs 3 affinely independent locations")
    N = Q_full[:, NULL_DIM:]

    E = tprs_radial(cdist(coords, coords))
    M = N.T @ E @ N
    M = 0.5 * (M + M.T)
    gamma, W = linalg.eigh(M)
    gamma = np.clip(gamma, 0.0, None)

    order = np.argsort(gamma)[::-1][: m - NULL_DIM]
    gamma = gamma[order]
    transfer = N @ W[:, order]

    B = np.column_stack([T, E @ transfer])
    Q = np.zeros((m, m))
    Q[NULL_DIM:, NULL_DIM:] = np.diag(gamma)

    logger.debug(f"TPRS basis n={n}, m={m}, smallest kept eigenvalue {gamma[-1] if gamma.size else 0:.3e}")
    return SplineBasis(coords=coords, m=m, B=B, Q=Q, transfer=transfer, eigenvalues=gamma)


def eval_basis(basis: SplineBasis, new_coords) -> np.ndarray:
    """Evaluate every basis function at new locations (n*×m)."""
    new_coords = check_matrix(new_coords, "new_coords", ncols=2)
    E_new = tprs_radial(cdist(new_coords, basis.coords))
    return np.column_stack([_polynomial_part(new_coords), E_new @ basis.transfer])


def gcv_lambda_grid(basis: SplineBasis) -> np.ndarray:
    scale = np.trace(basis.B.T @ basis.B) / (np.trace(basis.Q) + 1e-12)
    return np.logspace(-6, 4, GCV_POINTS) * scale


def _penalized_solve(B: np.ndarray, R: np.ndarray, y: np.ndarray, lam: float):
    """
    Solve min ‖y − Bc‖² + λ‖Rc‖² as an augmented least-squares problem.

    Returns (coef, rank, edf) where edf = tr(B (B⊤B + λQ)⁻¹ B⊤).
    """
    n, m = B.shape
    A = np.vstack([B, np.sqrt(lam) * R]) if lam > 0 else B
    rhs = np.concatenate([y, np.zeros(A.shape[0] - n)])
    Qa, Ra = linalg.qr(A, mode="economic")
    diag = np.abs(np.diag(Ra))
    tol = max(A.shape) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < m:
        coef = linalg.lstsq(A, rhs, cond=None)[0]
        return coef, rank, float(np.sum(Qa[:n] ** 2))
    coef = linalg.solve_triangular(Ra, Qa.T @ rhs)
    return coef, rank, float(np.sum(Qa[:n] ** 2))


def smooth_fit(basis: SplineBasis, y, lam: Union[float, str] = "gcv", return_lambda: bool = False):
    """
    Penalized least squares: argmin ‖y − Bc‖² + λ c⊤Qc.

    Args:
        basis: TPRS basis at the training locations
        y: n-vector
        lam: nonnegative λ, or "gcv" to select it on a 30-point log grid by
            generalized cross-validation n‖y − ŷ‖² / (n − tr H)²
        return_lambda: also return the λ used

    Returns:
        m-vector of coefficients (and λ if requested)
    """
    y = check_matrix(np.asarray(y, dtype=np.float64).reshape(-1, 1), "y").ravel()
    B = basis.B
    n = B.shape[0]
    if y.shape[0] != n:
        raise DataError(f"y has length {y.shape[0]}, basis has {n} rows")
    R = basis.penalty_root

    if isinstance(lam, str):
        if lam.lower() != "gcv":
            raise DataError(f"lambda must be a nonnegative number or 'gcv', got {lam!r}")
        best = None
        for candidate in gcv_lambda_grid(basis):
            coef, _, edf = _penalized_solve(B, R, y, candidate)
            rss = float(np.sum((y - B @ coef) ** 2))
            denom = (n - edf) ** 2
            score = n * rss / denom if denom > 1e-12 else np.inf
            if best is None or score < best[0]:
                best = (score, candidate, coef)
        _, lam, coef = best
        logger.debug(f"GCV selected lambda={lam:.3e}")
    else:
        lam = float(lam)
        if lam < 0 or not np.isfinite(lam):
            raise DataError(f"lambda must be nonnegative, got {lam}")
        coef, rank, _ = _penalized_solve(B, R, y, lam)
        if lam == 0 and rank < basis.m:
            raise RankError(f"unpenalized normal equations are singular (rank {rank} < m={basis.m})")

    return (coef, lam) if return_lambda else coef
