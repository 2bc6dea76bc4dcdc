"""
RapPCA: per-component minimization of

    f(v, α, β) = ‖Y_l − Y_l v v⊤‖²_F + γ‖Y_l v − (Kα + Bβ)‖²
                 + λ₁ α⊤(K + δI)α + λ₂ β⊤(Q + δI)β,      ‖v‖ = 1,

solved in closed form. With Y_l = S D T⊤ (thin SVD), Z = [K, B] and
M = γZ⊤Z + blockdiag(λ₁(K + δI), λ₂(Q + δI)), profiling out η = (α, β) gives
f = ‖Y_l‖² − q⊤Aq with q = T⊤v and

    A = −(γ − 1)D² + γ² D S⊤ Z M⁻¹ Z⊤ S D.

The loading is v = T q for the leading unit eigenvector q of A, and
η = M⁻¹ γ Z⊤ S D q.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy import linalg

from models.basis.kernels import KernelSpec
from models.basis.splines import SplineBasis
from models.engines.context import FitContext
from models.engines.model import Hyperparams, PCComponent, PCModel, fix_sign
from utils.dataset import Dataset
from utils.errors import DataError, NumericalError, ParameterError, check_finite, check_matrix
from utils.logger import logger

__all__ = [
    "ComponentSolver",
    "rappca_solve_component",
    "rappca_components",
    "rappca_fit",
    "objective_value",
    "PerturbationCurve",
    "polar_perturbation_check",
]

SINGULAR_TOL = 1e-12
RIDGE_FACTOR = 1e-10


def _as_optional(K) -> Optional[np.ndarray]:
    if K is None:
        return None
    K = np.asarray(K, dtype=np.float64)
    return K if K.size else None


def objective_value(Y_l, v, alpha, beta, K, B, Q, hyper: Hyperparams) -> float:
    """Per-component objective at (v, α, β); K may be None when there are no covariates."""
    Y_l = check_finite(Y_l, "Y_l")
    v = np.asarray(v, dtype=np.float64).ravel()
    if abs(np.linalg.norm(v) - 1.0) > 1e-8:
        raise DataError(f"loading must have unit norm, got {np.linalg.norm(v):.12g}")
    K = _as_optional(K)
    alpha = np.asarray(alpha, dtype=np.float64).ravel()
    beta = np.asarray(beta, dtype=np.float64).ravel()

    u = Y_l @ v
    fit = B @ beta
    penalty = hyper.lambda2 * (beta @ (Q @ beta) + hyper.delta * beta @ beta)
    if K is not None:
        fit = fit + K @ alpha
        penalty += hyper.lambda1 * (alpha @ (K @ alpha) + hyper.delta * alpha @ alpha)
    representation = np.linalg.norm(Y_l - np.outer(u, v)) ** 2
    return float(representation + hyper.gamma * np.sum((u - fit) ** 2) + penalty)


class ComponentSolver:
    """
    Closed-form solver for one residual. Everything that does not depend on
    (γ, λ₁, λ₂, δ) is computed once, so grids of hyperparameters are cheap.
    ``previous`` holds the loadings extracted before this residual (p×k);
    a loading taken from null(Y_l) is kept orthogonal to them.
    """

    def __init__(self, Y_l, K, B, Q, previous=None):
        self.Y_l = check_finite(Y_l, "Y_l")
        self.K = _as_optional(K)
        self.B = check_finite(B, "B")
        self.Q = check_finite(Q, "Q")
        self.previous = None if previous is None or np.size(previous) == 0 else np.asarray(previous, dtype=np.float64).reshape(self.Y_l.shape[1], -1)
        n, p = self.Y_l.shape
        if self.B.shape[0] != n or (self.K is not None and self.K.shape != (n, n)):
            raise DataError("K and B must have one row per observation of Y_l")
        if self.Q.shape != (self.B.shape[1], self.B.shape[1]):
            raise DataError(f"Q must be {self.B.shape[1]}x{self.B.shape[1]}, got {self.Q.shape}")

        self.S, self.d, Tt = linalg.svd(self.Y_l, full_matrices=False)
        self.T = Tt.T
        self.rank = int(np.sum(self.d > SINGULAR_TOL * max(self.d[0], 0.0))) if self.d.size else 0
        self.n_alpha = n if self.K is not None else 0
        self.Z = self.B if self.K is None else np.hstack([self.K, self.B])
        self.ZtZ = self.Z.T @ self.Z
        self.C = self.Z.T @ (self.S * self.d)
        self.total = float(np.sum(self.Y_l ** 2))

    def _system(self, hyper: Hyperparams) -> np.ndarray:
        M = hyper.gamma * self.ZtZ
        m = self.B.shape[1]
        M[-m:, -m:] += hyper.lambda2 * (self.Q + hyper.delta * np.eye(m))
        if self.K is not None:
            n = self.n_alpha
            M[:n, :n] += hyper.lambda1 * (self.K + hyper.delta * np.eye(n))
        if hyper.lambda1 == 0 and hyper.lambda2 == 0:
            M += RIDGE_FACTOR * np.trace(M) * np.eye(M.shape[0])
        return 0.5 * (M + M.T)

    @staticmethod
    def _solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        try:
            return linalg.cho_solve(linalg.cho_factor(M, lower=True, check_finite=False), rhs, check_finite=False)
        except linalg.LinAlgError:
            logger.debug("Cholesky failed; falling back to pseudo-inverse")
            return linalg.pinv(M, rtol=SINGULAR_TOL) @ rhs

    def a_matrix(self, hyper: Hyperparams):
        """Return (A, M⁻¹Z⊤SD) for a hyperparameter combination."""
        A = (1.0 - hyper.gamma) * np.diag(self.d ** 2)
        if hyper.gamma == 0:
            return A, None
        X = self._solve(self._system(hyper), self.C)
        A = A + hyper.gamma ** 2 * (self.C.T @ X)
        return 0.5 * (A + A.T), X

    def _free_direction(self) -> Optional[np.ndarray]:
        """A unit vector in null(Y_l) orthogonal to the loadings already extracted, if one exists."""
        constraints = self.Y_l if self.previous is None else np.vstack([self.Y_l, self.previous.T])
        basis = linalg.null_space(constraints)
        return basis[:, 0] if basis.shape[1] else None

    def solve(self, hyper: Hyperparams) -> PCComponent:
        A, X = self.a_matrix(hyper)
        w, E = linalg.eigh(A)
        q = E[:, -1]
        p = self.Y_l.shape[1]
        free = self._free_direction() if w[-1] < 0 and p > self.T.shape[1] else None
        if free is not None:
            # every direction in the row space costs more than leaving it: use the null space
            v = free
            q = np.zeros_like(q)
        else:
            v = self.T @ q
            v = v / np.linalg.norm(v)
        if not np.isfinite(v).all():
            raise NumericalError("RapPCA solver produced a non-finite loading")

        if X is None:
            eta = np.zeros(self.Z.shape[1])
        else:
            eta = hyper.gamma * (X @ q)
        comp = PCComponent(
            v=v,
            u=self.Y_l @ v,
            alpha=eta[: self.n_alpha],
            beta=eta[self.n_alpha:],
            hyper=hyper,
            objective=0.0,
        )
        comp = fix_sign(comp)
        comp.objective = objective_value(self.Y_l, comp.v, comp.alpha, comp.beta, self.K, self.B, self.Q, hyper)
        logger.debug(f"RapPCA component gamma={hyper.gamma:g} l1={hyper.lambda1:g} l2={hyper.lambda2:g}: "
                     f"top eigenvalue {w[-1]:.4g}, objective {comp.objective:.6g}")
        return comp


def rappca_solve_component(Y_l, K, B, Q, hyper: Hyperparams, previous=None) -> PCComponent:
    return ComponentSolver(Y_l, K, B, Q, previous).solve(hyper)


def rappca_components(Y, K, B, Q, hypers: Sequence[Hyperparams]) -> List[PCComponent]:
    """Sequential extraction with deflation Y_{l+1} = Y_l − u_l v_l⊤."""
    Y_l = np.array(Y, dtype=np.float64)
    components = []
    for l, hyper in enumerate(hypers):
        previous = np.column_stack([c.v for c in components]) if components else None
        comp = rappca_solve_component(Y_l, K, B, Q, hyper, previous)
        components.append(comp)
        Y_l = Y_l - np.outer(comp.u, comp.v)
        logger.debug(f"RapPCA PC{l + 1}: residual norm² {np.sum(Y_l ** 2):.6g}")
    return components


def rappca_fit(
    data: Dataset,
    kernel: Optional[KernelSpec],
    basis: SplineBasis,
    hyper_per_component: Sequence[Hyperparams],
    r: int,
    standardize: bool = True,
) -> PCModel:
    """
    Fit r RapPCA components.

    Args:
        data: training Dataset
        kernel: kernel over standardized covariates (ignored without covariates)
        basis: TPRS basis built on data.coords
        hyper_per_component: one Hyperparams per component
        r: number of components

    Returns:
        PCModel with method "rappca"
    """
    r = int(r)
    if len(hyper_per_component) != r:
        raise ParameterError(f"expected {r} hyperparameter sets, got {len(hyper_per_component)}")
    if not 1 <= r <= min(data.n, data.p):
        raise ParameterError(f"number of components r={r} must lie in [1, {min(data.n, data.p)}]")
    if basis.B.shape[0] != data.n:
        raise DataError("spline basis was built on a different set of locations")
    ctx = FitContext.build(data, kernel=kernel, basis=basis, standardize=standardize)
    components = rappca_components(ctx.Y, ctx.K, basis.B, basis.Q, hyper_per_component)
    return PCModel(
        method="rappca",
        components=components,
        y_stats=ctx.y_stats,
        x_stats=ctx.x_stats,
        kernel=ctx.kernel,
        basis=basis,
        train=data,
        X_train_std=ctx.X,
        Y_train_std=ctx.Y,
    )


@dataclass(frozen=True)
class PerturbationCurve:
    theta: np.ndarray
    difference: np.ndarray
    own_theta: float

    @property
    def minimum(self) -> float:
        return float(self.difference.min())


def polar_perturbation_check(Y_l, component: PCComponent, K, B, Q, hyper: Hyperparams, grid_size: int = 360) -> PerturbationCurve:
    """
    Rotate the first two loading entries on the circle that keeps ‖v‖ = 1
    (v₁ = ρ sin θ, v₂ = ρ cos θ) with α, β and all other entries fixed, and
    report f(v*(θ)) − f(ṽ) over a uniform θ grid on [0, 2π) plus the
    component's own angle, where the difference is zero.
    """
    v = np.asarray(component.v, dtype=np.float64)
    if v.shape[0] < 2:
        raise DataError("polar perturbation needs at least two loading entries")
    if grid_size < 8:
        raise ParameterError(f"grid_size must be at least 8, got {grid_size}")
    Y_l = check_matrix(Y_l, "Y_l")
    rho = np.sqrt(max(0.0, 1.0 - float(np.sum(v[2:] ** 2))))
    base = objective_value(Y_l, v, component.alpha, component.beta, K, B, Q, hyper)

    own = np.arctan2(v[0], v[1]) % (2.0 * np.pi)
    thetas = np.unique(np.append(np.linspace(0.0, 2.0 * np.pi, grid_size, endpoint=False), own))
    diffs = np.empty(thetas.shape[0])
    for i, theta in enumerate(thetas):
        v_star = v.copy()
        v_star[0] = rho * np.sin(theta)
        v_star[1] = rho * np.cos(theta)
        diffs[i] = objective_value(Y_l, v_star, component.alpha, component.beta, K, B, Q, hyper) - base
    return PerturbationCurve(theta=thetas, difference=diffs, own_theta=float(own))
