"""
K-fold cross-validated hyperparameter selection for RapPCA, one component at
a time. Components 1..l−1 are frozen at their selected values and refit on
each fold's training rows before component l is searched.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.model_selection import KFold

from models.basis.kernels import KernelSpec, kernel_matrix
from models.engines.context import FitContext
from models.engines.model import Hyperparams, PCComponent
from models.engines.rappca import ComponentSolver
from models.predictors.spatial import Locations, PredictorParams, ScoreTask, get_predictor
from models.tuning.grid import GridPoint, TuningGrid
from utils.dataset import Dataset
from utils.errors import ParameterError
from utils.logger import logger, progress
from utils.metrics import tmse_component
from utils.seeding import derive_seed

__all__ = ["CV_METRICS", "CVPlan", "FoldState", "TuneResult", "prepare_folds", "cv_tune_component", "tune_components", "gamma_sweep", "lambda_sweep"]

CV_METRICS = ("tmse", "mspe", "msre")


@dataclass(frozen=True)
class CVPlan:
    k: int = 10
    seed: int = 0
    metric: str = "tmse"

    def __post_init__(self):
        if self.k < 2:
            raise ParameterError(f"cross-validation needs at least 2 folds, got {self.k}")
        if self.metric not in CV_METRICS:
            raise ParameterError(f"Unknown CV metric '{self.metric}'. Must be one of {CV_METRICS}")

    def folds(self, n: int) -> List[Tuple[np.ndarray, np.ndarray]]:
        """Seeded random partition of rows 0..n−1 into k nonempty validation folds."""
        if self.k > n:
            raise ParameterError(f"cannot split {n} rows into {self.k} folds")
        splitter = KFold(n_splits=self.k, shuffle=True, random_state=derive_seed(self.seed, "fold"))
        return [(np.sort(trn), np.sort(tst)) for trn, tst in splitter.split(np.arange(n))]


@dataclass
class FoldState:
    """Standardized fold-training context and the validation rows on its scale."""
    index: int
    ctx: FitContext
    Y_tst: np.ndarray
    train_loc: Locations
    test_loc: Locations
    kernel_family: Optional[str]
    _K: Dict[Optional[float], Optional[np.ndarray]] = field(default_factory=dict)

    def kernel(self, h: Optional[float]) -> Optional[KernelSpec]:
        if self.kernel_family is None or not self.ctx.data.has_covariates:
            return None
        return KernelSpec(self.kernel_family, h) if h is not None else self.ctx.kernel

    def K(self, h: Optional[float]) -> Optional[np.ndarray]:
        if h not in self._K:
            spec = self.kernel(h)
            self._K[h] = kernel_matrix(spec, self.ctx.X) if spec is not None else None
        return self._K[h]

    def residuals(self, previous: Sequence[GridPoint]) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
        """Training and validation residuals after refitting the frozen components, plus their loadings."""
        Y_l = self.ctx.Y.copy()
        Y_tst = self.Y_tst.copy()
        loadings = []
        for point in previous:
            V = np.column_stack(loadings) if loadings else None
            comp = ComponentSolver(Y_l, self.K(point.h), self.ctx.basis.B, self.ctx.basis.Q, V).solve(point.hyper)
            loadings.append(comp.v)
            Y_l = Y_l - np.outer(comp.u, comp.v)
            Y_tst = Y_tst - np.outer(Y_tst @ comp.v, comp.v)
        return Y_l, Y_tst, (np.column_stack(loadings) if loadings else None)


def prepare_folds(data: Dataset, plan: CVPlan, kernel: Optional[KernelSpec], spline_m: Optional[int] = None) -> List[FoldState]:
    states = []
    for i, (trn, tst) in enumerate(plan.folds(data.n)):
        train, test = data.subset(trn), data.subset(tst)
        ctx = FitContext.build(train, kernel=kernel, spline_m=spline_m)
        X_tst = ctx.x_stats.transform(test.X) if data.has_covariates else None
        states.append(FoldState(
            index=i,
            ctx=ctx,
            Y_tst=ctx.y_stats.transform(test.Y),
            train_loc=Locations(train.coords, ctx.X if data.has_covariates else None),
            test_loc=Locations(test.coords, X_tst),
            kernel_family=kernel.family if kernel is not None else None,
        ))
    return states


def _fold_score(metric: str, Y_tst_l: np.ndarray, u_hat: np.ndarray, v: np.ndarray) -> float:
    n_tst = Y_tst_l.shape[0]
    u_star = Y_tst_l @ v
    if metric == "tmse":
        return tmse_component(Y_tst_l, u_hat, v)
    if metric == "mspe":
        return float(np.sum((u_hat - u_star) ** 2) / n_tst)
    return float(np.linalg.norm(Y_tst_l - np.outer(u_star, v)) ** 2 / n_tst)


def _predict_component(state: FoldState, comp: PCComponent, h: Optional[float], params: PredictorParams, l: int) -> np.ndarray:
    task = ScoreTask(
        train=state.train_loc,
        u=comp.u,
        test=state.test_loc,
        alpha=comp.alpha,
        beta=comp.beta,
        basis=state.ctx.basis,
        kernel=state.kernel(h),
    )
    fold_params = replace(params, forest=replace(params.forest, seed=derive_seed(params.forest.seed, "tree", l, state.index)))
    return get_predictor(params.name)(task, fold_params)


@dataclass(frozen=True)
class TuneResult:
    component: int
    best: GridPoint
    score: float
    table: pd.DataFrame


def _score_table(points: List[GridPoint], fold_scores: np.ndarray, with_h: bool) -> pd.DataFrame:
    rows = []
    for point, scores in zip(points, fold_scores):
        base = {"gamma": point.hyper.gamma, "lambda1": point.hyper.lambda1, "ratio": point.hyper.ratio}
        if with_h:
            base["h"] = point.h
        for fold, score in enumerate(scores, start=1):
            rows.append({**base, "fold": str(fold), "score": float(score)})
        rows.append({**base, "fold": "mean", "score": float(np.mean(scores))})
    return pd.DataFrame(rows)


def cv_tune_component(
    l: int,
    previous: Sequence[GridPoint],
    folds: List[FoldState],
    grid: TuningGrid,
    plan: CVPlan,
    predictor: Optional[PredictorParams] = None,
    max_workers: int = 1,
) -> TuneResult:
    """
    Select the hyperparameters of component l (0-based) by K-fold CV.

    Args:
        l: component index; ``previous`` must hold the l selections before it
        previous: frozen GridPoints of components 0..l−1
        folds: fold states from prepare_folds
        grid: candidate combinations
        plan: fold plan and metric
        predictor: validation-side score predictor
        max_workers: grid points evaluated concurrently

    Returns:
        TuneResult with the argmin (ties toward smaller γ, λ₁, λ₂, h) and the full score table
    """
    if len(previous) != l:
        raise ParameterError(f"component {l + 1} needs {l} frozen predecessors, got {len(previous)}")
    predictor = predictor or PredictorParams()
    points = grid.points()
    hs = sorted({p.h for p in points}, key=lambda h: -1.0 if h is None else h)

    solvers: Dict[Tuple[int, Optional[float]], ComponentSolver] = {}
    tests: Dict[int, np.ndarray] = {}
    for state in folds:
        Y_l, Y_tst_l, V_prev = state.residuals(previous)
        tests[state.index] = Y_tst_l
        for h in hs:
            solvers[state.index, h] = ComponentSolver(Y_l, state.K(h), state.ctx.basis.B, state.ctx.basis.Q, V_prev)

    def evaluate(point: GridPoint) -> np.ndarray:
        scores = np.empty(len(folds))
        for i, state in enumerate(folds):
            comp = solvers[state.index, point.h].solve(point.hyper)
            u_hat = _predict_component(state, comp, point.h, predictor, l)
            scores[i] = _fold_score(plan.metric, tests[state.index], u_hat, comp.v)
        return scores

    progress("tune", f"PC{l + 1}: {len(points)} combinations x {len(folds)} folds")
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            fold_scores = np.array(list(executor.map(evaluate, points)))
    else:
        fold_scores = np.array([evaluate(p) for p in points])

    means = fold_scores.mean(axis=1)
    best_idx = min(range(len(points)), key=lambda i: (means[i], points[i].sort_key()))
    best = points[best_idx]
    logger.info(f"PC{l + 1}: selected gamma={best.hyper.gamma:g} lambda1={best.hyper.lambda1:g} "
                f"lambda2={best.hyper.lambda2:g}{'' if best.h is None else f' h={best.h:g}'} "
                f"(CV {plan.metric}={means[best_idx]:.6g})")
    return TuneResult(
        component=l + 1,
        best=best,
        score=float(means[best_idx]),
        table=_score_table(points, fold_scores, with_h=any(p.h is not None for p in points)),
    )


def tune_components(
    data: Dataset,
    r: int,
    grid: TuningGrid,
    plan: CVPlan,
    kernel: Optional[KernelSpec] = None,
    spline_m: Optional[int] = None,
    predictor: Optional[PredictorParams] = None,
    max_workers: int = 1,
) -> List[TuneResult]:
    """Sequential protocol over components 1..r."""
    folds = prepare_folds(data, plan, kernel, spline_m)
    results: List[TuneResult] = []
    for l in range(r):
        results.append(cv_tune_component(l, [res.best for res in results], folds, grid, plan, predictor, max_workers))
        if l == 0 and results[0].best.h is not None:
            # one kernel per model: later components keep the bandwidth chosen for PC1
            grid = replace(grid, bandwidths=(results[0].best.h,))
    return results


def _first_component_metrics(folds: List[FoldState], hyper: Hyperparams, predictor: PredictorParams) -> Dict[str, float]:
    mspe, msre_trn, tmse = [], [], []
    for state in folds:
        Y = state.ctx.Y
        comp = ComponentSolver(Y, state.K(None), state.ctx.basis.B, state.ctx.basis.Q).solve(hyper)
        u_hat = _predict_component(state, comp, None, predictor, 0)
        mspe.append(_fold_score("mspe", state.Y_tst, u_hat, comp.v))
        tmse.append(_fold_score("tmse", state.Y_tst, u_hat, comp.v))
        msre_trn.append(float(np.linalg.norm(Y - np.outer(comp.u, comp.v)) ** 2 / Y.shape[0]))
    return {"mspe": float(np.mean(mspe)), "msre_trn": float(np.mean(msre_trn)), "tmse": float(np.mean(tmse))}


def _hyper(gamma: float, lambda1: float, ratio: float, delta: Optional[float]) -> Hyperparams:
    return Hyperparams.from_ratio(gamma, lambda1, ratio, **({"delta": delta} if delta is not None else {}))


def gamma_sweep(
    data: Dataset,
    gammas: Sequence[float],
    lambda1: float,
    ratio: float,
    plan: CVPlan,
    kernel: Optional[KernelSpec] = None,
    spline_m: Optional[int] = None,
    predictor: Optional[PredictorParams] = None,
    delta: Optional[float] = None,
) -> pd.DataFrame:
    """
    First-component MSPE, training representation error and TMSE across γ
    with λ₁ and λ₂/λ₁ fixed, averaged over folds.
    """
    predictor = predictor or PredictorParams()
    folds = prepare_folds(data, plan, kernel, spline_m)
    rows = []
    for gamma in gammas:
        rows.append({"gamma": float(gamma), **_first_component_metrics(folds, _hyper(gamma, lambda1, ratio, delta), predictor)})
        progress("gamma-sweep", f"gamma={gamma:g}: mspe={rows[-1]['mspe']:.4g} msre_trn={rows[-1]['msre_trn']:.4g}")
    return pd.DataFrame(rows)


def lambda_sweep(
    data: Dataset,
    lambda1s: Sequence[float],
    ratios: Sequence[float],
    gammas: Sequence[float],
    plan: CVPlan,
    kernel: Optional[KernelSpec] = None,
    spline_m: Optional[int] = None,
    predictor: Optional[PredictorParams] = None,
    delta: Optional[float] = None,
) -> pd.DataFrame:
    """
    First-component error surface over λ₁ × λ₂/λ₁. Each cell reports the γ
    with the lowest mean CV TMSE (ties toward smaller γ) and its metrics.

    Returns:
        one row per cell: lambda1, ratio, lambda2, gamma, tmse, mspe, msre_trn
    """
    if not lambda1s or not ratios or not gammas:
        raise ParameterError("lambda sweep needs nonempty lambda1, ratio and gamma lists")
    predictor = predictor or PredictorParams()
    folds = prepare_folds(data, plan, kernel, spline_m)
    rows = []
    for lambda1 in lambda1s:
        for ratio in ratios:
            cell = [(float(g), _first_component_metrics(folds, _hyper(g, lambda1, ratio, delta), predictor))
                    for g in sorted(gammas)]
            gamma, best = min(cell, key=lambda c: (c[1]["tmse"], c[0]))
            rows.append({
                "lambda1": float(lambda1),
                "ratio": float(ratio),
                "lambda2": float(lambda1 * ratio),
                "gamma": gamma,
                "tmse": best["tmse"],
                "mspe": best["mspe"],
                "msre_trn": best["msre_trn"],
            })
            progress("lambda-sweep", f"lambda1={lambda1:g} ratio={ratio:g}: gamma={gamma:g} tmse={best['tmse']:.4g}")
    return pd.DataFrame(rows)
