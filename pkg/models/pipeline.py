"""
Method dispatch, K-fold evaluation and score prediction for fitted models.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from models.basis.kernels import KernelSpec
from models.basis.splines import build_tprs
from models.engines.context import PREDICTIVE_SPLINE_DIM, FitContext, rappca_spline_dim
from models.engines.model import METHODS, Hyperparams, PCModel
from models.engines.pca import classical_components, predictive_components, check_rank
from models.engines.rappca import rappca_fit
from models.predictors.spatial import PredictorParams, predict_scores
from models.tuning.cv import CVPlan
from utils.dataset import Dataset
from utils.errors import ParameterError
from utils.logger import logger, progress
from utils.metrics import MetricsReport, aggregate_reports, compute_metrics
from utils.seeding import derive_seed

__all__ = ["MethodSpec", "fit_method", "predict_new", "FoldEvaluation", "evaluate_folds"]


@dataclass(frozen=True)
class MethodSpec:
    """Everything needed to fit one method; a single Hyperparams is broadcast to all r components."""
    method: str = "rappca"
    r: int = 3
    hypers: Tuple[Hyperparams, ...] = (Hyperparams(),)
    kernel: Optional[KernelSpec] = field(default_factory=KernelSpec)
    spline_m: Optional[int] = None
    standardize: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"Unknown method '{self.method}'. Must be one of {METHODS}")
        if not self.hypers:
            raise ParameterError("at least one hyperparameter combination is required")
        object.__setattr__(self, "hypers", tuple(self.hypers))

    def hypers_for(self, r: int) -> List[Hyperparams]:
        if len(self.hypers) == 1:
            return [self.hypers[0]] * r
        if len(self.hypers) < r:
            raise ParameterError(f"{len(self.hypers)} hyperparameter sets given for {r} components")
        return list(self.hypers[:r])

    def with_rank(self, r: int) -> "MethodSpec":
        return replace(self, r=r)


def fit_method(data: Dataset, spec: MethodSpec) -> PCModel:
    """
    Fit the method named by spec on a training Dataset. Every returned model
    carries its training data and covariate statistics so scores can be
    predicted at new locations.
    """
    check_rank(spec.r, data.n, data.p)
    if spec.method == "rappca":
        basis = build_tprs(data.coords, rappca_spline_dim(data.n, spec.spline_m))
        return rappca_fit(data, spec.kernel, basis, spec.hypers_for(spec.r), spec.r, standardize=spec.standardize)

    if spec.method == "classical":
        ctx = FitContext.build(data, standardize=spec.standardize, with_basis=False)
        components = classical_components(ctx.Y, spec.r)
    else:
        m = min(PREDICTIVE_SPLINE_DIM, data.n)
        ctx = FitContext.build(data, basis=build_tprs(data.coords, m), standardize=spec.standardize)
        components = predictive_components(ctx.Y, ctx.predictive_design(), spec.r)
    return PCModel(
        method=spec.method,
        components=components,
        y_stats=ctx.y_stats,
        x_stats=ctx.x_stats,
        train=data,
        X_train_std=ctx.X,
        Y_train_std=ctx.Y,
    )


def predict_new(model: PCModel, coords, X=None, params: Optional[PredictorParams] = None):
    """Predicted scores (standardized scale) and reconstructed outcomes Ŷ = ÛV⊤ (original scale)."""
    U_hat = predict_scores(model, coords, X, params)
    return U_hat, model.reconstruct(U_hat)


@dataclass(frozen=True)
class FoldEvaluation:
    method: str
    reports: List[MetricsReport]

    def table(self) -> pd.DataFrame:
        frame = aggregate_reports(self.reports)
        frame.insert(0, "method", self.method)
        return frame


def _evaluate_fold(data: Dataset, spec: MethodSpec, trn: np.ndarray, tst: np.ndarray, params: PredictorParams) -> MetricsReport:
    train, test = data.subset(trn), data.subset(tst)
    model = fit_method(train, spec)
    U_hat = predict_scores(model, test.coords, test.X if test.d else None, params)
    return compute_metrics(model.standardize_outcomes(test.Y), model.V, U_hat, model.Y_train_std, model.U_train)


def evaluate_folds(
    data: Dataset,
    specs: Sequence[MethodSpec],
    plan: CVPlan,
    predictor: Optional[PredictorParams] = None,
    max_workers: int = 1,
) -> Dict[str, FoldEvaluation]:
    """
    K-fold evaluation of one or more methods on the same folds.

    Returns:
        method name -> FoldEvaluation (per-fold MetricsReports; table() adds mean and sd rows)
    """
    predictor = predictor or PredictorParams()
    folds = plan.folds(data.n)
    results: Dict[str, FoldEvaluation] = {}
    for spec in specs:
        def run(i: int) -> MetricsReport:
            trn, tst = folds[i]
            params = replace(predictor, forest=replace(predictor.forest, seed=derive_seed(predictor.forest.seed, "fold", i)))
            return _evaluate_fold(data, spec, trn, tst, params)

        if max_workers > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as executor:
                reports = list(executor.map(run, range(len(folds))))
        else:
            reports = [run(i) for i in range(len(folds))]
        results[spec.method] = FoldEvaluation(spec.method, reports)
        mean_tmse = float(np.mean([rep.tmse for rep in reports]))
        progress("evaluate", f"{spec.method}: mean TMSE {mean_tmse:.4g} over {len(folds)} folds", done=True)
    logger.debug(f"Evaluated methods {[s.method for s in specs]} on {data.n} rows")
    return results
