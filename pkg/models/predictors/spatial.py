"""
Score prediction at unmeasured locations.

The default predictor is two-step: a random forest on [coords, X] followed
by thin-plate spline smoothing of the forest's training residuals. Predictors
are registered by name so alternatives plug in without touching the engines.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional

import numpy as np
from scipy.spatial import Delaunay, QhullError

from models.basis.kernels import KernelSpec, kernel_cross
from models.basis.splines import SplineBasis, build_tprs, eval_basis, smooth_fit
from models.engines.model import PCModel
from models.predictors.forest import ForestParams, rf_fit, rf_predict
from utils.errors import DataError, ParameterError, check_matrix
from utils.logger import logger
from utils.seeding import derive_seed

__all__ = [
    "RESIDUAL_SPLINE_CAP",
    "MIN_FOREST_ROWS",
    "Locations",
    "ScoreTask",
    "PredictorParams",
    "SpatialPredictor",
    "two_step_fit_predict",
    "spline_only_fit_predict",
    "register_predictor",
    "get_predictor",
    "available_predictors",
    "predict_scores",
]

RESIDUAL_SPLINE_CAP = 100
MIN_FOREST_ROWS = 10


@dataclass(frozen=True)
class Locations:
    """Coordinates plus covariates on the scale the predictor was trained with."""
    coords: np.ndarray
    X: Optional[np.ndarray] = None

    def __post_init__(self):
        coords = check_matrix(self.coords, "coords", ncols=2)
        X = np.zeros((0, 0)) if self.X is None else np.asarray(self.X, dtype=np.float64)
        if X.size == 0:
            X = np.zeros((coords.shape[0], 0))
        X = check_matrix(X, "X") if X.shape[1] else X
        if X.shape[0] != coords.shape[0]:
            raise DataError(f"covariates have {X.shape[0]} rows, coordinates have {coords.shape[0]}")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def features(self) -> np.ndarray:
        return np.hstack([self.coords, self.X])


@dataclass(frozen=True)
class ScoreTask:
    """One score column to predict, plus the model-space terms when available."""
    train: Locations
    u: np.ndarray
    test: Locations
    alpha: np.ndarray = field(default_factory=lambda: np.zeros(0))
    beta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    basis: Optional[SplineBasis] = None
    kernel: Optional[KernelSpec] = None


@dataclass(frozen=True)
class PredictorParams:
    name: str = "two_step"
    forest: ForestParams = field(default_factory=ForestParams)
    spline_m: Optional[int] = None
    max_workers: int = 1


def _residual_spline_dim(n: int, requested: Optional[int]) -> int:
    m = min(n, RESIDUAL_SPLINE_CAP) if requested is None else min(int(requested), n)
    return max(m, 4)


def _warn_extrapolation(train: Locations, test: Locations) -> None:
    try:
        outside = int(np.sum(Delaunay(train.coords).find_simplex(test.coords) < 0))
    except QhullError:
        return
    if outside:
        logger.warning(f"{outside} of {test.n} prediction locations lie outside the training hull (extrapolating)")


class SpatialPredictor:
    """Forest over [coords, X] plus a GCV-smoothed TPRS surface of its residuals."""

    def __init__(self, forest_params: ForestParams, m_spline: Optional[int] = None):
        self.forest_params = forest_params
        self.m_spline = m_spline
        self.forest = None
        self.basis: Optional[SplineBasis] = None
        self.coef: Optional[np.ndarray] = None
        self.lam: Optional[float] = None
        self.n_features: Optional[int] = None

    @property
    def spline_only(self) -> bool:
        return self.forest is None

    def fit(self, train: Locations, u) -> "SpatialPredictor":
        u = np.asarray(u, dtype=np.float64).ravel()
        if u.shape[0] != train.n:
            raise DataError(f"score vector has {u.shape[0]} entries, training set has {train.n} locations")
        if not np.isfinite(u).all():
            raise DataError("scores to predict contain non-finite values")
        self.n_features = train.features().shape[1]

        residual = u
        if train.n < MIN_FOREST_ROWS:
            logger.warning(f"Only {train.n} training locations; two-step predictor degraded to spline-only")
        else:
            self.forest = rf_fit(train.features(), u, self.forest_params)
            residual = u - rf_predict(self.forest, train.features())

        self.basis = build_tprs(train.coords, _residual_spline_dim(train.n, self.m_spline))
        self.coef, self.lam = smooth_fit(self.basis, residual, lam="gcv", return_lambda=True)
        return self

    def predict(self, test: Locations) -> np.ndarray:
        if self.basis is None:
            raise ParameterError("SpatialPredictor.predict called before fit")
        features = test.features()
        if features.shape[1] != self.n_features:
            raise DataError(f"predictor was trained on {self.n_features} features, got {features.shape[1]}")
        surface = eval_basis(self.basis, test.coords) @ self.coef
        if self.forest is None:
            return surface
        return rf_predict(self.forest, features) + surface


def two_step_fit_predict(train: Locations, u, test: Locations, forest_params: ForestParams, m_spline: Optional[int] = None) -> np.ndarray:
    """
    Fit forest then residual spline on (train, u) and predict at test.

    Returns:
        n*-vector of predicted scores
    """
    _warn_extrapolation(train, test)
    return SpatialPredictor(forest_params, m_spline).fit(train, u).predict(test)


def spline_only_fit_predict(train: Locations, u, test: Locations, m_spline: Optional[int] = None) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64).ravel()
    basis = build_tprs(train.coords, _residual_spline_dim(train.n, m_spline))
    coef = smooth_fit(basis, u, lam="gcv")
    return eval_basis(basis, test.coords) @ coef


_PREDICTORS: Dict[str, Callable[[ScoreTask, PredictorParams], np.ndarray]] = {}


def register_predictor(name: str):
    def decorator(fn):
        _PREDICTORS[name] = fn
        return fn
    return decorator


def get_predictor(name: str) -> Callable[[ScoreTask, PredictorParams], np.ndarray]:
    if name not in _PREDICTORS:
        raise ParameterError(f"Unknown predictor '{name}'. Must be one of {available_predictors()}")
    return _PREDICTORS[name]


def available_predictors():
    return sorted(_PREDICTORS)


@register_predictor("two_step")
def _predict_two_step(task: ScoreTask, params: PredictorParams) -> np.ndarray:
    return two_step_fit_predict(task.train, task.u, task.test, params.forest, params.spline_m)


@register_predictor("spline")
def _predict_spline(task: ScoreTask, params: PredictorParams) -> np.ndarray:
    return spline_only_fit_predict(task.train, task.u, task.test, params.spline_m)


@register_predictor("model_space")
def _predict_model_space(task: ScoreTask, params: PredictorParams) -> np.ndarray:
    """Kα + Bβ evaluated at the test locations (RapPCA components only)."""
    if task.basis is None or task.beta.size == 0:
        raise ParameterError("the model_space predictor needs a fitted rappca component")
    scores = eval_basis(task.basis, task.test.coords) @ task.beta
    if task.kernel is not None and task.alpha.size:
        scores = scores + kernel_cross(task.kernel, task.train.X, task.test.X) @ task.alpha
    return scores


def predict_scores(model: PCModel, coords, X=None, params: Optional[PredictorParams] = None) -> np.ndarray:
    """
    Predict every score column of a fitted model at new locations.

    Args:
        model: fitted PCModel with its training Dataset attached
        coords: n*×2 prediction coordinates
        X: n*×d covariates on the original scale (required when the model has covariates)
        params: predictor choice and settings

    Returns:
        n*×r predicted scores on the standardized scale
    """
    params = params or PredictorParams()
    if model.train is None:
        raise DataError("score prediction needs the model's training data")
    predictor = get_predictor(params.name)

    train = Locations(model.train.coords, model.x_stats.transform(model.train.X) if model.train.d else None)
    if model.train.d:
        if X is None:
            raise DataError(f"the model was trained with {model.train.d} covariates; none were given")
        X_new = model.x_stats.transform(check_matrix(X, "X", ncols=model.train.d))
    else:
        X_new = None
    test = Locations(coords, X_new)

    def task_for(l: int) -> ScoreTask:
        comp = model.components[l]
        return ScoreTask(
            train=train,
            u=model.U_train[:, l],
            test=test,
            alpha=comp.alpha,
            beta=comp.beta,
            basis=model.basis,
            kernel=model.kernel,
        )

    def run(l: int) -> np.ndarray:
        column_params = replace(params, forest=replace(params.forest, seed=derive_seed(params.forest.seed, "tree", l)))
        return predictor(task_for(l), column_params)

    if params.max_workers > 1 and model.r > 1:
        with ThreadPoolExecutor(max_workers=params.max_workers) as executor:
            columns = list(executor.map(run, range(model.r)))
    else:
        columns = [run(l) for l in range(model.r)]
    logger.debug(f"Predicted {model.r} score columns at {test.n} locations with '{params.name}'")
    return np.column_stack(columns)
