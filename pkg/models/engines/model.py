"""
Fitted dimension-reduction artifacts and their on-disk bundle.

A bundle directory holds:
    loadings.csv      p×r loadings (one row per outcome variable)
    scores.csv        n×r training scores U_train = Y_std·V
    alpha.csv         n×r kernel coefficients (rappca with covariates only)
    beta.csv          m×r spline coefficients (rappca only)
    train.csv         the training Dataset (needed to rebuild K, B and predictors)
    metadata.yaml     method, hyperparameters, objectives, column statistics
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from sklearn.preprocessing import StandardScaler

from models.basis.kernels import KernelSpec, kernel_cross
from models.basis.splines import SplineBasis, build_tprs, eval_basis
from utils.artifacts import read_csv, read_yaml, write_csv, write_yaml
from utils.dataset import DataSchema, Dataset, ingest_csv, write_dataset
from utils.errors import DataError, ParameterError, check_matrix

__all__ = [
    "METHODS",
    "DEFAULT_DELTA",
    "Hyperparams",
    "ColumnStats",
    "PCComponent",
    "PCModel",
    "fix_sign",
    "project_scores",
    "save_bundle",
    "load_bundle",
]

METHODS = ("classical", "predictive", "rappca")
DEFAULT_DELTA = 0.05


@dataclass(frozen=True)
class Hyperparams:
    gamma: float = 0.0
    lambda1: float = 0.0
    lambda2: float = 0.0
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        for name in ("gamma", "lambda1", "lambda2"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ParameterError(f"{name} must be a finite nonnegative number, got {value}")
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise ParameterError(f"delta must be positive, got {self.delta}")
        if self.lambda1 == 0 and self.lambda2 > 0:
            raise ParameterError("lambda2 > 0 requires lambda1 > 0 (the ratio lambda2/lambda1 must be finite)")

    @classmethod
    def from_ratio(cls, gamma: float, lambda1: float, ratio: float, delta: float = DEFAULT_DELTA) -> "Hyperparams":
        return cls(gamma=gamma, lambda1=lambda1, lambda2=lambda1 * ratio, delta=delta)

    @property
    def ratio(self) -> float:
        return self.lambda2 / self.lambda1 if self.lambda1 > 0 else 0.0

    @property
    def is_zero(self) -> bool:
        return self.gamma == 0 and self.lambda1 == 0 and self.lambda2 == 0

    def key(self) -> Tuple[float, float, float]:
        return (self.gamma, self.lambda1, self.lambda2)


@dataclass(frozen=True)
class ColumnStats:
    """Per-column centering/scaling statistics of a training matrix."""
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, A: np.ndarray, name: str, standardize: bool = True) -> "ColumnStats":
        A = np.asarray(A, dtype=np.float64)
        if not standardize or A.shape[1] == 0:
            return cls.identity(A.shape[1])
        scaler = StandardScaler().fit(A)
        flat = np.flatnonzero(scaler.var_ <= 1e-24 * np.maximum(1.0, scaler.mean_ ** 2))
        if flat.size:
            raise DataError(f"{name} column {int(flat[0]) + 1} has zero variance")
        return cls(mean=scaler.mean_.copy(), scale=scaler.scale_.copy())

    @classmethod
    def identity(cls, p: int) -> "ColumnStats":
        return cls(mean=np.zeros(p), scale=np.ones(p))

    def transform(self, A) -> np.ndarray:
        A = np.asarray(A, dtype=np.float64)
        if A.shape[-1] != self.mean.shape[0]:
            raise DataError(f"expected {self.mean.shape[0]} columns, got {A.shape[-1]}")
        return (A - self.mean) / self.scale

    def inverse_transform(self, A) -> np.ndarray:
        return np.asarray(A, dtype=np.float64) * self.scale + self.mean


@dataclass
class PCComponent:
    v: np.ndarray
    u: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    hyper: Hyperparams
    objective: float


def fix_sign(component: PCComponent) -> PCComponent:
    """Flip the component so the largest-magnitude loading entry is positive."""
    if component.v[np.argmax(np.abs(component.v))] < 0:
        component.v = -component.v
        component.u = -component.u
        component.alpha = -component.alpha
        component.beta = -component.beta
    return component


@dataclass
class PCModel:
    method: str
    components: List[PCComponent]
    y_stats: ColumnStats
    x_stats: Optional[ColumnStats] = None
    kernel: Optional[KernelSpec] = None
    basis: Optional[SplineBasis] = None
    train: Optional[Dataset] = None
    X_train_std: Optional[np.ndarray] = None
    Y_train_std: Optional[np.ndarray] = None
    V: np.ndarray = field(init=False)
    U_train: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"Unknown method '{self.method}'. Must be one of {METHODS}")
        self.V = np.column_stack([c.v for c in self.components])
        if self.Y_train_std is not None:
            self.U_train = self.Y_train_std @ self.V
        else:
            self.U_train = np.column_stack([c.u for c in self.components])

    @property
    def r(self) -> int:
        return len(self.components)

    @property
    def p(self) -> int:
        return self.V.shape[0]

    @property
    def hypers(self) -> List[Hyperparams]:
        return [c.hyper for c in self.components]

    def standardize_outcomes(self, Y) -> np.ndarray:
        return self.y_stats.transform(Y)

    def project_scores(self, Y_new) -> np.ndarray:
        return project_scores(Y_new, self)

    def reconstruct(self, U) -> np.ndarray:
        """Map scores back to the original (unstandardized) outcome scale."""
        return self.y_stats.inverse_transform(np.asarray(U) @ self.V.T)

    def model_space_scores(self, coords, X=None) -> np.ndarray:
        """Evaluate Kα + Bβ for every component at new locations (rappca only)."""
        if self.method != "rappca" or self.basis is None:
            raise ParameterError("model-space scores exist only for fitted rappca models")
        coords = check_matrix(coords, "coords", ncols=2)
        scores = eval_basis(self.basis, coords) @ np.column_stack([c.beta for c in self.components])
        if self.kernel is not None and self.X_train_std is not None and self.X_train_std.shape[1]:
            if X is None:
                raise DataError("covariates are required to evaluate the kernel term")
            X_std = self.x_stats.transform(check_matrix(X, "X", ncols=self.X_train_std.shape[1]))
            K_new = kernel_cross(self.kernel, self.X_train_std, X_std)
            scores = scores + K_new @ np.column_stack([c.alpha for c in self.components])
        return scores


def project_scores(Y_new, model: PCModel) -> np.ndarray:
    """Scores of new observations: standardize with training statistics, then Y_std·V."""
    Y_new = check_matrix(Y_new, "Y_new")
    if Y_new.shape[1] != model.p:
        raise DataError(f"Y_new has {Y_new.shape[1]} columns, the model has {model.p} loadings rows")
    return model.standardize_outcomes(Y_new) @ model.V


def _pc_columns(r: int) -> List[str]:
    return [f"pc{l}" for l in range(1, r + 1)]


def save_bundle(model: PCModel, directory, extra_metadata: dict | None = None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    cols = _pc_columns(model.r)
    names = list(model.train.outcome_names) if model.train is not None else [f"y{j + 1}" for j in range(model.p)]

    loadings = pd.DataFrame(model.V, columns=cols)
    loadings.insert(0, "variable", names)
    write_csv(loadings, directory / "loadings.csv")

    scores = pd.DataFrame(model.U_train, columns=cols)
    if model.train is not None:
        scores.insert(0, "id", model.train.ids)
    write_csv(scores, directory / "scores.csv")

    if model.method == "rappca":
        if model.components[0].alpha.size:
            write_csv(pd.DataFrame(np.column_stack([c.alpha for c in model.components]), columns=cols), directory / "alpha.csv")
        write_csv(pd.DataFrame(np.column_stack([c.beta for c in model.components]), columns=cols), directory / "beta.csv")

    schema = write_dataset(model.train, directory / "train.csv") if model.train is not None else None

    metadata = {
        "method": model.method,
        "r": model.r,
        "components": [
            {**{k: float(v) for k, v in asdict(c.hyper).items()}, "objective": float(c.objective)}
            for c in model.components
        ],
        "kernel": {"family": model.kernel.family, "h": float(model.kernel.h)} if model.kernel else None,
        "spline_m": int(model.basis.m) if model.basis is not None else None,
        "y_mean": model.y_stats.mean.tolist(),
        "y_scale": model.y_stats.scale.tolist(),
        "x_mean": model.x_stats.mean.tolist() if model.x_stats is not None else [],
        "x_scale": model.x_stats.scale.tolist() if model.x_stats is not None else [],
        "schema": asdict(schema) if schema else None,
    }
    if extra_metadata:
        metadata.update(extra_metadata)
    write_yaml(metadata, directory / "metadata.yaml")


def load_bundle(directory) -> PCModel:
    """Rebuild a PCModel from a bundle; K and B are recomputed from train.csv."""
    directory = Path(directory)
    if not (directory / "metadata.yaml").exists():
        raise DataError(f"{directory} is not a model bundle (metadata.yaml missing)")
    meta = read_yaml(directory / "metadata.yaml")
    loadings = read_csv(directory / "loadings.csv")
    V = loadings.drop(columns=["variable"]).to_numpy(dtype=np.float64)
    r = V.shape[1]
    cols = _pc_columns(r)

    train = ingest_csv(str(directory / "train.csv"), DataSchema(**meta["schema"])) if meta.get("schema") else None
    y_stats = ColumnStats(mean=np.asarray(meta["y_mean"]), scale=np.asarray(meta["y_scale"]))
    x_stats = ColumnStats(mean=np.asarray(meta["x_mean"]), scale=np.asarray(meta["x_scale"]))

    alpha = beta = None
    if (directory / "alpha.csv").exists():
        alpha = read_csv(directory / "alpha.csv")[cols].to_numpy(dtype=np.float64)
    if (directory / "beta.csv").exists():
        beta = read_csv(directory / "beta.csv")[cols].to_numpy(dtype=np.float64)

    Y_std = y_stats.transform(train.Y) if train is not None else None
    components = []
    for l, comp_meta in enumerate(meta["components"]):
        hyper = Hyperparams(**{k: comp_meta[k] for k in ("gamma", "lambda1", "lambda2", "delta")})
        components.append(PCComponent(
            v=V[:, l],
            u=Y_std @ V[:, l] if Y_std is not None else np.zeros(0),
            alpha=alpha[:, l] if alpha is not None else np.zeros(0),
            beta=beta[:, l] if beta is not None else np.zeros(0),
            hyper=hyper,
            objective=comp_meta["objective"],
        ))

    kernel = KernelSpec(**meta["kernel"]) if meta.get("kernel") else None
    basis = build_tprs(train.coords, meta["spline_m"]) if meta.get("spline_m") and train is not None else None
    X_std = x_stats.transform(train.X) if train is not None and train.d else None
    return PCModel(
        method=meta["method"],
        components=components,
        y_stats=y_stats,
        x_stats=x_stats,
        kernel=kernel,
        basis=basis,
        train=train,
        X_train_std=X_std,
        Y_train_std=Y_std,
    )
