"""
The universal input record (outcomes, coordinates, optional covariates) and
its CSV representation.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from utils.errors import DataError
from utils.logger import logger

__all__ = ["DataSchema", "Dataset", "ingest_csv", "ingest_locations", "write_dataset", "dataset_frame"]

MIN_ROWS = 4


@dataclass
class DataSchema:
    """Column roles of a CSV file."""
    coord_cols: List[str]
    outcome_cols: List[str]
    covariate_cols: List[str] = field(default_factory=list)
    id_col: Optional[str] = "id"

    def __post_init__(self):
        if len(self.coord_cols) != 2:
            raise DataError(f"exactly two coordinate columns are required, got {self.coord_cols}")
        if not self.outcome_cols:
            raise DataError("at least one outcome column is required")


@dataclass(frozen=True)
class Dataset:
    ids: np.ndarray
    coords: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    coord_names: tuple = ("s1", "s2")
    covariate_names: tuple = ()
    outcome_names: tuple = ()

    def __post_init__(self):
        n = self.Y.shape[0]
        if self.coords.shape != (n, 2):
            raise DataError(f"coords must be {n}x2, got {self.coords.shape}")
        if self.X.shape[0] != n:
            raise DataError(f"covariates have {self.X.shape[0]} rows, outcomes have {n}")
        if len(self.ids) != n:
            raise DataError(f"{len(self.ids)} ids for {n} rows")
        if n < MIN_ROWS:
            raise DataError(f"a dataset needs at least {MIN_ROWS} rows, got {n}")
        if self.Y.shape[1] < 1:
            raise DataError("a dataset needs at least one outcome column")
        for name, arr in (("coords", self.coords), ("covariates", self.X), ("outcomes", self.Y)):
            if arr.size and not np.isfinite(arr).all():
                raise DataError(f"{name} contain non-finite values")
        if not self.covariate_names and self.X.shape[1]:
            object.__setattr__(self, "covariate_names", tuple(f"x{j + 1}" for j in range(self.X.shape[1])))
        if not self.outcome_names:
            object.__setattr__(self, "outcome_names", tuple(f"y{j + 1}" for j in range(self.Y.shape[1])))

    @classmethod
    def from_arrays(cls, Y, coords, X=None, ids=None, **names) -> "Dataset":
        Y = np.asarray(Y, dtype=np.float64)
        if Y.ndim == 1:
            Y = Y.reshape(-1, 1)
        n = Y.shape[0]
        X = np.zeros((n, 0)) if X is None else np.asarray(X, dtype=np.float64).reshape(n, -1)
        ids = np.array([str(i + 1) for i in range(n)]) if ids is None else np.asarray(ids, dtype=str)
        return cls(ids=ids, coords=np.asarray(coords, dtype=np.float64), X=X, Y=Y, **names)

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def p(self) -> int:
        return self.Y.shape[1]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def has_covariates(self) -> bool:
        return self.d > 0

    def subset(self, rows: Sequence[int]) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            ids=self.ids[rows],
            coords=self.coords[rows],
            X=self.X[rows],
            Y=self.Y[rows],
            coord_names=self.coord_names,
            covariate_names=self.covariate_names,
            outcome_names=self.outcome_names,
        )


def _parse_cell(cell: str) -> float:
    try:
        return float(cell)
    except ValueError:
        return np.nan


def _numeric_column(frame: pd.DataFrame, col: str, path: str) -> np.ndarray:
    # float() is correctly rounded, so %.17g output reads back bit-identical
    raw = frame[col]
    values = raw.str.strip().map(_parse_cell).to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise DataError(f"{path}: non-numeric or non-finite cell {raw.iloc[row]!r} at row {row + 1}, column '{col}'")
    return values


def _read_frame(path: str, declared: List[str], id_col: Optional[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise DataError(f"data file not found: {path}")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"cannot parse {path}: {e}")
    missing = [c for c in declared + ([id_col] if id_col else []) if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")
    return frame


def _ids(frame: pd.DataFrame, id_col: Optional[str], path: str) -> np.ndarray:
    if not id_col:
        return np.array([str(i + 1) for i in range(len(frame))])
    ids = frame[id_col].str.strip().to_numpy(dtype=str)
    dup = pd.Index(ids).duplicated()
    if dup.any():
        raise DataError(f"{path}: duplicate id '{ids[np.flatnonzero(dup)[0]]}'")
    return ids


def _block(frame: pd.DataFrame, cols: Sequence[str], path: str) -> np.ndarray:
    if not cols:
        return np.zeros((len(frame), 0))
    return np.column_stack([_numeric_column(frame, c, path) for c in cols])


def ingest_csv(path: str, schema: DataSchema) -> Dataset:
    """
    Parse a headed CSV into a Dataset. Values are validated but not standardized.

    Args:
        path: CSV file with a header row
        schema: column roles

    Returns:
        Dataset
    """
    frame = _read_frame(path, list(schema.coord_cols) + list(schema.covariate_cols) + list(schema.outcome_cols), schema.id_col)
    ids = _ids(frame, schema.id_col, path)

    def block(cols):
        return _block(frame, cols, path)

    dataset = Dataset(
        ids=ids,
        coords=block(schema.coord_cols),
        X=block(schema.covariate_cols),
        Y=block(schema.outcome_cols),
        coord_names=tuple(schema.coord_cols),
        covariate_names=tuple(schema.covariate_cols),
        outcome_names=tuple(schema.outcome_cols),
    )
    logger.info(f"Loaded {path}: n={dataset.n}, p={dataset.p}, d={dataset.d}")
    return dataset


def dataset_frame(dataset: Dataset, id_col: str = "id") -> pd.DataFrame:
    columns = {id_col: dataset.ids}
    for j, name in enumerate(dataset.coord_names):
        columns[name] = dataset.coords[:, j]
    for j, name in enumerate(dataset.covariate_names):
        columns[name] = dataset.X[:, j]
    for j, name in enumerate(dataset.outcome_names):
        columns[name] = dataset.Y[:, j]
    return pd.DataFrame(columns)


def write_dataset(dataset: Dataset, path: str, id_col: str = "id") -> DataSchema:
    """Write a Dataset with full float precision and return the schema to read it back."""
    dataset_frame(dataset, id_col).to_csv(path, index=False, float_format="%.17g")
    return DataSchema(
        coord_cols=list(dataset.coord_names),
        outcome_cols=list(dataset.outcome_names),
        covariate_cols=list(dataset.covariate_names),
        id_col=id_col,
    )


def ingest_locations(path: str, coord_cols: Sequence[str], covariate_cols: Sequence[str] = (), id_col: Optional[str] = "id"):
    """
    Read prediction locations (ids, coordinates and covariates, no outcomes).

    Returns:
        (ids, coords n*×2, X n*×d)
    """
    frame = _read_frame(path, list(coord_cols) + list(covariate_cols), id_col)
    if frame.empty:
        raise DataError(f"{path}: no locations to predict")
    return _ids(frame, id_col, path), _block(frame, coord_cols, path), _block(frame, covariate_cols, path)
