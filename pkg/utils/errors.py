"""
Exception hierarchy shared by all modules and the mapping to CLI exit codes.
"""

import numpy as np

__all__ = [
    "RapPCAError",
    "ConfigError",
    "ParameterError",
    "DataError",
    "NumericalError",
    "RankError",
    "exit_code_for",
    "check_finite",
    "check_matrix",
]

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class RapPCAError(Exception):
    """Base class for every error raised on purpose by this package."""
    exit_code = EXIT_UNEXPECTED


class ConfigError(RapPCAError, ValueError):
    """Invalid or incomplete configuration."""
    exit_code = EXIT_CONFIG


class ParameterError(ConfigError):
    """Hyperparameter combination outside its valid domain."""


class DataError(RapPCAError, ValueError):
    """Malformed input data: shapes, non-finite values, missing columns."""
    exit_code = EXIT_DATA


class NumericalError(RapPCAError, RuntimeError):
    """A numerical routine failed or produced unusable output."""
    exit_code = EXIT_NUMERICAL


class RankError(NumericalError):
    """Rank deficiency that cannot be repaired (collinear coordinates, singular systems)."""


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, RapPCAError):
        return exc.exit_code
    return EXIT_UNEXPECTED


def check_finite(array, name: str) -> np.ndarray:
    """Return ``array`` as float64, raising DataError on NaN/inf with the first bad index."""
    arr = np.asarray(array, dtype=np.float64)
    bad = ~np.isfinite(arr)
    if bad.any():
        where = tuple(int(i) for i in np.argwhere(bad)[0])
        raise DataError(f"{name} contains non-finite values (first at index {where})")
    return arr


def check_matrix(array, name: str, ncols: int | None = None, min_rows: int = 1) -> np.ndarray:
    arr = check_finite(array, name)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DataError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if arr.shape[0] < min_rows:
        raise DataError(f"{name} needs at least {min_rows} rows, got {arr.shape[0]}")
    if ncols is not None and arr.shape[1] != ncols:
        raise DataError(f"{name} must have {ncols} columns, got {arr.shape[1]}")
    return arr
