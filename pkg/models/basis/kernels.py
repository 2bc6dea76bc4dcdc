"""
Kernel functions and kernel matrices encoding covariate similarity.

    linear      k(x, x') = x⊤x'
    polynomial  k(x, x') = (1 + x⊤x')^h
    gaussian    k(x, x') = exp(-h‖x − x'‖²)
"""

from dataclasses import dataclass

import numpy as np
from sklearn.metrics.pairwise import linear_kernel, polynomial_kernel, rbf_kernel

from utils.errors import DataError, ParameterError, check_matrix

__all__ = ["KERNEL_FAMILIES", "KernelSpec", "kernel_eval", "kernel_matrix", "kernel_cross"]

KERNEL_FAMILIES = ("linear", "polynomial", "gaussian")


@dataclass(frozen=True)
class KernelSpec:
    family: str = "linear"
    h: float = 1.0

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ParameterError(f"Unknown kernel family '{self.family}'. Must be one of {KERNEL_FAMILIES}")
        if self.family == "polynomial" and (self.h < 1 or float(self.h) != int(self.h)):
            raise ParameterError(f"polynomial kernel degree must be a positive integer, got {self.h}")
        if self.family == "gaussian" and not self.h > 0:
            raise ParameterError(f"gaussian kernel bandwidth must be positive, got {self.h}")

    def __str__(self):
        return self.family if self.family == "linear" else f"{self.family}(h={self.h:g})"


def _pairwise(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if spec.family == "linear":
        return linear_kernel(A, B)
    if spec.family == "polynomial":
        return polynomial_kernel(A, B, degree=int(spec.h), gamma=1.0, coef0=1.0)
    return rbf_kernel(A, B, gamma=float(spec.h))


def kernel_eval(spec: KernelSpec, x, x2) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    x2 = np.atleast_1d(np.asarray(x2, dtype=np.float64))
    if x.ndim != 1 or x.shape != x2.shape or x.size == 0:
        raise DataError(f"kernel_eval needs two vectors of equal length >= 1, got {x.shape} and {x2.shape}")
    check_matrix(x[None, :], "x")
    check_matrix(x2[None, :], "x2")
    return float(_pairwise(spec, x[None, :], x2[None, :])[0, 0])


def kernel_matrix(spec: KernelSpec, X) -> np.ndarray:
    """n×n Gram matrix. The lower triangle mirrors the upper one so K == K.T bitwise."""
    X = check_matrix(X, "X")
    K = _pairwise(spec, X, X)
    upper = np.triu(K)
    return upper + np.triu(K, 1).T


def kernel_cross(spec: KernelSpec, X_train, X_new) -> np.ndarray:
    """n*×n matrix with entry (i, j) = k(X_new[i], X_train[j])."""
    X_train = check_matrix(X_train, "X_train")
    X_new = check_matrix(X_new, "X_new")
    if X_new.shape[1] != X_train.shape[1]:
        raise DataError(f"X_new has {X_new.shape[1]} columns, X_train has {X_train.shape[1]}")
    if X_new.shape == X_train.shape and np.array_equal(X_new, X_train):
        return kernel_matrix(spec, X_train)
    return _pairwise(spec, X_new, X_train)
