import numpy as np
import pytest

from models.basis.kernels import KernelSpec, kernel_cross, kernel_eval, kernel_matrix
from utils.errors import DataError, ParameterError


def test_kernel_eval_values():
    assert kernel_eval(KernelSpec("linear"), [1, 2], [3, 4]) == pytest.approx(11.0)
    assert kernel_eval(KernelSpec("polynomial", 2), [1, 2], [3, 4]) == pytest.approx(144.0)
    assert kernel_eval(KernelSpec("gaussian", 1.0), [1, 2], [3, 4]) == pytest.approx(np.exp(-8.0))


def test_gaussian_self_similarity_is_one():
    assert kernel_eval(KernelSpec("gaussian", 0.3), [0.5, -2.0, 1.0], [0.5, -2.0, 1.0]) == pytest.approx(1.0)


def test_kernel_eval_rejects_bad_vectors():
    with pytest.raises(DataError):
        kernel_eval(KernelSpec(), [1, 2], [1, 2, 3])
    with pytest.raises(DataError):
        kernel_eval(KernelSpec(), [1, np.nan], [1, 2])


@pytest.mark.parametrize("family,h", [("linear", 1.0), ("polynomial", 3), ("gaussian", 0.5)])
def test_kernel_matrix_symmetric_psd(rng, family, h):
    X = rng.normal(size=(25, 4))
    K = kernel_matrix(KernelSpec(family, h), X)
    assert K.shape == (25, 25)
    assert np.array_equal(K, K.T)
    assert np.linalg.eigvalsh(K).min() >= -1e-8 * np.abs(K).max()


def test_kernel_matrix_matches_pairwise_loop(rng):
    X = rng.normal(size=(6, 3))
    spec = KernelSpec("polynomial", 2)
    K = kernel_matrix(spec, X)
    naive = np.array([[kernel_eval(spec, a, b) for b in X] for a in X])
    np.testing.assert_allclose(K, naive, rtol=1e-12)


def test_kernel_cross_orientation():
    K = kernel_cross(KernelSpec("linear"), [[1.0], [2.0]], [[3.0]])
    np.testing.assert_allclose(K, [[3.0, 6.0]])


def test_kernel_cross_on_training_rows_is_gram(rng):
    X = rng.normal(size=(8, 2))
    spec = KernelSpec("gaussian", 2.0)
    assert np.array_equal(kernel_cross(spec, X, X.copy()), kernel_matrix(spec, X))


def test_kernel_cross_column_mismatch(rng):
    with pytest.raises(DataError):
        kernel_cross(KernelSpec(), rng.normal(size=(4, 2)), rng.normal(size=(3, 3)))


@pytest.mark.parametrize("family,h", [("cubic", 1.0), ("polynomial", 0), ("polynomial", 1.5), ("gaussian", 0.0)])
def test_invalid_kernel_spec(family, h):
    with pytest.raises(ParameterError):
        KernelSpec(family, h)
