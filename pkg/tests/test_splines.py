import numpy as np
import pytest

from models.basis.splines import NULL_DIM, build_tprs, eval_basis, gcv_lambda_grid, smooth_fit
from utils.errors import DataError, RankError

CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def test_basis_on_square_corners():
    basis = build_tprs(CORNERS, 4)
    assert basis.B.shape == (4, 4)
    assert basis.Q.shape == (4, 4)
    np.testing.assert_array_equal(basis.Q[:NULL_DIM, :NULL_DIM], 0.0)
    np.testing.assert_allclose(basis.B[:, :NULL_DIM], np.column_stack([np.ones(4), CORNERS]))
    assert np.all(np.diag(basis.Q) >= 0)


def test_penalty_is_psd(rng):
    basis = build_tprs(rng.uniform(size=(40, 2)), 15)
    assert np.linalg.eigvalsh(basis.Q).min() >= -1e-12
    np.testing.assert_allclose(basis.penalty_root.T @ basis.penalty_root, basis.Q, atol=1e-12)


@pytest.mark.parametrize("m", [3, 41])
def test_invalid_dimension(rng, m):
    with pytest.raises(DataError):
        build_tprs(rng.uniform(size=(40, 2)), m)


def test_collinear_coordinates():
    coords = np.column_stack([np.linspace(0, 1, 10), np.linspace(0, 2, 10)])
    with pytest.raises(RankError):
        build_tprs(coords, 5)


def test_eval_basis_round_trip(rng):
    coords = rng.uniform(size=(30, 2))
    basis = build_tprs(coords, 20)
    np.testing.assert_allclose(eval_basis(basis, coords), basis.B, atol=1e-10)


def test_interpolation_at_zero_lambda(rng):
    coords = rng.uniform(size=(20, 2))
    y = np.sin(4 * coords[:, 0]) + coords[:, 1]
    basis = build_tprs(coords, 20)
    fitted = basis.B @ smooth_fit(basis, y, lam=0.0)
    assert np.linalg.norm(fitted - y) <= 1e-6 * np.linalg.norm(y)


def test_large_lambda_tends_to_affine_fit(rng):
    coords = rng.uniform(size=(25, 2))
    y = np.cos(3 * coords[:, 0]) * coords[:, 1] + rng.normal(scale=0.1, size=25)
    basis = build_tprs(coords, 8)
    fitted = basis.B @ smooth_fit(basis, y, lam=1e12)
    T = basis.B[:, :NULL_DIM]
    affine = T @ np.linalg.lstsq(T, y, rcond=None)[0]
    np.testing.assert_allclose(fitted, affine, atol=1e-4)


@pytest.mark.parametrize("lam", [0.0, 0.1, 10.0, "gcv"])
def test_affine_reproduction(rng, lam):
    coords = rng.uniform(size=(30, 2))
    y = 1.0 + 2.0 * coords[:, 0] - coords[:, 1]
    basis = build_tprs(coords, 12)
    coef = smooth_fit(basis, y, lam=lam)
    np.testing.assert_allclose(basis.B @ coef, y, atol=1e-8)
    new = rng.uniform(size=(5, 2))
    np.testing.assert_allclose(eval_basis(basis, new) @ coef, 1.0 + 2.0 * new[:, 0] - new[:, 1], atol=1e-8)


def test_residual_norm_monotone_in_lambda(rng):
    coords = rng.uniform(size=(30, 2))
    y = np.sin(5 * coords[:, 0]) + rng.normal(scale=0.2, size=30)
    basis = build_tprs(coords, 15)
    rss = [np.sum((y - basis.B @ smooth_fit(basis, y, lam=lam)) ** 2) for lam in (0.0, 1e-3, 1e-1, 10.0, 1e3)]
    assert all(a <= b + 1e-10 for a, b in zip(rss, rss[1:]))


def test_gcv_selects_from_grid(rng):
    coords = rng.uniform(size=(40, 2))
    y = np.sin(5 * coords[:, 0]) + rng.normal(scale=0.3, size=40)
    basis = build_tprs(coords, 20)
    coef, lam = smooth_fit(basis, y, return_lambda=True)
    assert np.isfinite(coef).all()
    assert np.any(np.isclose(gcv_lambda_grid(basis), lam))


def test_invalid_lambda(rng):
    basis = build_tprs(rng.uniform(size=(10, 2)), 5)
    with pytest.raises(DataError):
        smooth_fit(basis, np.zeros(10), lam=-1.0)
    with pytest.raises(DataError):
        smooth_fit(basis, np.zeros(10), lam="aic")
    with pytest.raises(DataError):
        smooth_fit(basis, np.zeros(9), lam=1.0)
