import numpy as np
import pytest
from scipy.stats import ortho_group

from utils.errors import DataError
from utils.metrics import aggregate_reports, compute_metrics, tmse_component


@pytest.fixture
def split(rng):
    Y_trn = rng.normal(size=(40, 6))
    Y_tst = rng.normal(size=(15, 6))
    V = ortho_group.rvs(6, random_state=3)[:, :3]
    return Y_tst, V, Y_trn


def test_perfect_prediction(split):
    Y_tst, V, Y_trn = split
    report = compute_metrics(Y_tst, V, Y_tst @ V, Y_trn, Y_trn @ V)
    assert report.mspe == pytest.approx(0.0, abs=1e-12)
    assert report.tmse == pytest.approx(report.msre_tst)
    np.testing.assert_allclose(report.per_pc_mse, 0.0, atol=1e-12)


def test_full_rank_loadings_have_no_representation_error(rng):
    Y = rng.normal(size=(10, 4))
    V = ortho_group.rvs(4, random_state=5)
    report = compute_metrics(Y, V, Y @ V, Y, Y @ V)
    assert report.tmse == pytest.approx(0.0, abs=1e-12)
    assert report.msre_trn == pytest.approx(0.0, abs=1e-12)


def test_pythagorean_decomposition(split, rng):
    Y_tst, V, Y_trn = split
    for _ in range(100):
        U_hat = rng.normal(size=(15, 3))
        report = compute_metrics(Y_tst, V, U_hat, Y_trn, Y_trn @ V)
        assert abs(report.tmse - report.mspe - report.msre_tst) <= 1e-8 * report.tmse


def test_per_pc_mse_sums_to_mspe(split, rng):
    Y_tst, V, Y_trn = split
    report = compute_metrics(Y_tst, V, rng.normal(size=(15, 3)), Y_trn, Y_trn @ V)
    assert report.per_pc_mse.sum() == pytest.approx(report.mspe)
    assert set(report.as_row()) >= {"tmse", "mspe", "msre_tst", "msre_trn", "mse_pc1", "mse_pc3"}


def test_shape_mismatch(split):
    Y_tst, V, Y_trn = split
    with pytest.raises(DataError):
        compute_metrics(Y_tst, V, np.zeros((15, 2)), Y_trn, Y_trn @ V)
    with pytest.raises(DataError):
        compute_metrics(Y_tst[:, :5], V, np.zeros((15, 3)), Y_trn, Y_trn @ V)


def test_tmse_component():
    Y = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert tmse_component(Y, [1.0, 0.0], [1.0, 0.0]) == pytest.approx(0.5)
    with pytest.raises(DataError):
        tmse_component(Y, [1.0], [1.0, 0.0])


def test_aggregate_reports(split, rng):
    Y_tst, V, Y_trn = split
    reports = [compute_metrics(Y_tst, V, rng.normal(size=(15, 3)), Y_trn, Y_trn @ V) for _ in range(4)]
    table = aggregate_reports(reports)
    assert list(table["fold"]) == ["1", "2", "3", "4", "mean", "sd"]
    assert table.loc[4, "tmse"] == pytest.approx(np.mean([r.tmse for r in reports]))
    assert table.loc[5, "tmse"] == pytest.approx(np.std([r.tmse for r in reports], ddof=1))
