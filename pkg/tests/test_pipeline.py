import numpy as np
import pytest

from models.basis.kernels import KernelSpec
from models.engines.model import Hyperparams
from models.pipeline import MethodSpec, evaluate_folds, fit_method
from models.predictors.forest import ForestParams
from models.predictors.spatial import PredictorParams
from models.tuning.cv import CVPlan, tune_components
from models.tuning.grid import TuningGrid
from utils.errors import ParameterError
from utils.simulation import ScenarioConfig, gen_scenario

SPLINE = PredictorParams(name="spline")
REDUCED_GRID = TuningGrid(gammas=(0.1, 1.0, 5.0), lambda1s=(0.1, 1.0, 5.0), ratios=(0.25, 1.0, 4.0))


def test_hyperparameters_broadcast_or_per_component():
    one = MethodSpec(hypers=(Hyperparams(1.0, 0.5, 0.5),))
    assert one.hypers_for(3) == [Hyperparams(1.0, 0.5, 0.5)] * 3
    many = MethodSpec(hypers=(Hyperparams(1.0, 0.5, 0.5), Hyperparams(2.0, 1.0, 1.0)))
    assert many.hypers_for(2)[1].gamma == 2.0
    with pytest.raises(ParameterError):
        many.hypers_for(3)


def test_unknown_method():
    with pytest.raises(ParameterError):
        MethodSpec(method="sparse")


def test_rappca_with_zero_hyperparameters_matches_classical(small_dataset):
    rappca = fit_method(small_dataset, MethodSpec(method="rappca", r=3, hypers=(Hyperparams(),), kernel=KernelSpec("linear")))
    classical = fit_method(small_dataset, MethodSpec(method="classical", r=3))
    np.testing.assert_allclose(rappca.V, classical.V, atol=1e-8)


def test_evaluate_folds_compares_methods(small_dataset):
    specs = [
        MethodSpec(method="rappca", r=2, hypers=(Hyperparams(1.0, 0.5, 0.5),), kernel=KernelSpec("polynomial", 2), spline_m=10),
        MethodSpec(method="classical", r=2),
        MethodSpec(method="predictive", r=2),
    ]
    results = evaluate_folds(small_dataset, specs, CVPlan(k=3, seed=8), SPLINE)
    assert list(results) == ["rappca", "classical", "predictive"]
    for name, evaluation in results.items():
        table = evaluation.table()
        assert list(table["fold"]) == ["1", "2", "3", "mean", "sd"]
        assert (table["method"] == name).all()
        assert np.isfinite(table[["tmse", "mspe", "msre_tst", "msre_trn"]].to_numpy()).all()


def test_evaluation_is_reproducible(small_dataset):
    spec = [MethodSpec(method="predictive", r=2)]
    params = PredictorParams(forest=ForestParams(n_trees=10))
    a = evaluate_folds(small_dataset, spec, CVPlan(k=3, seed=8), params)
    b = evaluate_folds(small_dataset, spec, CVPlan(k=3, seed=8), params, max_workers=3)
    assert a["predictive"].table().equals(b["predictive"].table())


def _tuned_comparison(scenario: int, kernel: KernelSpec, seed: int, r: int = 2):
    """Mean fold TMSE and MSPE of tuned RapPCA, classical and predictive PCA on one replicate."""
    data, _ = gen_scenario(ScenarioConfig(scenario=scenario, seed=seed))
    params = PredictorParams(forest=ForestParams(n_trees=50, seed=seed))
    tuned = tune_components(data, r, REDUCED_GRID, CVPlan(k=5, seed=seed), kernel=kernel, predictor=params, max_workers=4)
    specs = [
        MethodSpec(method="rappca", r=r, hypers=tuple(res.best.hyper for res in tuned), kernel=kernel),
        MethodSpec(method="classical", r=r),
        MethodSpec(method="predictive", r=r),
    ]
    results = evaluate_folds(data, specs, CVPlan(k=5, seed=seed + 1000), params, max_workers=4)
    return {
        name: (np.mean([rep.tmse for rep in ev.reports]), np.mean([rep.mspe for rep in ev.reports]))
        for name, ev in results.items()
    }


@pytest.mark.slow
def test_scenario_one_rappca_balances_both_baselines():
    runs = [_tuned_comparison(1, KernelSpec("linear"), seed) for seed in range(20)]
    tmse = {name: np.array([run[name][0] for run in runs]) for name in runs[0]}
    mspe = {name: np.array([run[name][1] for run in runs]) for name in runs[0]}
    assert tmse["rappca"].mean() <= tmse["classical"].mean()
    assert mspe["rappca"].mean() <= mspe["predictive"].mean()
    assert np.mean(tmse["rappca"] <= tmse["classical"]) >= 0.6
    assert np.mean(mspe["rappca"] <= mspe["predictive"]) >= 0.6


@pytest.mark.slow
def test_scenario_three_polynomial_kernel_beats_predictive_pca():
    runs = [_tuned_comparison(3, KernelSpec("polynomial", 2), seed) for seed in range(20)]
    rappca = np.array([run["rappca"][1] for run in runs])
    predictive = np.array([run["predictive"][1] for run in runs])
    assert rappca.mean() < predictive.mean()
    assert np.mean(rappca < predictive) >= 0.7
