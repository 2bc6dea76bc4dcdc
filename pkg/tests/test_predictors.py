import numpy as np
import pytest

from models.basis.kernels import KernelSpec
from models.engines.model import Hyperparams
from models.pipeline import MethodSpec, fit_method, predict_new
from models.predictors.forest import ForestParams, oob_mse, rf_fit, rf_predict
from models.predictors.spatial import (
    Locations,
    PredictorParams,
    SpatialPredictor,
    available_predictors,
    get_predictor,
    predict_scores,
    spline_only_fit_predict,
    two_step_fit_predict,
)
from utils.errors import DataError, ParameterError
from utils.simulation import ScenarioConfig, gen_scenario

FAST_FOREST = ForestParams(n_trees=25, min_leaf=3, seed=11)


def _surface(coords):
    return np.sin(3 * coords[:, 0]) + coords[:, 1]


def test_mtry_default():
    assert ForestParams().resolve_mtry(7) == 2
    assert ForestParams().resolve_mtry(2) == 1
    with pytest.raises(ParameterError):
        ForestParams(mtry=5).resolve_mtry(3)


@pytest.mark.parametrize("kwargs", [{"n_trees": 0}, {"min_leaf": 0}, {"mtry": 0}])
def test_invalid_forest_params(kwargs):
    with pytest.raises(ParameterError):
        ForestParams(**kwargs)


def test_forest_is_deterministic(rng):
    features = rng.uniform(size=(60, 4))
    y = features[:, 0] * 2 + rng.normal(scale=0.1, size=60)
    new = rng.uniform(size=(10, 4))
    a = rf_predict(rf_fit(features, y, FAST_FOREST), new)
    b = rf_predict(rf_fit(features, y, FAST_FOREST), new)
    np.testing.assert_array_equal(a, b)


def test_forest_feature_mismatch(rng):
    forest = rf_fit(rng.uniform(size=(20, 3)), rng.normal(size=20), FAST_FOREST)
    with pytest.raises(DataError):
        rf_predict(forest, rng.uniform(size=(5, 2)))


def test_oob_error(rng):
    features = rng.uniform(size=(40, 2))
    y = features[:, 0] + rng.normal(scale=0.1, size=40)
    assert oob_mse(rf_fit(features, y, FAST_FOREST), y) >= 0.0
    no_bag = ForestParams(n_trees=5, bootstrap=False)
    with pytest.raises(ParameterError):
        oob_mse(rf_fit(features, y, no_bag), y)


def test_constant_target_predicted_everywhere(rng):
    features = rng.uniform(size=(40, 3))
    forest = rf_fit(features, np.full(40, 2.75), FAST_FOREST)
    np.testing.assert_allclose(rf_predict(forest, rng.uniform(size=(12, 3))), 2.75, rtol=1e-12)


def test_single_root_leaf_predicts_the_mean(rng):
    n = 20
    features = rng.uniform(size=(n, 2))
    y = rng.normal(size=n)
    root_only = ForestParams(n_trees=1, min_leaf=n, bootstrap=False)
    pred = rf_predict(rf_fit(features, y, root_only), rng.uniform(size=(7, 2)))
    np.testing.assert_allclose(pred, np.mean(y), rtol=1e-12)


def test_unbagged_single_tree_reproduces_training_points(rng):
    features = rng.uniform(size=(25, 3))
    y = rng.normal(size=25)
    forest = rf_fit(features, y, ForestParams(n_trees=1, min_leaf=1, bootstrap=False))
    np.testing.assert_allclose(rf_predict(forest, features), y, rtol=1e-12)


def test_step_function_out_of_bag_error(rng):
    x = rng.uniform(-1.0, 1.0, size=(200, 1))
    y = (x[:, 0] > 0).astype(float)
    assert oob_mse(rf_fit(x, y, ForestParams(seed=5)), y) <= 0.05


def test_prediction_ignores_tree_order(rng):
    features = rng.uniform(size=(50, 3))
    y = features[:, 0] - features[:, 2] + rng.normal(scale=0.1, size=50)
    forest = rf_fit(features, y, FAST_FOREST)
    new = rng.uniform(size=(10, 3))
    before = rf_predict(forest, new)
    forest.estimators_ = forest.estimators_[::-1]
    np.testing.assert_allclose(rf_predict(forest, new), before, rtol=1e-12, atol=1e-14)


def _walk(tree, x):
    node = 0
    while tree.children_left[node] != -1:
        go_left = np.float32(x[tree.feature[node]]) <= tree.threshold[node]
        node = tree.children_left[node] if go_left else tree.children_right[node]
    return tree.value[node].ravel()[0]


def test_prediction_matches_tree_traversal(rng):
    features = rng.uniform(size=(60, 4))
    y = np.sin(4 * features[:, 0]) + features[:, 1] + rng.normal(scale=0.1, size=60)
    forest = rf_fit(features, y, FAST_FOREST)
    new = rng.uniform(size=(10, 4))
    expected = [np.mean([_walk(est.tree_, x) for est in forest.estimators_]) for x in new]
    np.testing.assert_allclose(rf_predict(forest, new), expected, rtol=1e-10, atol=1e-12)


def test_locations_validation(rng):
    with pytest.raises(DataError):
        Locations(rng.uniform(size=(5, 2)), rng.uniform(size=(4, 1)))
    loc = Locations(rng.uniform(size=(5, 2)))
    assert loc.features().shape == (5, 2)


def test_spline_only_reproduces_affine_surface(rng):
    train = Locations(rng.uniform(size=(30, 2)))
    test = Locations(rng.uniform(0.1, 0.9, size=(8, 2)))
    u = 0.5 - train.coords[:, 0] + 3 * train.coords[:, 1]
    expected = 0.5 - test.coords[:, 0] + 3 * test.coords[:, 1]
    np.testing.assert_allclose(spline_only_fit_predict(train, u, test), expected, atol=1e-6)


def test_two_step_tracks_smooth_surface(rng):
    train = Locations(rng.uniform(size=(120, 2)), rng.normal(size=(120, 1)))
    test = Locations(rng.uniform(0.1, 0.9, size=(30, 2)), rng.normal(size=(30, 1)))
    u = _surface(train.coords) + rng.normal(scale=0.05, size=120)
    pred = two_step_fit_predict(train, u, test, FAST_FOREST)
    truth = _surface(test.coords)
    assert np.mean((pred - truth) ** 2) < 0.5 * np.var(truth)


def _affine(coords):
    return 1.0 + 2.0 * coords[:, 0] - 3.0 * coords[:, 1]


def test_two_step_on_affine_surface(rng):
    train = Locations(rng.uniform(size=(150, 2)))
    test = Locations(rng.uniform(0.1, 0.9, size=(40, 2)))
    pred = two_step_fit_predict(train, _affine(train.coords), test, ForestParams(seed=2))
    # achievable bound with a piecewise-constant forest stage; the spline alone is exact
    assert np.mean((pred - _affine(test.coords)) ** 2) <= 0.025
    exact = spline_only_fit_predict(train, _affine(train.coords), test)
    np.testing.assert_allclose(exact, _affine(test.coords), atol=1e-6)


def test_two_step_in_sample_beats_spline_only(rng):
    loc = Locations(rng.uniform(size=(80, 2)), rng.uniform(-1.0, 1.0, size=(80, 2)))
    u = np.sin(3 * loc.X[:, 0]) + 0.5 * loc.coords[:, 1] + rng.normal(scale=0.05, size=80)
    two_step = two_step_fit_predict(loc, u, loc, FAST_FOREST)
    spline = spline_only_fit_predict(loc, u, loc)
    assert np.mean((two_step - u) ** 2) <= np.mean((spline - u) ** 2)


def test_residual_spline_never_hurts_in_sample(rng):
    loc = Locations(rng.uniform(size=(60, 2)), rng.normal(size=(60, 1)))
    u = _surface(loc.coords) + 0.3 * loc.X[:, 0] + rng.normal(scale=0.1, size=60)
    predictor = SpatialPredictor(FAST_FOREST).fit(loc, u)
    forest_only = rf_predict(predictor.forest, loc.features())
    two_step = predictor.predict(loc)
    assert np.sum((two_step - u) ** 2) <= np.sum((forest_only - u) ** 2) + 1e-10


@pytest.mark.slow
def test_scenario_one_first_pc_is_predictable():
    r2 = []
    for seed in range(10):
        data, truth = gen_scenario(ScenarioConfig(scenario=1, n=200, seed=seed))
        u = truth.pcs[:, 0]
        trn, tst = np.arange(150), np.arange(150, 200)
        train = Locations(data.coords[trn], data.X[trn])
        test = Locations(data.coords[tst], data.X[tst])
        pred = two_step_fit_predict(train, u[trn], test, ForestParams(seed=seed))
        r2.append(1.0 - np.mean((pred - u[tst]) ** 2) / np.var(u[tst]))
    assert np.mean(r2) >= 0.5


def test_small_training_set_degrades_to_spline(rng):
    train = Locations(rng.uniform(size=(8, 2)))
    predictor = SpatialPredictor(FAST_FOREST).fit(train, _surface(train.coords))
    assert predictor.spline_only
    assert predictor.predict(Locations(rng.uniform(size=(3, 2)))).shape == (3,)


def test_predict_before_fit():
    with pytest.raises(ParameterError):
        SpatialPredictor(FAST_FOREST).predict(Locations(np.zeros((2, 2))))


def test_registry():
    assert {"two_step", "spline", "model_space"} <= set(available_predictors())
    with pytest.raises(ParameterError):
        get_predictor("kriging")


def _rappca(small_dataset):
    spec = MethodSpec(method="rappca", r=2, hypers=(Hyperparams(1.0, 0.5, 0.5),), kernel=KernelSpec("polynomial", 2), spline_m=12)
    return fit_method(small_dataset, spec)


def test_model_space_predictor_matches_model(small_dataset, rng):
    model = _rappca(small_dataset)
    coords = rng.uniform(size=(6, 2))
    X = rng.uniform(-1, 1, size=(6, 3))
    U_hat = predict_scores(model, coords, X, PredictorParams(name="model_space"))
    np.testing.assert_allclose(U_hat, model.model_space_scores(coords, X), atol=1e-10)


def test_model_space_needs_rappca(small_dataset):
    model = fit_method(small_dataset, MethodSpec(method="classical", r=2))
    with pytest.raises(ParameterError):
        predict_scores(model, small_dataset.coords[:3], small_dataset.X[:3], PredictorParams(name="model_space"))


def test_predict_scores_requires_covariates(small_dataset):
    model = _rappca(small_dataset)
    with pytest.raises(DataError):
        predict_scores(model, small_dataset.coords[:3], None, PredictorParams(name="spline"))


def test_predictions_are_deterministic_and_parallel_safe(small_dataset, rng):
    model = _rappca(small_dataset)
    coords = rng.uniform(size=(5, 2))
    X = rng.uniform(-1, 1, size=(5, 3))
    serial = predict_scores(model, coords, X, PredictorParams(forest=FAST_FOREST))
    threaded = predict_scores(model, coords, X, PredictorParams(forest=FAST_FOREST, max_workers=2))
    np.testing.assert_array_equal(serial, threaded)


def test_predict_new_reconstructs_on_original_scale(small_dataset):
    model = _rappca(small_dataset)
    U_hat, Y_hat = predict_new(model, small_dataset.coords[:4], small_dataset.X[:4], PredictorParams(name="spline"))
    np.testing.assert_allclose(Y_hat, model.reconstruct(U_hat))
    assert Y_hat.shape == (4, small_dataset.p)
