import pytest

from config import ConfigManager
from models.tuning.grid import DEFAULT_AXIS
from utils.errors import ConfigError, ParameterError
from utils.seeding import derive_seed


def test_base_config_loads():
    config = ConfigManager()
    assert config.method.name == "rappca"
    assert config.kernel_spec().family == "polynomial"
    assert len(config.tuning_grid()) == len(DEFAULT_AXIS) ** 3 + 1
    assert [s.method for s in config.method_specs()] == ["rappca", "classical", "predictive"]


def test_missing_sections_use_defaults(write_config):
    config = ConfigManager(write_config({"seed": 4}))
    assert config.seed == 4
    assert config.cv.k == 10
    assert config.hypers()[0].gamma == 1.0


def test_per_component_hyperparameters(write_config):
    path = write_config({"hyper": {"gamma": 1.0, "lambda1": 0.5, "lambda2": 0.5,
                                   "per_component": [{"gamma": 2.0}, {"lambda1": 1.0, "lambda2": 4.0}]}})
    hypers = ConfigManager(path).hypers()
    assert [h.gamma for h in hypers] == [2.0, 1.0]
    assert hypers[1].ratio == pytest.approx(4.0)


@pytest.mark.parametrize("data", [
    {"unknown": {}},
    {"method": {"name": "sparse"}},
    {"method": {"compare": ["kriging"]}},
    {"kernel": {"family": "cubic"}},
    {"cv": {"metric": "r2"}},
    {"predictor": {"name": "gp"}},
    {"data": {"source": "csv"}},
    {"data": {"source": "database"}},
    {"method": {"colour": "red"}},
    {"hyper": {"per_component": [{"eta": 1.0}]}},
])
def test_invalid_configs(write_config, data):
    with pytest.raises(ConfigError):
        ConfigManager(write_config(data))


def test_invalid_hyperparameters_are_parameter_errors(write_config):
    with pytest.raises(ParameterError):
        ConfigManager(write_config({"hyper": {"lambda1": 0.0, "lambda2": 1.0}}))


def test_missing_and_malformed_files(tmp_path, write_config):
    with pytest.raises(ConfigError):
        ConfigManager(str(tmp_path / "nope.yaml"))
    bad = tmp_path / "bad.yaml"
    bad.write_text("seed: [1, 2\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        ConfigManager(str(bad))


def test_override_and_hash():
    config = ConfigManager()
    before = config.config_hash()
    assert before == ConfigManager().config_hash()
    config.override_config({"cv": {"k": 5}, "grid": {"extended_gamma": True}})
    assert config.cv.k == 5
    assert config.cv.metric == "tmse"
    assert 50.0 in config.tuning_grid().gammas
    assert config.config_hash() != before


def test_derived_seeds(write_config):
    config = ConfigManager(write_config({"seed": 7, "data": {"replicate": 2}}))
    assert config.scenario_config().seed == derive_seed(7, "replicate", 2)
    assert config.predictor_params().forest.seed == derive_seed(7, "tree")
    assert config.cv_plan().seed == 7


def test_save_config_round_trip(tmp_path):
    config = ConfigManager()
    config.override_config({"method": {"r": 4}})
    path = tmp_path / "saved.yaml"
    config.save_config(str(path))
    again = ConfigManager(str(path))
    assert again.method.r == 4
    assert again.config_hash() == config.config_hash()
