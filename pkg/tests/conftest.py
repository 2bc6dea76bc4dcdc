import numpy as np
import pytest
import yaml

from models.basis.kernels import KernelSpec, kernel_matrix
from models.basis.splines import build_tprs
from models.engines.model import ColumnStats
from utils.dataset import Dataset
from utils.simulation import ScenarioConfig, gen_scenario


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def small_dataset(rng):
    """n=30 locations, p=5 outcomes with a spatial trend, d=3 covariates."""
    n = 30
    coords = rng.uniform(0.0, 1.0, size=(n, 2))
    X = rng.uniform(-1.0, 1.0, size=(n, 3))
    trend = np.column_stack([np.sin(3 * coords[:, 0]), coords[:, 1] ** 2, X[:, 0]])
    Y = trend @ rng.normal(size=(3, 5)) + 0.3 * rng.normal(size=(n, 5))
    return Dataset.from_arrays(Y, coords, X)


@pytest.fixture
def plain_dataset(small_dataset):
    """The same rows without covariates."""
    return Dataset.from_arrays(small_dataset.Y, small_dataset.coords)


@pytest.fixture
def simulated():
    return gen_scenario(ScenarioConfig(scenario=1, n=60, d=4, p=8, seed=3))


@pytest.fixture
def rappca_inputs(small_dataset):
    """Standardized Y, polynomial kernel matrix and a 12-dimensional TPRS basis."""
    Y = ColumnStats.fit(small_dataset.Y, "outcome").transform(small_dataset.Y)
    X = ColumnStats.fit(small_dataset.X, "covariate").transform(small_dataset.X)
    K = kernel_matrix(KernelSpec("polynomial", 2), X)
    basis = build_tprs(small_dataset.coords, 12)
    return Y, K, basis


@pytest.fixture
def write_config(tmp_path):
    """Write a YAML config (only the given sections; the rest use defaults) and return its path."""
    def _write(data: dict, name: str = "config.yaml") -> str:
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data), encoding="utf-8")
        return str(path)
    return _write
