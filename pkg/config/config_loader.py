"""
Configuration loader and manager for RapPCA runs.
Handles loading, validation, and access to configuration parameters.
"""

import hashlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from models.basis.kernels import KERNEL_FAMILIES, KernelSpec
from models.engines.model import DEFAULT_DELTA, METHODS, Hyperparams
from models.pipeline import MethodSpec
from models.predictors.forest import ForestParams
from models.predictors.spatial import PredictorParams, available_predictors
from models.tuning.cv import CV_METRICS, CVPlan
from models.tuning.grid import DEFAULT_AXIS, EXTENDED_GAMMA_TAIL, TuningGrid
from utils.dataset import DataSchema, Dataset, ingest_csv
from utils.errors import ConfigError
from utils.logger import logger
from utils.seeding import derive_seed
from utils.simulation import ScenarioConfig, gen_scenario


@dataclass
class DataConfig:
    """Where the Dataset comes from: a CSV file or a simulated replicate"""
    source: str = "simulate"  # "csv" or "simulate"
    path: Optional[str] = None
    id_col: Optional[str] = "id"
    coord_cols: List[str] = field(default_factory=lambda: ["s1", "s2"])
    covariate_cols: List[str] = field(default_factory=list)
    outcome_cols: List[str] = field(default_factory=list)
    replicate: int = 0

@dataclass
class MethodConfig:
    """Dimension-reduction method"""
    name: str = "rappca"
    r: int = 3
    standardize: bool = True
    compare: List[str] = field(default_factory=list)

@dataclass
class KernelConfig:
    """Kernel over standardized covariates"""
    family: str = "polynomial"
    h: float = 1.0

@dataclass
class SplineConfig:
    """TPRS basis for RapPCA; m=None uses min(n_train, 200)"""
    m: Optional[int] = None

@dataclass
class HyperConfig:
    """Fixed hyperparameters, broadcast unless per_component is given"""
    gamma: float = 1.0
    lambda1: float = 0.5
    lambda2: float = 0.5
    delta: float = DEFAULT_DELTA
    per_component: List[Dict[str, float]] = field(default_factory=list)

@dataclass
class GridConfig:
    """Tuning grid; empty axes use the default 15-value axis"""
    gammas: List[float] = field(default_factory=list)
    lambda1s: List[float] = field(default_factory=list)
    ratios: List[float] = field(default_factory=list)
    include_zero_combo: bool = True
    extended_gamma: bool = False
    bandwidths: List[float] = field(default_factory=list)

@dataclass
class CVConfig:
    """K-fold cross-validation"""
    k: int = 10
    metric: str = "tmse"

@dataclass
class PredictorConfig:
    """Score predictor at new locations"""
    name: str = "two_step"
    n_trees: int = 500
    mtry: Optional[int] = None
    min_leaf: int = 5
    bootstrap: bool = True
    spline_m: Optional[int] = None

@dataclass
class SimulationConfig:
    """Synthetic scenario parameters"""
    scenario: int = 1
    n: int = 200
    d: int = 10
    p: int = 15
    n_pcs: int = 6
    noise_var: float = 0.1
    cov_range: float = 0.5
    cov_partial_sill: float = 0.5
    cov_constant: float = 0.5
    decay: str = "linear"
    replicates: int = 1

@dataclass
class VerificationConfig:
    """Optimality checks and the gamma and lambda sweeps"""
    theta_grid: int = 360
    gamma: float = 1.0
    equal_lambdas: List[float] = field(default_factory=lambda: [0.1, 1.0, 5.0])
    ratio_lambda1: float = 1.0
    ratios: List[float] = field(default_factory=lambda: [0.25, 1.0, 4.0])
    sweep_gammas: List[float] = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0, 5.0])
    sweep_lambda1s: List[float] = field(default_factory=lambda: [0.1, 0.5, 1.0, 5.0])
    sweep_ratios: List[float] = field(default_factory=lambda: [0.25, 1.0, 4.0])

@dataclass
class OutputConfig:
    """Output configuration"""
    dir: str = "output"
    log_file: Optional[str] = None

@dataclass
class PerformanceConfig:
    """Performance configuration"""
    max_workers: int = 1
    n_jobs: Optional[int] = None


class ConfigManager:
    """
    Main configuration manager for RapPCA runs.
    Handles loading, validation, and providing access to configuration settings.
    """

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize the configuration manager.

        Args:
            config_path: Path to the configuration file. If None, uses default.
        """
        self.config_path = config_path or self._get_default_config_path()
        self.config_data: Dict[str, Any] = {}
        self.seed: int = 0
        self.data: Optional[DataConfig] = None
        self.method: Optional[MethodConfig] = None
        self.kernel: Optional[KernelConfig] = None
        self.spline: Optional[SplineConfig] = None
        self.hyper: Optional[HyperConfig] = None
        self.grid: Optional[GridConfig] = None
        self.cv: Optional[CVConfig] = None
        self.predictor: Optional[PredictorConfig] = None
        self.simulation: Optional[SimulationConfig] = None
        self.verification: Optional[VerificationConfig] = None
        self.output: Optional[OutputConfig] = None
        self.performance: Optional[PerformanceConfig] = None

        self.load_config()

    def _get_default_config_path(self) -> str:
        """Get the default configuration file path."""
        current_dir = Path(__file__).parent
        return str(current_dir / "base_config.yaml")

    def load_config(self) -> None:
        """Load and parse the configuration file."""
        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                self.config_data = yaml.safe_load(f) or {}
        except FileNotFoundError:
            raise ConfigError(f"Configuration file not found: {self.config_path}")
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid YAML in configuration file: {e}")

        self._parse_config()
        self._validate_config()
        logger.info(f"Configuration loaded successfully from {self.config_path}")

    def _section(self, name: str, cls):
        data = self.config_data.get(name) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"section '{name}' must be a mapping")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"invalid keys in section '{name}': {e}")

    def _parse_config(self) -> None:
        """Parse the loaded configuration data into structured objects."""
        unknown = set(self.config_data) - {"seed", "data", "method", "kernel", "spline", "hyper", "grid", "cv",
                                           "predictor", "simulation", "verification", "output", "performance"}
        if unknown:
            raise ConfigError(f"unknown configuration sections: {sorted(unknown)}")
        self.seed = int(self.config_data.get("seed", 0))
        self.data = self._section("data", DataConfig)
        self.method = self._section("method", MethodConfig)
        self.kernel = self._section("kernel", KernelConfig)
        self.spline = self._section("spline", SplineConfig)
        self.hyper = self._section("hyper", HyperConfig)
        self.grid = self._section("grid", GridConfig)
        self.cv = self._section("cv", CVConfig)
        self.predictor = self._section("predictor", PredictorConfig)
        self.simulation = self._section("simulation", SimulationConfig)
        self.verification = self._section("verification", VerificationConfig)
        self.output = self._section("output", OutputConfig)
        self.performance = self._section("performance", PerformanceConfig)

    def _validate_config(self) -> None:
        """Validate the loaded configuration."""
        if self.data.source not in ("csv", "simulate"):
            raise ConfigError(f"Invalid data source: {self.data.source}. Must be 'csv' or 'simulate'")
        if self.data.source == "csv":
            if not self.data.path:
                raise ConfigError("data.path is required when data.source is 'csv'")
            if not self.data.outcome_cols:
                raise ConfigError("data.outcome_cols must list at least one outcome column")
            if len(self.data.coord_cols) != 2:
                raise ConfigError("data.coord_cols must name exactly two coordinate columns")

        for name in [self.method.name, *self.method.compare]:
            if name not in METHODS:
                raise ConfigError(f"Invalid method: {name}. Must be one of {METHODS}")
        if self.method.r < 1:
            raise ConfigError("method.r must be positive")
        if self.kernel.family not in KERNEL_FAMILIES:
            raise ConfigError(f"Invalid kernel family: {self.kernel.family}. Must be one of {KERNEL_FAMILIES}")
        if self.cv.metric not in CV_METRICS:
            raise ConfigError(f"Invalid CV metric: {self.cv.metric}. Must be one of {CV_METRICS}")
        if self.predictor.name not in available_predictors():
            raise ConfigError(f"Invalid predictor: {self.predictor.name}. Must be one of {available_predictors()}")
        if self.performance.max_workers < 1:
            raise ConfigError("performance.max_workers must be positive")

        # Builders raise ParameterError (a ConfigError) for invalid values
        self.hypers()
        self.kernel_spec()
        self.tuning_grid()
        self.cv_plan()
        self.predictor_params()
        self.scenario_config()

    def hypers(self) -> List[Hyperparams]:
        """Per-component hyperparameters, or the single broadcast combination."""
        base = {"gamma": self.hyper.gamma, "lambda1": self.hyper.lambda1, "lambda2": self.hyper.lambda2, "delta": self.hyper.delta}
        if not self.hyper.per_component:
            return [Hyperparams(**base)]
        try:
            return [Hyperparams(**{**base, **entry}) for entry in self.hyper.per_component]
        except TypeError as e:
            raise ConfigError(f"invalid keys in hyper.per_component: {e}")

    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(self.kernel.family, float(self.kernel.h))

    def method_spec(self, name: Optional[str] = None) -> MethodSpec:
        return MethodSpec(
            method=name or self.method.name,
            r=self.method.r,
            hypers=tuple(self.hypers()),
            kernel=self.kernel_spec(),
            spline_m=self.spline.m,
            standardize=self.method.standardize,
        )

    def method_specs(self) -> List[MethodSpec]:
        """The main method followed by any comparison methods, without repeats."""
        names = list(dict.fromkeys([self.method.name, *self.method.compare]))
        return [self.method_spec(name) for name in names]

    def tuning_grid(self) -> TuningGrid:
        gammas = tuple(self.grid.gammas) or DEFAULT_AXIS
        if self.grid.extended_gamma:
            gammas = gammas + tuple(g for g in EXTENDED_GAMMA_TAIL if g not in gammas)
        return TuningGrid(
            gammas=gammas,
            lambda1s=tuple(self.grid.lambda1s) or DEFAULT_AXIS,
            ratios=tuple(self.grid.ratios) or DEFAULT_AXIS,
            include_zero_combo=self.grid.include_zero_combo,
            bandwidths=tuple(self.grid.bandwidths),
            delta=self.hyper.delta,
        )

    def cv_plan(self) -> CVPlan:
        return CVPlan(k=self.cv.k, seed=self.seed, metric=self.cv.metric)

    def predictor_params(self) -> PredictorParams:
        forest = ForestParams(
            n_trees=self.predictor.n_trees,
            mtry=self.predictor.mtry,
            min_leaf=self.predictor.min_leaf,
            seed=derive_seed(self.seed, "tree"),
            bootstrap=self.predictor.bootstrap,
            n_jobs=self.performance.n_jobs,
        )
        return PredictorParams(
            name=self.predictor.name,
            forest=forest,
            spline_m=self.predictor.spline_m,
            max_workers=self.performance.max_workers,
        )

    def scenario_config(self, replicate: Optional[int] = None) -> ScenarioConfig:
        sim = asdict(self.simulation)
        sim.pop("replicates")
        index = self.data.replicate if replicate is None else replicate
        return ScenarioConfig(**sim, seed=derive_seed(self.seed, "replicate", index))

    def load_dataset(self) -> Dataset:
        """The Dataset named by the data section."""
        if self.data.source == "csv":
            schema = DataSchema(
                coord_cols=list(self.data.coord_cols),
                outcome_cols=list(self.data.outcome_cols),
                covariate_cols=list(self.data.covariate_cols),
                id_col=self.data.id_col,
            )
            return ingest_csv(self.data.path, schema)
        data, _ = gen_scenario(self.scenario_config())
        return data

    def override_config(self, overrides: Dict[str, Any]) -> None:
        """Override configuration values at runtime."""
        def update_nested_dict(d: dict, overrides: dict) -> None:
            for key, value in overrides.items():
                if isinstance(value, dict) and key in d and isinstance(d[key], dict):
                    update_nested_dict(d[key], value)
                else:
                    d[key] = value

        update_nested_dict(self.config_data, overrides)
        self._parse_config()
        self._validate_config()

    def save_config(self, output_path: str) -> None:
        """Save current configuration to a file."""
        with open(output_path, 'w', encoding='utf-8') as f:
            yaml.safe_dump(self.to_dict(), f, default_flow_style=False, sort_keys=True, allow_unicode=True)

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to dictionary format."""
        return {
            "seed": self.seed,
            "data": asdict(self.data),
            "method": asdict(self.method),
            "kernel": asdict(self.kernel),
            "spline": asdict(self.spline),
            "hyper": asdict(self.hyper),
            "grid": asdict(self.grid),
            "cv": asdict(self.cv),
            "predictor": asdict(self.predictor),
            "simulation": asdict(self.simulation),
            "verification": asdict(self.verification),
            "output": asdict(self.output),
            "performance": asdict(self.performance),
        }

    def config_hash(self) -> str:
        """sha256 of the canonical YAML dump of the parsed configuration."""
        canonical = yaml.safe_dump(self.to_dict(), default_flow_style=False, sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


_config_instance: Optional[ConfigManager] = None

def get_config(config_path: Optional[str] = None) -> ConfigManager:
    """
    Get the global configuration instance.

    Args:
        config_path: Path to configuration file (only used on first call)

    Returns:
        ConfigManager instance
    """
    global _config_instance

    if _config_instance is None:
        _config_instance = ConfigManager(config_path)

    return _config_instance

def reload_config(config_path: Optional[str] = None) -> ConfigManager:
    """
    Reload the configuration.

    Args:
        config_path: Path to configuration file

    Returns:
        New ConfigManager instance
    """
    global _config_instance
    _config_instance = ConfigManager(config_path)
    return _config_instance
