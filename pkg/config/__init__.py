"""
Configuration module for RapPCA.
Provides easy access to configuration management.
"""

__version__ = "0.1.0"

from .config_loader import (  # noqa: E402
    ConfigManager,
    get_config,
    reload_config,
    DataConfig,
    MethodConfig,
    KernelConfig,
    SplineConfig,
    HyperConfig,
    GridConfig,
    CVConfig,
    PredictorConfig,
    SimulationConfig,
    VerificationConfig,
    OutputConfig,
    PerformanceConfig,
)

__all__ = [
    "__version__",
    "ConfigManager",
    "get_config",
    "reload_config",
    "DataConfig",
    "MethodConfig",
    "KernelConfig",
    "SplineConfig",
    "HyperConfig",
    "GridConfig",
    "CVConfig",
    "PredictorConfig",
    "SimulationConfig",
    "VerificationConfig",
    "OutputConfig",
    "PerformanceConfig",
]
