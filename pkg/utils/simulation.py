"""
Synthetic spatial datasets with known principal components.

Six independent PC score vectors are generated at n uniform locations on the
unit square, each PC(l) = f_l(X) + ε_l with ε_l ~ Normal(0, σ_l² Σ) and Σ an
exponential-type covariance over the locations. Outcomes are Y = PC·M + ε
with i.i.d. Normal(0, noise_var) noise.

Scenarios:
    1  three PCs linear in X, three pure spatial noise; PCs rescaled to unit sd
    2  as 1 with the mixing rows scaled to decaying norm
    3  as 1 with squared and consecutive-pair interaction means
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import List, Tuple

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from utils.dataset import Dataset
from utils.errors import DataError, ParameterError, check_matrix
from utils.logger import logger
from utils.seeding import derive_seed, make_rng

__all__ = [
    "SCENARIOS",
    "ScenarioConfig",
    "SimTruth",
    "exp_cov",
    "sample_mvn",
    "decay_weights",
    "gen_scenario",
    "gen_replicates",
]

SCENARIOS = (1, 2, 3)
PSD_TOL = 1e-10
PREDICTABLE_PCS = 3


@dataclass(frozen=True)
class ScenarioConfig:
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
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ParameterError(f"Unknown scenario {self.scenario}. Must be one of {SCENARIOS}")
        for name in ("n", "d", "p", "n_pcs"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_pcs <= PREDICTABLE_PCS:
            raise ParameterError(f"n_pcs must exceed {PREDICTABLE_PCS}, got {self.n_pcs}")
        if self.noise_var < 0 or self.cov_range <= 0:
            raise ParameterError("noise_var must be nonnegative and cov_range positive")
        if self.decay != "linear":
            raise ParameterError(f"Unknown decay law '{self.decay}'; only 'linear' is available")


@dataclass(frozen=True)
class SimTruth:
    pcs: np.ndarray        # n×n_pcs true scores
    M: np.ndarray          # n_pcs×p mixing matrix Λ·M̃
    M_tilde: np.ndarray    # n_pcs×p unscaled mixing weights
    means: np.ndarray      # n×n_pcs values of f_l
    Sigma: np.ndarray      # n×n spatial covariance
    noise: np.ndarray      # n×p outcome noise ε

    def signal(self) -> np.ndarray:
        return self.pcs @ self.M


def exp_cov(coords, cov_range: float = 0.5, partial_sill: float = 0.5, constant: float = 0.5) -> np.ndarray:
    """Σ_ii' = partial_sill·exp(−‖s_i − s_i'‖² / cov_range) + constant."""
    coords = check_matrix(coords, "coords", ncols=2)
    return partial_sill * np.exp(-cdist(coords, coords, "sqeuclidean") / cov_range) + constant


def sample_mvn(Sigma, seed: int, var: float = 1.0) -> np.ndarray:
    """
    One draw from Normal(0, var·Σ) through the symmetric eigen-factorization
    of Σ (eigenvalues down to −1e−10 are clipped to zero).
    """
    Sigma = np.asarray(Sigma, dtype=np.float64)
    n = Sigma.shape[0]
    if var == 0:
        return np.zeros(n)
    if var < 0:
        raise ParameterError(f"variance must be nonnegative, got {var}")
    w, E = linalg.eigh(0.5 * (Sigma + Sigma.T))
    if w[0] < -PSD_TOL * max(1.0, abs(w[-1])):
        raise DataError(f"covariance matrix is indefinite (smallest eigenvalue {w[0]:.3e})")
    z = make_rng(seed).standard_normal(n)
    return np.sqrt(var) * (E @ (np.sqrt(np.clip(w, 0.0, None)) * z))


def decay_weights(n_pcs: int) -> np.ndarray:
    """Linear norm decay from 1 down to 1/n_pcs."""
    return (n_pcs - np.arange(n_pcs)) / n_pcs


def _locations(cfg: ScenarioConfig) -> np.ndarray:
    attempt = 0
    while True:
        coords = make_rng(derive_seed(cfg.seed, "coords", attempt)).uniform(0.0, 1.0, size=(cfg.n, 2))
        if np.unique(coords, axis=0).shape[0] == cfg.n:
            return coords
        attempt += 1
        logger.warning(f"Duplicate simulated coordinates; resampling (attempt {attempt})")


def _mean_functions(cfg: ScenarioConfig, X: np.ndarray) -> np.ndarray:
    rng = make_rng(derive_seed(cfg.seed, "coefficients"))
    means = np.zeros((cfg.n, cfg.n_pcs))
    for l in range(PREDICTABLE_PCS):
        beta = rng.uniform(-1.0, 1.0, size=cfg.d)
        if cfg.scenario == 3:
            pairs = cfg.d // 2
            alpha = rng.uniform(-1.0, 1.0, size=pairs)
            interactions = X[:, 0:2 * pairs:2] * X[:, 1:2 * pairs:2]
            means[:, l] = (X ** 2) @ beta + 2.0 * interactions @ alpha
        else:
            means[:, l] = X @ beta
    return means


def gen_scenario(cfg: ScenarioConfig) -> Tuple[Dataset, SimTruth]:
    """
    Generate one replicate.

    Returns:
        (Dataset with ids 1..n, SimTruth)
    """
    coords = _locations(cfg)
    X = make_rng(derive_seed(cfg.seed, "covariates")).uniform(-1.0, 1.0, size=(cfg.n, cfg.d))
    Sigma = exp_cov(coords, cfg.cov_range, cfg.cov_partial_sill, cfg.cov_constant)

    means = _mean_functions(cfg, X)
    pcs = means.copy()
    for l in range(PREDICTABLE_PCS, cfg.n_pcs):
        pcs[:, l] += sample_mvn(Sigma, derive_seed(cfg.seed, "pc_noise", l), var=1.0)

    M_tilde = make_rng(derive_seed(cfg.seed, "mixing")).uniform(-1.0, 1.0, size=(cfg.n_pcs, cfg.p))
    if cfg.scenario == 2:
        norms = np.linalg.norm(M_tilde, axis=1)
        M_tilde = M_tilde / norms[:, None] * (decay_weights(cfg.n_pcs) * norms.mean())[:, None]
    sd = pcs.std(axis=0, ddof=1)
    if np.any(sd <= 0):
        raise DataError("a simulated PC has zero variance")
    M = np.diag(1.0 / sd) @ M_tilde

    noise = np.sqrt(cfg.noise_var) * make_rng(derive_seed(cfg.seed, "noise")).standard_normal((cfg.n, cfg.p))
    Y = pcs @ M + noise
    data = Dataset.from_arrays(
        Y,
        coords,
        X,
        covariate_names=tuple(f"x{j + 1}" for j in range(cfg.d)),
        outcome_names=tuple(f"y{j + 1}" for j in range(cfg.p)),
    )
    logger.debug(f"Scenario {cfg.scenario} replicate: n={cfg.n}, d={cfg.d}, p={cfg.p}, seed={cfg.seed}")
    return data, SimTruth(pcs=pcs, M=M, M_tilde=M_tilde, means=means, Sigma=Sigma, noise=noise)


def gen_replicates(cfg: ScenarioConfig, replicates: int, max_workers: int = 1) -> List[Tuple[Dataset, SimTruth]]:
    """Replicate i uses seed derive_seed(cfg.seed, "replicate", i)."""
    configs = [ScenarioConfig(**{**asdict(cfg), "seed": derive_seed(cfg.seed, "replicate", i)}) for i in range(replicates)]
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            return list(executor.map(gen_scenario, configs))
    return [gen_scenario(c) for c in configs]
