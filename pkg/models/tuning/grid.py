"""
Hyperparameter grids for the sequential per-component search.
"""

from dataclasses import dataclass, field
from itertools import product
from typing import List, Optional, Sequence, Tuple

import numpy as np

from models.engines.model import DEFAULT_DELTA, Hyperparams
from utils.errors import ParameterError

__all__ = ["DEFAULT_AXIS", "EXTENDED_GAMMA_TAIL", "DEFAULT_BANDWIDTHS", "GridPoint", "TuningGrid", "default_grid"]

# 0.05 steps up to 0.1, 0.1 steps up to 1, unit steps up to 5
DEFAULT_AXIS = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 2.0, 3.0, 4.0, 5.0)
EXTENDED_GAMMA_TAIL = (6.0, 7.0, 8.0, 9.0, 10.0, 20.0, 30.0, 40.0, 50.0)
DEFAULT_BANDWIDTHS = (0.1, 1.0, 10.0)


@dataclass(frozen=True)
class GridPoint:
    hyper: Hyperparams
    h: Optional[float] = None

    def sort_key(self) -> Tuple[float, ...]:
        return (*self.hyper.key(), self.h if self.h is not None else 0.0)


@dataclass(frozen=True)
class TuningGrid:
    gammas: Tuple[float, ...] = DEFAULT_AXIS
    lambda1s: Tuple[float, ...] = DEFAULT_AXIS
    ratios: Tuple[float, ...] = DEFAULT_AXIS
    include_zero_combo: bool = True
    bandwidths: Tuple[float, ...] = field(default_factory=tuple)
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        for name in ("gammas", "lambda1s", "ratios", "bandwidths"):
            values = tuple(float(v) for v in getattr(self, name))
            if any(not np.isfinite(v) or v < 0 for v in values):
                raise ParameterError(f"grid axis {name} must hold finite nonnegative values, got {values}")
            object.__setattr__(self, name, values)
        if any(h <= 0 for h in self.bandwidths):
            raise ParameterError("kernel bandwidths must be positive")

    def points(self) -> List[GridPoint]:
        """All combinations, zero combination first, in a fixed order."""
        hs: Sequence[Optional[float]] = self.bandwidths or (None,)
        points = []
        seen = set()
        if self.include_zero_combo:
            for h in hs:
                points.append(GridPoint(Hyperparams(delta=self.delta), h))
                seen.add((0.0, 0.0, 0.0, h))
        for g, l1, ratio, h in product(self.gammas, self.lambda1s, self.ratios, hs):
            hyper = Hyperparams.from_ratio(g, l1, ratio if l1 > 0 else 0.0, delta=self.delta)
            key = (*hyper.key(), h)
            if key in seen:
                continue
            seen.add(key)
            points.append(GridPoint(hyper, h))
        if not points:
            raise ParameterError("tuning grid is empty")
        return points

    def __len__(self) -> int:
        return len(self.points())


def default_grid(extended: bool = False, bandwidths: Sequence[float] = ()) -> TuningGrid:
    """
    Default search grid: every axis is DEFAULT_AXIS plus the (0, 0, 0)
    combination. ``extended`` appends EXTENDED_GAMMA_TAIL to the γ axis.
    """
    gammas = DEFAULT_AXIS + EXTENDED_GAMMA_TAIL if extended else DEFAULT_AXIS
    return TuningGrid(gammas=gammas, bandwidths=tuple(bandwidths))
