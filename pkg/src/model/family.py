"""
Parameters of the two-route counterexample graph and its hitting-time profile.

Layout: a red path v_0 = A, ..., v_n = B, ..., v_2n = C plus one green edge B-C.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from resources.resource_config import NumericDefaults
from src.model.distance_profile import DistanceProfile
from src.model.errors import DimensionMismatch, EpsilonOutOfRange, OutOfRange


@dataclass(frozen=True)
class FamilyParams:
    """Size ``n`` and backtrack rate ``epsilon`` of the graph G_n.

    When ``epsilon`` is omitted it is 2^(-n^2) for n up to
    ``SMALL_FAMILY_MAX_N`` and ``FAMILY_DEFAULT_EPSILON`` beyond.
    """

    n: int
    epsilon: Optional[float] = None

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 2:
            raise OutOfRange(f"Family size n must be an integer >= 2, got {self.n}.")
        object.__setattr__(self, 'n', int(self.n))
        if self.epsilon is None:
            default = (2.0 ** -(self.n * self.n) if self.n <= NumericDefaults.SMALL_FAMILY_MAX_N
                       else NumericDefaults.FAMILY_DEFAULT_EPSILON)
            object.__setattr__(self, 'epsilon', default)
        eps = float(self.epsilon)
        if not (0.0 < eps < 1.0):
            raise EpsilonOutOfRange(f"Backtrack rate must lie in (0, 1), got {eps}.")
        object.__setattr__(self, 'epsilon', eps)

    @property
    def state_count(self) -> int:
        return 2 * self.n + 1

    @property
    def start(self) -> int:
        return 0

    @property
    def junction(self) -> int:
        return self.n

    @property
    def target(self) -> int:
        return 2 * self.n

    @property
    def log_epsilon(self) -> float:
        return math.log(self.epsilon)

    @property
    def log_back_rate(self) -> float:
        # C -> B rate (n - 1) * eps^n, fixed by detailed balance around the cycle.
        return math.log(self.n - 1) + self.n * self.log_epsilon

    @property
    def back_rate(self) -> float:
        return math.exp(self.log_back_rate)

    @property
    def time_scale(self) -> float:
        # Drift toward C is 1 - eps per unit time.
        return self.n / (1.0 - self.epsilon)

    def labels(self) -> tuple[str, ...]:
        names = [f"v{i}" for i in range(self.state_count)]
        names[self.start], names[self.junction], names[self.target] = 'A', 'B', 'C'
        return tuple(names)


@dataclass(frozen=True, eq=False)
class HittingProfile:
    """Survival P(tau_C > t) from A, with its scaled form n * P(tau > s n)."""

    params: FamilyParams
    times: np.ndarray
    survival: np.ndarray
    s_grid: np.ndarray = field(default_factory=lambda: np.empty(0))
    scaled: np.ndarray = field(default_factory=lambda: np.empty(0))
    tv_profile: Optional[DistanceProfile] = None

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        survival = np.asarray(self.survival, dtype=float)
        if times.shape != survival.shape:
            raise DimensionMismatch(f"{times.size} times but {survival.size} survival values.")
        if np.any(survival < 0) or np.any(survival > 1):
            raise OutOfRange("Survival probabilities must lie in [0, 1].")
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'survival', survival)
        object.__setattr__(self, 's_grid', np.asarray(self.s_grid, dtype=float))
        object.__setattr__(self, 'scaled', np.asarray(self.scaled, dtype=float))

    def max_tv_gap(self) -> float:
        """sup over the grid of |d_n(t) - P(tau > t)|; requires the TV profile."""
        if self.tv_profile is None:
            raise ValueError("Hitting profile was built without its TV profile.")
        return float(np.max(np.abs(self.tv_profile.values - self.survival)))
