"""
Distance kinds and distance-to-equilibrium profiles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import pandas as pd

from resources.resource_config import NumericDefaults
from src.model.errors import DimensionMismatch, OutOfRange, ProfileInvariantError


class DistanceKind(str, Enum):
    TOTAL_VARIATION = 'tv'
    SEPARATION = 'sep'
    HELLINGER = 'hellinger'
    PAIRWISE_TV = 'pairwise'

    @property
    def upper_bound(self) -> float:
        return math.sqrt(2.0) if self is DistanceKind.HELLINGER else 1.0

    @classmethod
    def parse(cls, name: str) -> DistanceKind:
        aliases = {
            'tv': cls.TOTAL_VARIATION, 'total_variation': cls.TOTAL_VARIATION,
            'sep': cls.SEPARATION, 'separation': cls.SEPARATION,
            'hellinger': cls.HELLINGER,
            'pairwise': cls.PAIRWISE_TV, 'pairwise_tv': cls.PAIRWISE_TV,
        }
        try:
            return aliases[name.strip().lower()]
        except KeyError:
            raise OutOfRange(f"Unknown distance kind '{name}'. Expected one of {sorted(aliases)}.") from None


@dataclass(frozen=True, eq=False)
class DistanceProfile:
    """Distance values on a strictly increasing time grid, tagged by kind.

    Values must lie in the kind's range and be nonincreasing in time up to
    a small slack; overshoots within ``RANGE_SLACK`` are clipped.
    """

    kind: DistanceKind
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float).ravel()
        values = np.asarray(self.values, dtype=float).ravel()
        if times.shape != values.shape:
            raise DimensionMismatch(f"{times.size} times but {values.size} values.")
        if times.size and (times[0] < 0 or np.any(np.diff(times) <= 0)):
            raise OutOfRange("Profile times must be nonnegative and strictly increasing.")
        if not np.all(np.isfinite(values)):
            raise ProfileInvariantError(f"Non-finite {self.kind.value} values in profile.")

        slack = NumericDefaults.RANGE_SLACK
        upper = self.kind.upper_bound
        if np.any(values < -slack) or np.any(values > upper + slack):
            raise ProfileInvariantError(
                f"{self.kind.value} values must lie in [0, {upper:.6g}], got [{values.min():.6g}, {values.max():.6g}].")
        values = np.clip(values, 0.0, upper)

        rises = np.diff(values)
        if rises.size and rises.max() > NumericDefaults.MONOTONE_SLACK:
            at = int(np.argmax(rises))
            raise ProfileInvariantError(
                f"{self.kind.value} profile increases by {rises[at]:.3g} between t={times[at]:.6g} and t={times[at + 1]:.6g}.")

        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'values', values)

    def __len__(self) -> int:
        return int(self.times.size)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'time': self.times, 'value': self.values})

    @classmethod
    def from_frame(cls, kind: DistanceKind, frame: pd.DataFrame) -> DistanceProfile:
        return cls(kind, frame['time'].to_numpy(dtype=float), frame['value'].to_numpy(dtype=float))

    def to_dict(self) -> dict:
        return {'kind': self.kind.value, 'times': self.times.tolist(), 'values': self.values.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> DistanceProfile:
        return cls(DistanceKind.parse(payload['kind']), np.asarray(payload['times'], dtype=float),
                   np.asarray(payload['values'], dtype=float))
