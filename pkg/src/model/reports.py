"""
Result records produced by the services and serialized by the file service.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

from resources.resource_config import NumericDefaults, default_thread_count
from src.model.errors import InvalidConfig

CUTOFF_CONSISTENT = 'cutoff-consistent'
PRECUTOFF_CONSISTENT = 'precutoff-consistent'
NEITHER = 'neither'

SUITE_SCHEMA_VERSION = 1

INEQUALITY_NAMES: tuple[str, ...] = (
    'hellinger_doubling',
    'hellinger_naive_doubling',
    'tv_le_separation',
    'separation_le_4tv_half',
    'tv_hellinger_pointwise',
    'dbar_vs_tv',
    'dbar_vs_hellinger',
    'dbar_doubling_hellinger',
    'separation_submultiplicative',
    'dbar_submultiplicative',
    'product_separation_window',
    'hellinger_window',
)


@dataclass(frozen=True)
class BalanceVerdict:
    balanced: bool
    worst_edge: Optional[tuple[int, int]]
    worst_violation: float

    def __bool__(self) -> bool:
        return self.balanced


@dataclass
class MixingReport:
    """Mixing times, threshold ratios and condition (H) for one size."""

    kind: str
    size: Optional[int] = None
    thresholds: list[float] = field(default_factory=list)
    mixing_times: list[float] = field(default_factory=list)
    eps_list: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)
    gap: Optional[float] = None
    condition_h: Optional[float] = None
    search_cap: Optional[float] = None
    classification: Optional[str] = None

    def mixing_time(self, threshold: float) -> float:
        return self.mixing_times[self.thresholds.index(threshold)]

    def ratio(self, eps: float) -> float:
        return self.ratios[self.eps_list.index(eps)]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TechniosVerdict:
    """The window chain t_s(n^-2/3) <= T(1-e) <= T(e) <= t_s(n^-4/3) <= 2 t_s(n^-2/3)."""

    copies: int
    epsilon: float
    marginal_wide: float
    product_late: float
    product_early: float
    marginal_narrow: float
    ratio: float
    margin: float
    holds: bool


@dataclass(frozen=True)
class WindowVerdict:
    """Hellinger threshold time t_n and the product-TV envelope mixing times around it."""

    copies: int
    epsilon: float
    t_n: float
    lower_envelope_time: float
    upper_envelope_time: float
    lower_at_t_n: float
    upper_at_2t_n: float
    margin: float
    holds: bool


@dataclass(frozen=True)
class MinorizationVerdict:
    holds: bool
    worst_log_margin: float
    worst_pair: tuple[int, int]
    worst_time: float
    max_separation_tv_gap: float


@dataclass(frozen=True)
class Witness:
    chain_index: int
    chain_seed: Optional[int]
    state_count: int
    times: list[float]


@dataclass
class InequalityResult:
    name: str
    tolerance: float
    instances: int = 0
    worst_margin: Optional[float] = None
    passed: bool = False
    witness: Optional[Witness] = None
    errors: int = 0

    def record(self, margin: float, witness: Witness) -> None:
        self.instances += 1
        if self.worst_margin is None or margin > self.worst_margin:
            self.worst_margin = float(margin)
            self.witness = witness
        self._refresh()

    def add_error(self) -> None:
        self.errors += 1
        self._refresh()

    def _refresh(self) -> None:
        # An errored or empty check never counts as passed.
        self.passed = (self.errors == 0 and self.instances > 0
                       and self.worst_margin is not None and self.worst_margin <= self.tolerance)


@dataclass(frozen=True)
class SuiteConfig:
    """Batch parameters for the inequality suite."""

    master_seed: int = 0
    chain_count: int = NumericDefaults.SUITE_CHAIN_COUNT
    state_range: tuple[int, int] = NumericDefaults.SUITE_STATE_RANGE
    degree: float = NumericDefaults.SUITE_DEGREE
    rate_range: tuple[float, float] = NumericDefaults.SUITE_RATE_RANGE
    grid_points: int = NumericDefaults.SUITE_GRID_POINTS
    grid_span: tuple[float, float] = NumericDefaults.SUITE_GRID_SPAN
    tolerances: dict = field(default_factory=dict)
    inequalities: tuple[str, ...] = INEQUALITY_NAMES
    product_copies: int = NumericDefaults.PRODUCT_COPIES
    product_chain_count: int = NumericDefaults.PRODUCT_CHAIN_COUNT
    window_copies: int = NumericDefaults.WINDOW_COPIES
    window_chain_count: int = NumericDefaults.WINDOW_CHAIN_COUNT
    include_family: bool = True
    threads: int = field(default_factory=default_thread_count)

    def __post_init__(self) -> None:
        if self.chain_count < 1:
            raise InvalidConfig(f"Chain count must be at least 1, got {self.chain_count}.")
        lo, hi = self.state_range
        if lo < 2 or hi < lo:
            raise InvalidConfig(f"State-count range must satisfy 2 <= lo <= hi, got {self.state_range}.")
        if self.grid_points < 2:
            raise InvalidConfig("The time grid needs at least two points.")
        if not (0 < self.grid_span[0] < self.grid_span[1]):
            raise InvalidConfig(f"Grid span must satisfy 0 < lo < hi, got {self.grid_span}.")
        if self.threads < 1:
            raise InvalidConfig("Thread count must be positive.")
        unknown = [name for name in self.inequalities if name not in INEQUALITY_NAMES]
        if unknown or not self.inequalities:
            raise InvalidConfig(f"Unknown or empty inequality selection: {unknown}.")
        unknown_tol = [key for key in self.tolerances if key not in INEQUALITY_NAMES]
        if unknown_tol:
            raise InvalidConfig(f"Tolerance given for unknown inequalities: {unknown_tol}.")
        if any(not (value > 0) for value in self.tolerances.values()):
            raise InvalidConfig("Tolerances must be strictly positive.")

    def tolerance(self, name: str) -> float:
        return float(self.tolerances.get(name, NumericDefaults.INEQUALITY_TOLERANCE))


@dataclass
class SuiteReport:
    master_seed: int
    chain_count: int
    results: list[InequalityResult]
    non_vacuous: bool
    max_hellinger_seen: float
    errors: list[dict] = field(default_factory=list)
    schema_version: int = SUITE_SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return self.non_vacuous and not self.errors and all(result.passed for result in self.results)

    def result(self, name: str) -> InequalityResult:
        for item in self.results:
            if item.name == name:
                return item
        raise KeyError(name)

    def to_dict(self) -> dict:
        payload = {'schema_version': self.schema_version, 'passed': self.passed}
        payload.update({key: value for key, value in asdict(self).items() if key != 'schema_version'})
        return payload
