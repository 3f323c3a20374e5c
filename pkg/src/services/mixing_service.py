# Mixing Service - Mixing times by bisection, cutoff/pre-cutoff diagnostics and condition (H).
import math
from typing import Callable, Optional, Sequence, Union

import numpy as np

from resources.resource_config import NumericDefaults
from src.model.distance_profile import DistanceKind, DistanceProfile
from src.model.errors import (AtLeastTwoSizes, CapTooSmall, InvalidThreshold, NotReversible,
                              OutOfRange, ZeroReferenceMass)
from src.model.markov_chain import ChainSpec, ProbDist
from src.model.reports import (CUTOFF_CONSISTENT, NEITHER, PRECUTOFF_CONSISTENT, MixingReport,
                               TechniosVerdict)
from src.model.uniformization import Uniformizer
from src.services.chain_service import resolve_equilibrium, spectral_gap
from src.services.log_service import get_logger
from src.services.metrics_service import worst_case_values
from src.services.product_service import product_hellinger, product_separation, product_tv_bounds

# Initialize logger for this module
logger = get_logger(__name__)

Evaluator = Callable[[np.ndarray], np.ndarray]


class ProfileSource:
    """
    A distance profile t -> d(t) evaluated lazily and memoized per time.

    ``default_cap`` is where an uncapped mixing-time search starts; ``gap``
    is the spectral gap of the underlying chain when it is known.
    """

    def __init__(self, evaluate: Evaluator, kind: DistanceKind, default_cap: float,
                 gap: Optional[float] = None, label: str = '') -> None:
        if not (default_cap > 0 and math.isfinite(default_cap)):
            raise OutOfRange(f"Search cap must be positive and finite, got {default_cap}.")
        self._evaluate = evaluate
        self.kind = kind
        self.default_cap = float(default_cap)
        self.gap = gap
        self.label = label
        self._memo: dict[float, float] = {}

    def __call__(self, t: float) -> float:
        t = float(t)
        if t not in self._memo:
            self._memo[t] = float(np.asarray(self._evaluate(np.array([t])), dtype=float)[0])
        return self._memo[t]

    def values(self, times: Sequence[float]) -> np.ndarray:
        grid = np.asarray(times, dtype=float)
        missing = np.array(sorted({float(t) for t in grid if float(t) not in self._memo}))
        if missing.size:
            for t, value in zip(missing, np.asarray(self._evaluate(missing), dtype=float)):
                self._memo[float(t)] = float(value)
        return np.array([self._memo[float(t)] for t in grid])

    def profile(self, times: Sequence[float]) -> DistanceProfile:
        return DistanceProfile(self.kind, np.asarray(times, dtype=float), self.values(times))

    @property
    def evaluations(self) -> int:
        return len(self._memo)

    # ---------------------------------------------------------------- factories

    @classmethod
    def from_chain(cls, chain: ChainSpec, kind: Union[DistanceKind, str],
                   pi: Optional[ProbDist] = None,
                   uniformizer: Optional[Uniformizer] = None) -> 'ProfileSource':
        kind = kind if isinstance(kind, DistanceKind) else DistanceKind.parse(kind)
        pi = pi if pi is not None else resolve_equilibrium(chain)
        try:
            gap = spectral_gap(chain, pi)
        except (NotReversible, ZeroReferenceMass):
            gap = None
        rate = gap if gap else chain.max_exit_rate
        return cls(lambda times: worst_case_values(chain, kind, times, pi, uniformizer),
                   kind, NumericDefaults.CAP_FACTOR / rate, gap=gap, label=repr(chain))

    @classmethod
    def product(cls, marginal: 'ProfileSource', n: int) -> 'ProfileSource':
        """n-fold product through the exact separation or Hellinger formula."""
        if marginal.kind is DistanceKind.SEPARATION:
            lift = product_separation
        elif marginal.kind is DistanceKind.HELLINGER:
            lift = product_hellinger
        else:
            raise OutOfRange(f"No exact product formula for {marginal.kind.value}; use tv_envelope.")
        return cls(lambda times: np.atleast_1d(lift(marginal.values(times), n)), marginal.kind,
                   marginal.default_cap, gap=marginal.gap, label=f"{marginal.label}^{n}")

    @classmethod
    def tv_envelope(cls, tv: 'ProfileSource', hellinger: 'ProfileSource', n: int,
                    side: str = 'upper') -> 'ProfileSource':
        """Lower or upper bound on the product TV profile."""
        if side not in ('lower', 'upper'):
            raise OutOfRange(f"Envelope side must be 'lower' or 'upper', got {side!r}.")
        position = 0 if side == 'lower' else 1

        def evaluate(times: np.ndarray) -> np.ndarray:
            pairs = zip(tv.values(times), hellinger.values(times))
            return np.array([product_tv_bounds(h, d, n)[position] for d, h in pairs])

        return cls(evaluate, DistanceKind.TOTAL_VARIATION, tv.default_cap, gap=tv.gap,
                   label=f"{tv.label}^{n}:{side}")

    @classmethod
    def from_function(cls, fn: Callable[[float], float], kind: Union[DistanceKind, str],
                      cap: float, gap: Optional[float] = None) -> 'ProfileSource':
        kind = kind if isinstance(kind, DistanceKind) else DistanceKind.parse(kind)
        return cls(lambda times: np.array([fn(float(t)) for t in times]), kind, cap, gap=gap,
                   label=getattr(fn, '__name__', 'function'))


# ------------------------------------------------------------------- search


def _check_threshold(a: float) -> float:
    if not (0.0 < a < 1.0):
        raise InvalidThreshold(f"Threshold must lie in (0, 1), got {a}.")
    return float(a)


def resolve_cap(source: ProfileSource, a: float, t_hi: Optional[float] = None) -> float:
    """
    Search cap with d(cap) < a.

    Args:
        source: Profile to search.
        a: Threshold.
        t_hi: Explicit cap; when given it must already satisfy d(t_hi) < a.

    Returns:
        The cap, doubled from ``source.default_cap`` as often as needed when ``t_hi`` is None.
    """
    if t_hi is not None:
        if not (t_hi > 0):
            raise CapTooSmall(f"Search cap must be positive, got {t_hi}.")
        if source(t_hi) >= a:
            raise CapTooSmall(f"d({t_hi:.6g}) = {source(t_hi):.6g} is not below threshold {a}.")
        return float(t_hi)
    cap = source.default_cap
    for _ in range(NumericDefaults.MAX_CAP_DOUBLINGS):
        if source(cap) < a:
            return cap
        logger.warning(f"d({cap:.6g}) = {source(cap):.6g} >= {a} for {source.label}; doubling the search cap.")
        cap *= 2.0
    if source(cap) < a:
        return cap
    raise CapTooSmall(f"Distance stayed above {a} up to t = {cap:.6g}.")


def mixing_time(source: ProfileSource, a: float, t_hi: Optional[float] = None,
                rel_width: float = NumericDefaults.BISECTION_REL_WIDTH) -> float:
    """
    inf{t : d(t) < a} by dyadic bisection on [0, t_hi].

    Args:
        source: Profile to search.
        a: Threshold in (0, 1).
        t_hi: Search cap; grown from the source default when omitted.
        rel_width: Final bracket width as a fraction of the cap.

    Returns:
        Right edge of the final bracket, the leftmost evaluated time with d < a.
    """
    a = _check_threshold(a)
    if not (0.0 < rel_width < 1.0):
        raise OutOfRange(f"Relative bracket width must lie in (0, 1), got {rel_width}.")
    if a >= source(0.0):
        return 0.0
    cap = resolve_cap(source, a, t_hi)
    lo, hi = 0.0, cap
    for _ in range(int(math.ceil(math.log2(1.0 / rel_width)))):
        mid = 0.5 * (lo + hi)
        if source(mid) < a:
            hi = mid
        else:
            lo = mid
    return hi


def mixing_times(source: ProfileSource, thresholds: Sequence[float], t_hi: Optional[float] = None,
                 rel_width: float = NumericDefaults.BISECTION_REL_WIDTH) -> tuple[list[float], float]:
    # One cap for every threshold keeps all searches on the same dyadic grid, so results are monotone.
    levels = [_check_threshold(a) for a in thresholds]
    hardest = min(levels)
    cap = t_hi if t_hi is not None else (resolve_cap(source, hardest) if hardest < source(0.0) else source.default_cap)
    return [mixing_time(source, a, cap, rel_width) if a < source(0.0) else 0.0 for a in levels], cap


# ------------------------------------------------------------- diagnostics


def _check_eps_list(eps_list: Sequence[float]) -> list[float]:
    values = [float(eps) for eps in eps_list]
    if not values:
        raise InvalidThreshold("At least one epsilon is required.")
    for eps in values:
        if not (0.0 < eps <= 0.5):
            raise InvalidThreshold(f"Ratio thresholds must lie in (0, 1/2], got {eps}.")
    return values


def mixing_report(source: ProfileSource, eps_list: Sequence[float], size: Optional[int] = None,
                  t_hi: Optional[float] = None,
                  rel_width: float = NumericDefaults.BISECTION_REL_WIDTH) -> MixingReport:
    """Mixing times at every eps and 1 - eps, their ratios and, for TV with a known gap, condition (H)."""
    eps_values = _check_eps_list(eps_list)
    thresholds = set(eps_values) | {1.0 - eps for eps in eps_values}
    with_h = source.kind is DistanceKind.TOTAL_VARIATION and source.gap is not None
    if with_h:
        thresholds.add(0.25)
    thresholds = sorted(thresholds)
    times, cap = mixing_times(source, thresholds, t_hi, rel_width)
    by_threshold = dict(zip(thresholds, times))

    ratios = []
    for eps in eps_values:
        late, early = by_threshold[eps], by_threshold[1.0 - eps]
        ratios.append(late / early if early > 0 else (1.0 if late == 0 else math.inf))
    report = MixingReport(kind=source.kind.value, size=size, thresholds=thresholds, mixing_times=times,
                          eps_list=eps_values, ratios=ratios, gap=source.gap, search_cap=cap)
    if with_h:
        report.condition_h = by_threshold[0.25] * source.gap
    return report


def classify(reports: Sequence[MixingReport], delta: float = NumericDefaults.CUTOFF_DELTA,
             precutoff_bound: float = NumericDefaults.PRECUTOFF_BOUND) -> str:
    largest = max(reports, key=lambda report: report.size if report.size is not None else -1)
    if all(ratio <= 1.0 + delta for ratio in largest.ratios):
        return CUTOFF_CONSISTENT
    if all(ratio <= precutoff_bound for report in reports for ratio in report.ratios):
        return PRECUTOFF_CONSISTENT
    return NEITHER


def cutoff_diagnostics(family: Sequence[tuple[int, Union[ChainSpec, ProfileSource]]],
                       kind: Union[DistanceKind, str], eps_list: Sequence[float],
                       delta: float = NumericDefaults.CUTOFF_DELTA,
                       precutoff_bound: float = NumericDefaults.PRECUTOFF_BOUND,
                       rel_width: float = NumericDefaults.BISECTION_REL_WIDTH) -> list[MixingReport]:
    """
    Mixing-time ratio curves t(eps)/t(1 - eps) over a sequence of sizes.

    Args:
        family: ``(size, chain or profile source)`` pairs.
        kind: Distance kind used for chains given directly.
        eps_list: Thresholds in (0, 1/2].
        delta: Cutoff tag needs every ratio of the largest size within 1 + delta.
        precutoff_bound: Pre-cutoff tag needs every ratio below this bound.
        rel_width: Bisection resolution.

    Returns:
        One MixingReport per size, in input order, all tagged with the sequence classification.
    """
    members = list(family)
    if len(members) < 2:
        raise AtLeastTwoSizes(f"Cutoff diagnostics need at least two sizes, got {len(members)}.")
    kind = kind if isinstance(kind, DistanceKind) else DistanceKind.parse(kind)
    reports = []
    for size, member in members:
        source = member if isinstance(member, ProfileSource) else ProfileSource.from_chain(member, kind)
        report = mixing_report(source, eps_list, size=size, rel_width=rel_width)
        logger.info(f"Size {size}: ratios {dict(zip(report.eps_list, report.ratios))}.")
        reports.append(report)
    tag = classify(reports, delta, precutoff_bound)
    for report in reports:
        report.classification = tag
    return reports


def condition_H(chain: ChainSpec, kind: Union[DistanceKind, str] = DistanceKind.TOTAL_VARIATION,
                pi: Optional[ProbDist] = None) -> float:
    """t_mix(1/4) times the spectral gap."""
    pi = pi if pi is not None else resolve_equilibrium(chain)
    gap = spectral_gap(chain, pi)
    source = ProfileSource.from_chain(chain, kind, pi)
    return mixing_time(source, 0.25) * gap


def technios_check(marginal: ProfileSource, n: int, eps: float = NumericDefaults.PRODUCT_THRESHOLD,
                   ratio_slack: float = NumericDefaults.PRODUCT_RATIO_SLACK,
                   rel_width: float = NumericDefaults.BISECTION_REL_WIDTH) -> TechniosVerdict:
    """
    Window of the n-fold product separation mixing times inside marginal ones.

    Checks t_s(n^-2/3) <= T_s(1 - eps) <= T_s(eps) <= t_s(n^-4/3) <= 2 t_s(n^-2/3)
    and T_s(eps) / T_s(1 - eps) <= 2 + ratio_slack. Each link may be off by two
    bisection steps; margins are relative to t_s(n^-4/3).
    """
    if marginal.kind is not DistanceKind.SEPARATION:
        raise OutOfRange(f"The product window is stated for separation, got {marginal.kind.value}.")
    eps = _check_threshold(eps)
    if eps >= 0.5:
        raise InvalidThreshold(f"Window threshold must lie below 1/2, got {eps}.")
    wide_level, narrow_level = n ** (-2.0 / 3.0), n ** (-4.0 / 3.0)
    product = ProfileSource.product(marginal, n)

    cap = resolve_cap(marginal, narrow_level)
    if product(cap) >= eps:
        cap = resolve_cap(product, eps)
    wide, narrow = mixing_times(marginal, [wide_level, narrow_level], cap, rel_width)[0]
    early, late = mixing_times(product, [1.0 - eps, eps], cap, rel_width)[0]

    step = cap * 2.0 ** -math.ceil(math.log2(1.0 / rel_width))
    scale = narrow if narrow > 0 else 1.0
    links = [wide - early, early - late, late - narrow, narrow - 2.0 * wide]
    ratio = late / early if early > 0 else math.inf
    margin = max(max((gap - 2.0 * step) / scale for gap in links), ratio - (2.0 + ratio_slack))
    return TechniosVerdict(copies=n, epsilon=eps, marginal_wide=wide, product_late=late,
                           product_early=early, marginal_narrow=narrow, ratio=ratio,
                           margin=float(margin), holds=bool(margin <= 0.0))
