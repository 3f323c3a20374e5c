# Suite Service - Batch verification of the distance inequalities over random reversible chains.
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from resources.resource_config import NumericDefaults
from src.model.distance_profile import DistanceKind
from src.model.errors import CopiesTooSmall
from src.model.family import FamilyParams
from src.model.markov_chain import ChainSpec, ProbDist
from src.model.reports import (INEQUALITY_NAMES, InequalityResult, SuiteConfig, SuiteReport,
                               WindowVerdict, Witness)
from src.services.chain_service import random_reversible_chain, resolve_equilibrium, spectral_gap
from src.services.family_service import build_family_chain
from src.services.log_service import get_logger
from src.services.metrics_service import start_distances, worst_case_values
from src.services.mixing_service import ProfileSource, mixing_time, technios_check

# Initialize logger for this module
logger = get_logger(__name__)

POINTWISE_NAMES = INEQUALITY_NAMES[:10]
PRODUCT_WINDOW = 'product_separation_window'
HELLINGER_WINDOW = 'hellinger_window'
NON_VACUOUS_HELLINGER = 0.5


@dataclass
class _ChainOutcome:
    index: int
    margins: list[tuple[str, float, Witness]] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)
    max_hellinger: float = 0.0


# ------------------------------------------------------------ chain sampling


def chain_seeds(config: SuiteConfig) -> list[int]:
    """One independent seed per chain, spawned from the master seed."""
    children = np.random.SeedSequence(config.master_seed).spawn(config.chain_count)
    return [int(child.generate_state(1)[0]) for child in children]


def chain_for_seed(config: SuiteConfig, seed: int) -> ChainSpec:
    lo, hi = config.state_range
    m = lo + seed % (hi - lo + 1)
    return random_reversible_chain(seed, m, min(config.degree, m - 1), config.rate_range)


def family_instance() -> ChainSpec:
    return build_family_chain(FamilyParams(NumericDefaults.FAMILY_SUITE_SIZE))[0]


def time_grid(config: SuiteConfig, gap: float) -> np.ndarray:
    lo, hi = config.grid_span
    return np.geomspace(lo / gap, hi / gap, config.grid_points)


# ------------------------------------------------------------- inequalities


def pointwise_margins(chain: ChainSpec, pi: ProbDist, t: float, names=POINTWISE_NAMES) -> dict[str, float]:
    """
    Margin lhs - rhs of every pointwise inequality at time t.

    Each distance comes from its own evaluation, so the two sides of an
    inequality never share an intermediate result.
    """
    wanted = set(names)
    tv_x = start_distances(chain, DistanceKind.TOTAL_VARIATION, [t], pi)[0]
    d = float(tv_x.max())
    results: dict[str, float] = {}

    def hellinger_at(time: float) -> np.ndarray:
        return start_distances(chain, DistanceKind.HELLINGER, [time], pi)[0]

    def worst(kind: DistanceKind, time: float) -> float:
        return float(worst_case_values(chain, kind, [time], pi)[0])

    h_x = hellinger_at(t)
    h = float(h_x.max())
    if 'hellinger_doubling' in wanted:
        results['hellinger_doubling'] = float(hellinger_at(2 * t).max()) - 7.0 * h ** 1.25
    if 'hellinger_naive_doubling' in wanted:
        results['hellinger_naive_doubling'] = float(hellinger_at(2 * t).max()) - math.sqrt(8.0) * h
    if 'tv_le_separation' in wanted:
        results['tv_le_separation'] = d - worst(DistanceKind.SEPARATION, t)
    if 'separation_le_4tv_half' in wanted:
        results['separation_le_4tv_half'] = worst(DistanceKind.SEPARATION, t) - 4.0 * worst(
            DistanceKind.TOTAL_VARIATION, t / 2)
    if 'tv_hellinger_pointwise' in wanted:
        results['tv_hellinger_pointwise'] = float(np.max(np.maximum(tv_x - h_x, h_x - np.sqrt(2.0 * tv_x))))
    if 'dbar_vs_tv' in wanted:
        dbar = worst(DistanceKind.PAIRWISE_TV, t)
        results['dbar_vs_tv'] = max(d - dbar, dbar - 2.0 * d)
    if 'dbar_vs_hellinger' in wanted:
        dbar = worst(DistanceKind.PAIRWISE_TV, t)
        results['dbar_vs_hellinger'] = max(dbar / 2.0 - h, h - math.sqrt(2.0 * dbar))
    if 'dbar_doubling_hellinger' in wanted:
        results['dbar_doubling_hellinger'] = worst(DistanceKind.PAIRWISE_TV, 2 * t) - 4.0 * h ** 2
    if 'separation_submultiplicative' in wanted:
        results['separation_submultiplicative'] = (worst(DistanceKind.SEPARATION, 2 * t)
                                                   - worst(DistanceKind.SEPARATION, t) ** 2)
    if 'dbar_submultiplicative' in wanted:
        results['dbar_submultiplicative'] = (worst(DistanceKind.PAIRWISE_TV, 2 * t)
                                             - worst(DistanceKind.PAIRWISE_TV, t) ** 2)
    return results


def hellinger_window_check(chain: ChainSpec, n: int, eps: float = NumericDefaults.PRODUCT_THRESHOLD,
                           slack: float = NumericDefaults.WINDOW_SLACK,
                           pi: Optional[ProbDist] = None) -> WindowVerdict:
    """
    Locate the n-fold product TV mixing window around the Hellinger threshold time.

    t_n = inf{t : d^H(t) <= n^(-3/7)} on the marginal. The product TV profile
    is bracketed by its Hellinger envelope; the verdict holds when the lower
    envelope's T(1 - eps) >= (1 - slack) t_n and the upper envelope's
    T(eps) <= 2 (1 + slack) t_n.
    """
    if n < 8:
        raise CopiesTooSmall(f"The Hellinger window needs at least 8 copies, got {n}.")
    pi = pi if pi is not None else resolve_equilibrium(chain)
    hellinger = ProfileSource.from_chain(chain, DistanceKind.HELLINGER, pi)
    tv = ProfileSource.from_chain(chain, DistanceKind.TOTAL_VARIATION, pi)
    t_n = mixing_time(hellinger, n ** (-3.0 / 7.0))
    lower = ProfileSource.tv_envelope(tv, hellinger, n, 'lower')
    upper = ProfileSource.tv_envelope(tv, hellinger, n, 'upper')
    lower_time = mixing_time(lower, 1.0 - eps)
    upper_time = mixing_time(upper, eps)
    scale = t_n if t_n > 0 else 1.0
    margin = max((1.0 - slack) * t_n - lower_time, upper_time - 2.0 * (1.0 + slack) * t_n) / scale
    return WindowVerdict(copies=n, epsilon=eps, t_n=t_n, lower_envelope_time=lower_time,
                         upper_envelope_time=upper_time, lower_at_t_n=lower(t_n),
                         upper_at_2t_n=upper(2.0 * t_n), margin=float(margin), holds=bool(margin <= 0.0))


# ------------------------------------------------------------------- driver


def _evaluate_chain(config: SuiteConfig, index: int, chain: ChainSpec, seed: Optional[int]) -> _ChainOutcome:
    outcome = _ChainOutcome(index)
    enabled = [name for name in config.inequalities if name in POINTWISE_NAMES]

    def fail(name: str, error: Exception, t: Optional[float] = None) -> None:
        logger.error(f"Chain {index} ({name}, t={t}): {error}", exc_info=True)
        outcome.errors.append({'chain_index': index, 'chain_seed': seed, 'inequality': name,
                               'time': t, 'error': f"{type(error).__name__}: {error}"})

    try:
        pi = resolve_equilibrium(chain)
        gap = spectral_gap(chain, pi)
    except Exception as e:
        for name in config.inequalities:
            fail(name, e)
        return outcome

    for t in time_grid(config, gap):
        witness = Witness(index, seed, chain.state_count, [float(t)])
        try:
            margins = pointwise_margins(chain, pi, float(t), enabled)
            h = float(start_distances(chain, DistanceKind.HELLINGER, [t], pi)[0].max())
            outcome.max_hellinger = max(outcome.max_hellinger, h)
        except Exception as e:
            for name in enabled:
                fail(name, e, float(t))
            continue
        outcome.margins.extend((name, margins[name], witness) for name in enabled)

    random_chain = seed is not None
    if PRODUCT_WINDOW in config.inequalities and random_chain and index < config.product_chain_count:
        try:
            verdict = technios_check(ProfileSource.from_chain(chain, DistanceKind.SEPARATION, pi),
                                     config.product_copies)
            times = [verdict.marginal_wide, verdict.product_early, verdict.product_late, verdict.marginal_narrow]
            outcome.margins.append((PRODUCT_WINDOW, verdict.margin,
                                    Witness(index, seed, chain.state_count, times)))
        except Exception as e:
            fail(PRODUCT_WINDOW, e)
    if HELLINGER_WINDOW in config.inequalities and random_chain and index < config.window_chain_count:
        try:
            verdict = hellinger_window_check(chain, config.window_copies, pi=pi)
            outcome.margins.append((HELLINGER_WINDOW, verdict.margin,
                                    Witness(index, seed, chain.state_count, [verdict.t_n])))
        except Exception as e:
            fail(HELLINGER_WINDOW, e)
    return outcome


def run_suite(config: SuiteConfig) -> SuiteReport:
    """
    Evaluate every enabled inequality over the random batch plus the family instance.

    Args:
        config: Batch parameters.

    Returns:
        SuiteReport; numeric errors are recorded per instance and never abort the batch.
    """
    seeds = chain_seeds(config)
    tasks: list[tuple[int, Optional[int]]] = [(index, seed) for index, seed in enumerate(seeds)]
    if config.include_family:
        tasks.append((len(seeds), None))
    logger.info(f"Running {len(config.inequalities)} inequalities over {len(tasks)} chains "
                f"(master seed {config.master_seed}, {config.threads} thread(s)).")

    def evaluate(task: tuple[int, Optional[int]]) -> _ChainOutcome:
        index, seed = task
        try:
            chain = chain_for_seed(config, seed) if seed is not None else family_instance()
        except Exception as e:
            logger.error(f"Could not build chain {index}: {e}", exc_info=True)
            outcome = _ChainOutcome(index)
            outcome.errors.append({'chain_index': index, 'chain_seed': seed, 'inequality': None,
                                   'time': None, 'error': f"{type(e).__name__}: {e}"})
            return outcome
        return _evaluate_chain(config, index, chain, seed)

    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        outcomes = list(pool.map(evaluate, tasks))

    results = {name: InequalityResult(name, config.tolerance(name)) for name in config.inequalities}
    errors: list[dict] = []
    max_hellinger = 0.0
    for outcome in outcomes:
        for name, margin, witness in outcome.margins:
            results[name].record(margin, witness)
        for record in outcome.errors:
            if record['inequality'] in results:
                results[record['inequality']].add_error()
        errors.extend(outcome.errors)
        max_hellinger = max(max_hellinger, outcome.max_hellinger)

    report = SuiteReport(master_seed=config.master_seed, chain_count=config.chain_count,
                         results=list(results.values()),
                         non_vacuous=max_hellinger > NON_VACUOUS_HELLINGER,
                         max_hellinger_seen=max_hellinger, errors=errors)
    for result in report.results:
        level = logger.info if result.passed else logger.warning
        level(f"{result.name}: {result.instances} instances, worst margin {result.worst_margin}, "
              f"{'pass' if result.passed else 'FAIL'}.")
    return report


def replay_witness(config: SuiteConfig, name: str, witness: Witness) -> float:
    """Recompute the margin of inequality ``name`` at a recorded witness."""
    if name not in INEQUALITY_NAMES:
        raise KeyError(name)
    chain = chain_for_seed(config, witness.chain_seed) if witness.chain_seed is not None else family_instance()
    pi = resolve_equilibrium(chain)
    if name == PRODUCT_WINDOW:
        return technios_check(ProfileSource.from_chain(chain, DistanceKind.SEPARATION, pi),
                              config.product_copies).margin
    if name == HELLINGER_WINDOW:
        return hellinger_window_check(chain, config.window_copies, pi=pi).margin
    return pointwise_margins(chain, pi, witness.times[0], [name])[name]
