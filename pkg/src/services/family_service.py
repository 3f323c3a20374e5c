# Family Service - The two-route graph chain, its hitting-time profile and scaled-profile checks.
import math
import warnings
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from resources.resource_config import NumericDefaults
from src.model.distance_profile import DistanceKind
from src.model.errors import OutOfRange, TimeOutOfWindow, UnderflowRiskWarning
from src.model.family import FamilyParams, HittingProfile
from src.model.markov_chain import ChainSpec
from src.model.reports import MinorizationVerdict, MixingReport
from src.services.chain_service import DEFAULT_UNIFORMIZER, stationary_distribution, survival_curve
from src.services.log_service import get_logger
from src.services.metrics_service import reduced_separation, worst_case_profile, worst_case_values
from src.services.mixing_service import ProfileSource, cutoff_diagnostics

# Initialize logger for this module
logger = get_logger(__name__)

UNDERFLOW_FLOOR_LOG = math.log(1e-300)


def build_family_chain(params: FamilyParams, mode: str = 'log') -> tuple[ChainSpec, float]:
    """
    Build G_n: red path A = v_0 ... B = v_n ... C = v_2n plus the green edge B-C.

    Forward red rates are 1 except B -> v_{n+1} = 1/n, backward red rates are
    epsilon, green B -> C is 1 - 1/n and green C -> B is (n - 1) * epsilon^n,
    the only value that makes the cycle B -> C consistent with reversibility.

    Args:
        params: Size and backtrack rate.
        mode: 'log' or 'linear'; linear mode warns when epsilon^(2n) underflows.

    Returns:
        (chain, log of the C -> B rate).
    """
    n = params.n
    log_eps = params.log_epsilon
    if mode == 'linear' and 2 * n * log_eps < UNDERFLOW_FLOOR_LOG:
        message = f"epsilon^(2n) = exp({2 * n * log_eps:.1f}) underflows; use the log-domain stationary distribution."
        logger.warning(message)
        warnings.warn(message, UnderflowRiskWarning, stacklevel=2)

    edges = []
    for i in range(2 * n):
        forward = -math.log(n) if i == params.junction else 0.0
        edges.append((i, i + 1, forward))
        edges.append((i + 1, i, log_eps))
    edges.append((params.junction, params.target, math.log1p(-1.0 / n)))
    edges.append((params.target, params.junction, params.log_back_rate))
    chain = ChainSpec.from_log_edges(params.labels(), edges)
    logger.debug(f"Built family chain n={n}, epsilon={params.epsilon:.3g}: {chain!r}.")
    return chain, params.log_back_rate


def _survival(chain: ChainSpec, params: FamilyParams, times: Sequence[float]) -> np.ndarray:
    return survival_curve(chain, [params.target], params.start, times)


def hitting_profile(params: FamilyParams, times: Sequence[float],
                    s_grid: Optional[Sequence[float]] = None, with_tv: bool = True) -> HittingProfile:
    """
    Survival P(tau_C > t) from A, its scaled form and the worst-case TV profile.

    Args:
        params: Family parameters.
        times: Strictly increasing times.
        s_grid: Scale points s for n * P(tau > s n).
        with_tv: Also compute the worst-case TV profile on ``times``.

    Returns:
        HittingProfile.
    """
    chain, _ = build_family_chain(params)
    grid = np.asarray(times, dtype=float)
    survival = _survival(chain, params, grid)
    s_values = np.asarray(s_grid if s_grid is not None else [], dtype=float)
    scaled = params.n * _survival(chain, params, s_values * params.n) if s_values.size else np.empty(0)
    tv_profile = worst_case_profile(chain, DistanceKind.TOTAL_VARIATION, grid) if with_tv else None
    return HittingProfile(params, grid, survival, s_values, scaled, tv_profile)


def _product_from_survival(survival: np.ndarray, copies: int) -> np.ndarray:
    with np.errstate(divide='ignore'):
        return np.clip(-np.expm1(copies * np.log1p(-np.clip(survival, 0.0, 1.0))), 0.0, 1.0)


def product_tv_approx(params: FamilyParams, t: Union[float, Sequence[float]],
                      chain: Optional[ChainSpec] = None) -> Union[float, np.ndarray]:
    """1 - P(tau <= t)^n, the family's approximation of the n-fold product TV profile."""
    chain = chain if chain is not None else build_family_chain(params)[0]
    grid = np.atleast_1d(np.asarray(t, dtype=float))
    values = _product_from_survival(_survival(chain, params, grid), params.n)
    return float(values[0]) if np.ndim(t) == 0 else values


def scaled_profile_table(params: FamilyParams, s_grid: Sequence[float]) -> pd.DataFrame:
    """Columns ``s, d_marginal, n_survival, product_tv_approx`` at times s * n."""
    s_values = np.asarray(s_grid, dtype=float)
    if s_values.size == 0 or np.any(s_values <= 0) or np.any(s_values > 3.0):
        raise OutOfRange("Scale points must lie in (0, 3].")
    if np.any(np.diff(s_values) <= 0):
        raise OutOfRange("Scale points must be strictly increasing.")
    chain, _ = build_family_chain(params)
    times = s_values * params.n
    survival = _survival(chain, params, times)
    return pd.DataFrame({
        's': s_values,
        'd_marginal': worst_case_values(chain, DistanceKind.TOTAL_VARIATION, times),
        'n_survival': params.n * survival,
        'product_tv_approx': _product_from_survival(survival, params.n),
    })


def asymptotic_profile_check(params: FamilyParams, s_grid: Sequence[float],
                             limits: Optional[Mapping[str, tuple[float, float]]] = None
                             ) -> tuple[pd.DataFrame, bool]:
    """Scaled profiles plus whether every row lies inside the caller's ``column -> (lo, hi)`` limits."""
    table = scaled_profile_table(params, s_grid)
    within = True
    for column, (lo, hi) in (limits or {}).items():
        if column not in table.columns:
            raise OutOfRange(f"Unknown profile column {column!r}.")
        inside = table[column].between(lo, hi)
        if not inside.all():
            logger.info(f"{column} leaves [{lo}, {hi}] at s = {table.loc[~inside, 's'].tolist()}.")
            within = False
    return table, within


def separation_minorization_check(params: FamilyParams, t_list: Sequence[float]) -> MinorizationVerdict:
    """
    Whether P_t(x, y) >= pi(y) for all x, y other than C, for t in [n/2, 3n].

    The comparison is made on logs. Also reports the largest gap between the
    reduced separation 1 - min_x P_t(x, C) / pi(C) and the worst-case TV.
    """
    n = params.n
    times = [float(t) for t in t_list]
    if not times:
        raise OutOfRange("At least one time is required.")
    for t in times:
        if not (n / 2.0 <= t <= 3.0 * n):
            raise TimeOutOfWindow(f"t = {t} lies outside [{n / 2}, {3 * n}].")
    chain, _ = build_family_chain(params)
    pi = stationary_distribution(chain, 'log')
    log_pi = pi.log_values()
    keep = np.array([state for state in range(chain.state_count) if state != params.target])

    worst_margin, worst_pair, worst_time, worst_gap = math.inf, (0, 0), times[0], 0.0
    for t in times:
        log_p = DEFAULT_UNIFORMIZER.log_transition_matrix(chain, t)
        margins = log_p[np.ix_(keep, keep)] - log_pi[keep][None, :]
        at = np.unravel_index(int(np.argmin(margins)), margins.shape)
        if margins[at] < worst_margin:
            worst_margin = float(margins[at])
            worst_pair = (int(keep[at[0]]), int(keep[at[1]]))
            worst_time = t
        reduced = reduced_separation(chain, t, params.target, pi)
        tv = float(worst_case_values(chain, DistanceKind.TOTAL_VARIATION, [t], pi)[0])
        worst_gap = max(worst_gap, abs(reduced - tv))

    holds = worst_margin >= 0.0 and worst_gap <= NumericDefaults.SEPARATION_TV_GAP
    logger.info(f"Minorization n={n}: log margin {worst_margin:.4g} at {worst_pair}, t={worst_time}; "
                f"separation/TV gap {worst_gap:.3g}.")
    return MinorizationVerdict(holds=bool(holds), worst_log_margin=worst_margin, worst_pair=worst_pair,
                               worst_time=worst_time, max_separation_tv_gap=worst_gap)


def family_source(params: FamilyParams, kind: Union[DistanceKind, str], product: bool = False,
                  copies: Optional[int] = None) -> ProfileSource:
    """Profile source for G_n, or for ``copies`` copies of it (default n) when ``product`` is set."""
    kind = kind if isinstance(kind, DistanceKind) else DistanceKind.parse(kind)
    chain, _ = build_family_chain(params)
    if not product:
        return ProfileSource.from_chain(chain, kind)
    copies = params.n if copies is None else int(copies)
    if kind is DistanceKind.TOTAL_VARIATION:
        # Product TV has no exact formula; the hitting-time approximation stands in for it.
        def evaluate(times: np.ndarray) -> np.ndarray:
            return _product_from_survival(_survival(chain, params, times), copies)

        return ProfileSource(evaluate, kind, 4.0 * params.time_scale, label=f"G_{params.n}^{copies}")
    return ProfileSource.product(ProfileSource.from_chain(chain, kind), copies)


def family_sweep(sizes: Sequence[int], epsilon: Optional[float] = None,
                 kind: Union[DistanceKind, str] = DistanceKind.TOTAL_VARIATION,
                 eps_list: Sequence[float] = (0.2,), product: bool = False,
                 copies: Optional[int] = None,
                 delta: float = NumericDefaults.CUTOFF_DELTA,
                 precutoff_bound: float = NumericDefaults.PRECUTOFF_BOUND) -> list[MixingReport]:
    """Cutoff diagnostics of G_n (or its n-fold products) over several sizes."""
    logger.info(f"Family sweep over n = {list(sizes)}, kind {kind}, product={product}.")
    members = [(int(n), family_source(FamilyParams(int(n), epsilon), kind, product, copies)) for n in sizes]
    return cutoff_diagnostics(members, kind, eps_list, delta, precutoff_bound)
