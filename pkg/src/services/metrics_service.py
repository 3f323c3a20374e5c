# Metrics Service - Probability distances and worst-case distance-to-equilibrium profiles.
from typing import Optional, Sequence, Union

import numpy as np

from resources.resource_config import NumericDefaults
from src.model.distance_profile import DistanceKind, DistanceProfile
from src.model.errors import DimensionMismatch, NotMeanZero, OutOfRange, ZeroReferenceMass
from src.model.markov_chain import ChainSpec, ProbDist
from src.model.uniformization import Uniformizer
from src.services.chain_service import DEFAULT_UNIFORMIZER, resolve_equilibrium
from src.services.log_service import get_logger

# Initialize logger for this module
logger = get_logger(__name__)

KindLike = Union[DistanceKind, str]


def _kind(kind: KindLike) -> DistanceKind:
    return kind if isinstance(kind, DistanceKind) else DistanceKind.parse(kind)


def needs_log_domain(pi: ProbDist) -> bool:
    # Linear ratios P/pi are meaningless once stationary masses reach the floor.
    return pi.is_log and pi.min_mass() < NumericDefaults.LOG_MODE_FLOOR


# --------------------------------------------------------------- pointwise


def distance(mu: ProbDist, nu: ProbDist, kind: KindLike) -> float:
    """
    Distance between two distributions on the same state space.

    Args:
        mu: First distribution (the transition row).
        nu: Reference distribution; plays the role of pi for separation.
        kind: total variation, separation or Hellinger; pairwise_tv is
            total variation between the two arguments.

    Returns:
        tv = sum|mu - nu| / 2, sep = 1 - min mu/nu, hellinger = ||sqrt(mu) - sqrt(nu)||_2.
    """
    kind = _kind(kind)
    if mu.size != nu.size:
        raise DimensionMismatch(f"Distributions have {mu.size} and {nu.size} entries.")
    if kind in (DistanceKind.TOTAL_VARIATION, DistanceKind.PAIRWISE_TV):
        return float(0.5 * np.abs(mu.values - nu.values).sum())
    if kind is DistanceKind.HELLINGER:
        return float(np.sqrt(((np.sqrt(mu.values) - np.sqrt(nu.values)) ** 2).sum()))

    if mu.is_log or nu.is_log:
        log_nu = nu.log_values()
        if np.any(np.isneginf(log_nu)):
            raise ZeroReferenceMass("Separation needs a reference with no zero entries.")
        with np.errstate(invalid='ignore'):
            min_log_ratio = float(np.min(mu.log_values() - log_nu))
        return float(np.clip(-np.expm1(min(min_log_ratio, 0.0)), 0.0, 1.0))
    if np.any(nu.values == 0):
        raise ZeroReferenceMass("Separation needs a reference with no zero entries.")
    return float(np.clip(1.0 - np.min(mu.values / nu.values), 0.0, 1.0))


# ---------------------------------------------------------- matrix helpers


def tv_rows(matrix: np.ndarray, pi_values: np.ndarray) -> np.ndarray:
    return 0.5 * np.abs(matrix - pi_values[None, :]).sum(axis=1)


def hellinger_rows(matrix: np.ndarray, pi_values: np.ndarray) -> np.ndarray:
    return np.sqrt(((np.sqrt(matrix) - np.sqrt(pi_values)[None, :]) ** 2).sum(axis=1))


def separation_rows(matrix: np.ndarray, pi_values: np.ndarray) -> np.ndarray:
    if np.any(pi_values == 0):
        raise ZeroReferenceMass("Stationary masses underflowed; separation needs the log domain.")
    return np.clip(1.0 - (matrix / pi_values[None, :]).min(axis=1), 0.0, 1.0)


def pairwise_tv_matrix(matrix: np.ndarray) -> np.ndarray:
    """TV distance between every pair of rows."""
    m = matrix.shape[0]
    result = np.zeros((m, m))
    for x in range(m):
        result[x] = 0.5 * np.abs(matrix[x][None, :] - matrix).sum(axis=1)
    return result


def separation_from_log(log_matrix: np.ndarray, log_pi: np.ndarray) -> float:
    """1 - min_{x,y} P_t(x,y)/pi(y) from log P_t, for a reversible chain.

    Reversibility makes the ratio matrix symmetric; the larger of the two
    computed ratios is kept since truncation only loses mass.
    """
    log_ratio = log_matrix - log_pi[None, :]
    log_ratio = np.maximum(log_ratio, log_ratio.T)
    smallest = float(log_ratio.min())
    return float(np.clip(-np.expm1(min(smallest, 0.0)), 0.0, 1.0))


# --------------------------------------------------------------- profiles


def start_distances(chain: ChainSpec, kind: KindLike, times: Sequence[float],
                    pi: Optional[ProbDist] = None,
                    uniformizer: Optional[Uniformizer] = None) -> np.ndarray:
    """Per-start distances, shape ``(len(times), m)``; pairs for pairwise_tv give ``(T, m, m)``."""
    kind = _kind(kind)
    pi = pi if pi is not None else resolve_equilibrium(chain)
    engine = uniformizer or DEFAULT_UNIFORMIZER
    grid = engine.validate_times(times)
    if kind is DistanceKind.SEPARATION and needs_log_domain(pi):
        raise ZeroReferenceMass("Per-start separation in the log domain is available through worst_case_profile only.")
    min_steps = chain.state_count - 1 if kind is DistanceKind.SEPARATION else 0
    matrices = engine.transition_matrices(chain, grid, min_steps=min_steps)
    if kind is DistanceKind.TOTAL_VARIATION:
        return np.array([tv_rows(P, pi.values) for P in matrices])
    if kind is DistanceKind.HELLINGER:
        return np.array([hellinger_rows(P, pi.values) for P in matrices])
    if kind is DistanceKind.SEPARATION:
        return np.array([separation_rows(P, pi.values) for P in matrices])
    return np.array([pairwise_tv_matrix(P) for P in matrices])


def worst_case_values(chain: ChainSpec, kind: KindLike, times: Sequence[float],
                      pi: Optional[ProbDist] = None,
                      uniformizer: Optional[Uniformizer] = None) -> np.ndarray:
    kind = _kind(kind)
    pi = pi if pi is not None else resolve_equilibrium(chain)
    engine = uniformizer or DEFAULT_UNIFORMIZER
    grid = engine.validate_times(times)
    if kind is DistanceKind.SEPARATION and needs_log_domain(pi):
        logger.info(f"Separation of {chain!r} evaluated in the log domain at {grid.size} time(s).")
        log_pi = pi.log_values()
        return np.array([separation_from_log(engine.log_transition_matrix(chain, t), log_pi) for t in grid])
    per_start = start_distances(chain, kind, grid, pi, engine)
    return per_start.reshape(grid.size, -1).max(axis=1)


def worst_case_profile(chain: ChainSpec, kind: KindLike, times: Sequence[float],
                       pi: Optional[ProbDist] = None,
                       uniformizer: Optional[Uniformizer] = None) -> DistanceProfile:
    """
    Worst case over starting states (or pairs) of the distance to equilibrium.

    Args:
        chain: The chain.
        kind: Distance kind.
        times: Strictly increasing nonnegative times.
        pi: Stationary distribution; computed when omitted.
        uniformizer: Engine override (tolerances).

    Returns:
        DistanceProfile tagged with ``kind``.
    """
    kind = _kind(kind)
    grid = np.asarray(times, dtype=float)
    values = worst_case_values(chain, kind, grid, pi, uniformizer)
    return DistanceProfile(kind, grid, values)


def reduced_separation(chain: ChainSpec, t: float, target: int,
                       pi: Optional[ProbDist] = None,
                       uniformizer: Optional[Uniformizer] = None) -> float:
    """1 - min_x P_t(x, target) / pi(target)."""
    pi = pi if pi is not None else resolve_equilibrium(chain)
    engine = uniformizer or DEFAULT_UNIFORMIZER
    if needs_log_domain(pi):
        column = engine.log_transition_matrix(chain, t)[:, target]
        smallest = float(column.min() - pi.log_values()[target])
        return float(np.clip(-np.expm1(min(smallest, 0.0)), 0.0, 1.0))
    column = engine.transition_matrices(chain, [t])[0][:, target]
    return float(np.clip(1.0 - column.min() / pi.values[target], 0.0, 1.0))


# ------------------------------------------------------- l1(pi) operator norm


def pair_test_function(pi: ProbDist, x: int, y: int) -> np.ndarray:
    """Recentred indicator delta_x / pi(x) - delta_y / pi(y); mean zero under pi."""
    if x == y:
        raise OutOfRange("A pair test function needs two distinct states.")
    f = np.zeros(pi.size)
    f[x] = 1.0 / pi.values[x]
    f[y] = -1.0 / pi.values[y]
    return f


def _l1_norm(pi_values: np.ndarray, f: np.ndarray) -> float:
    return float(pi_values @ np.abs(f))


def operator_norm_ratio(chain: ChainSpec, t: float, f: np.ndarray,
                        pi: Optional[ProbDist] = None,
                        uniformizer: Optional[Uniformizer] = None) -> float:
    """||P_t f|| / ||f|| in l1(pi) for a mean-zero test function f."""
    pi = pi if pi is not None else resolve_equilibrium(chain)
    f = np.asarray(f, dtype=float)
    if f.shape != (chain.state_count,):
        raise DimensionMismatch(f"Test function has shape {f.shape}; expected ({chain.state_count},).")
    norm = _l1_norm(pi.values, f)
    if norm == 0:
        raise OutOfRange("Test function is identically zero under pi.")
    if abs(pi.values @ f) > 1e-10 * max(1.0, norm):
        raise NotMeanZero(f"Test function has pi-mean {pi.values @ f:.3g}; expected 0.")
    engine = uniformizer or DEFAULT_UNIFORMIZER
    matrix = engine.transition_matrices(chain, [t])[0]
    return _l1_norm(pi.values, matrix @ f) / norm


def l1_contraction_check(chain: ChainSpec, t: float, f: np.ndarray, dbar_t: float,
                         pi: Optional[ProbDist] = None,
                         uniformizer: Optional[Uniformizer] = None) -> bool:
    """Whether ||P_t f||_{l1(pi)} <= dbar_t * ||f||_{l1(pi)} + 1e-9."""
    pi = pi if pi is not None else resolve_equilibrium(chain)
    ratio = operator_norm_ratio(chain, t, f, pi, uniformizer)
    norm = _l1_norm(pi.values, np.asarray(f, dtype=float))
    return bool(ratio * norm <= dbar_t * norm + 1e-9)
