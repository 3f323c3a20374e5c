# Chain Service - Stationary laws, reversibility, transient laws, survival and spectral gap.
import heapq
import warnings
from typing import Iterable, Literal, Optional, Sequence

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.csgraph import breadth_first_order

from resources.resource_config import NumericDefaults
from src.model.errors import (DegreeInfeasible, DimensionMismatch, EmptyAbsorbingSet,
                              InconsistentRatios, NotReversible, OutOfRange, StartAbsorbed,
                              UnderflowRiskWarning, ZeroReferenceMass)
from src.model.markov_chain import ChainSpec, ProbDist
from src.model.reports import BalanceVerdict
from src.model.uniformization import Uniformizer
from src.services.log_service import get_logger

# Initialize logger for this module
logger = get_logger(__name__)

EquilibriumMode = Literal['linear', 'log']

DEFAULT_UNIFORMIZER = Uniformizer()


def _check_state(chain: ChainSpec, state: int, role: str = 'state') -> int:
    if int(state) != state or not (0 <= state < chain.state_count):
        raise OutOfRange(f"{role} {state} is not a state index in [0, {chain.state_count - 1}].")
    return int(state)


def _edge_lookup(chain: ChainSpec, sources: np.ndarray, targets: np.ndarray) -> np.ndarray:
    keys = chain.sources * chain.state_count + chain.targets
    return np.searchsorted(keys, sources * chain.state_count + targets)


# --------------------------------------------------------------------------- π


def _gth_stationary(chain: ChainSpec) -> np.ndarray:
    # Grassmann-Taksar-Heyman state reduction; subtraction-free.
    work = chain.rates.toarray()
    m = work.shape[0]
    pivots = np.zeros(m)
    for k in range(m - 1, 0, -1):
        total = work[k, :k].sum()
        if total <= 0:
            raise InconsistentRatios(f"State reduction met a zero pivot at state {k}; rates underflowed.")
        pivots[k] = total
        work[:k, :k] += np.outer(work[:k, k], work[k, :k]) / total
    pi = np.zeros(m)
    pi[0] = 1.0
    for k in range(1, m):
        pi[k] = pi[:k] @ work[:k, k] / pivots[k]
    return pi / pi.sum()


def _log_stationary(chain: ChainSpec) -> np.ndarray:
    # Multiply detailed-balance ratios along a BFS spanning tree, then check every edge.
    m = chain.state_count
    reverse = chain.reverse_edge
    if np.any(reverse < 0):
        e = int(np.argmax(reverse < 0))
        raise InconsistentRatios(
            f"Edge {int(chain.sources[e])}->{int(chain.targets[e])} has no reverse rate; the chain is not reversible.")
    log_ratio = chain.log_rates - chain.log_rates[reverse]

    graph = sparse.csr_matrix((np.ones(chain.edge_count), (chain.sources, chain.targets)), shape=(m, m))
    order, predecessors = breadth_first_order(graph, 0, directed=True, return_predecessors=True)
    edge_to = _edge_lookup(chain, predecessors[order[1:]], order[1:])
    log_pi = np.zeros(m)
    for node, edge in zip(order[1:], edge_to):
        log_pi[node] = log_pi[chain.sources[edge]] + log_ratio[edge]

    defect = np.abs(log_pi[chain.sources] + log_ratio - log_pi[chain.targets])
    worst = int(np.argmax(defect))
    if defect[worst] > NumericDefaults.CYCLE_TOLERANCE:
        raise InconsistentRatios(
            f"Cycle product of detailed-balance ratios deviates by {defect[worst]:.3g} (log) at edge "
            f"{int(chain.sources[worst])}->{int(chain.targets[worst])}.")
    return log_pi


def stationary_distribution(chain: ChainSpec, mode: EquilibriumMode = 'linear') -> ProbDist:
    """
    Stationary distribution of an irreducible chain.

    Args:
        chain: The chain; irreducibility is guaranteed by construction.
        mode: 'linear' uses state reduction on the rate matrix; 'log' multiplies
            detailed-balance ratios along a spanning tree and is exact for
            masses far below the double floor.

    Returns:
        ProbDist, in log representation for mode 'log'.
    """
    if mode == 'log':
        return ProbDist.from_log_weights(_log_stationary(chain))
    if mode != 'linear':
        raise ValueError(f"Unknown mode '{mode}'; expected 'linear' or 'log'.")

    pi = _gth_stationary(chain)
    residual = np.abs(chain.generator().T @ pi).max()
    scale = np.exp(chain.log_rates.max())
    if residual > NumericDefaults.RESIDUAL_TOLERANCE * scale:
        logger.warning(f"Stationary residual {residual:.3g} exceeds tolerance for {chain!r}.")
    if pi.min() < NumericDefaults.LOG_MODE_FLOOR:
        message = f"Stationary masses down to {pi.min():.3g} in linear mode; use log mode."
        logger.warning(message)
        warnings.warn(message, UnderflowRiskWarning, stacklevel=2)
    return ProbDist(pi)


def is_reversible_support(chain: ChainSpec) -> bool:
    return bool(np.all(chain.reverse_edge >= 0))


def resolve_equilibrium(chain: ChainSpec) -> ProbDist:
    """Log-mode π when the chain is reversible, state reduction otherwise."""
    if is_reversible_support(chain):
        try:
            return stationary_distribution(chain, 'log')
        except InconsistentRatios:
            logger.info(f"{chain!r} is not reversible; falling back to linear mode.")
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', UnderflowRiskWarning)
        return stationary_distribution(chain, 'linear')


def check_detailed_balance(chain: ChainSpec, pi: ProbDist,
                           tol: float = NumericDefaults.BALANCE_TOLERANCE) -> BalanceVerdict:
    """Relative flux mismatch |f - g| / (f + g) on every edge; log-fluxes when pi is log-domain."""
    if pi.size != chain.state_count:
        raise DimensionMismatch(f"Distribution has {pi.size} entries for {chain.state_count} states.")
    reverse = chain.reverse_edge
    has_reverse = reverse >= 0
    if pi.is_log:
        log_pi = pi.log_values()
        forward = log_pi[chain.sources] + chain.log_rates
        backward = np.where(has_reverse, log_pi[chain.targets] + chain.log_rates[np.maximum(reverse, 0)], -np.inf)
        with np.errstate(invalid='ignore'):
            violation = np.tanh(np.abs(forward - backward) / 2.0)
    else:
        rates = np.exp(chain.log_rates)
        forward = pi.values[chain.sources] * rates
        backward = np.where(has_reverse, pi.values[chain.targets] * rates[np.maximum(reverse, 0)], 0.0)
        total = forward + backward
        with np.errstate(invalid='ignore', divide='ignore'):
            violation = np.abs(forward - backward) / total
    violation = np.nan_to_num(violation, nan=0.0)
    worst = int(np.argmax(violation))
    return BalanceVerdict(
        balanced=bool(violation[worst] <= tol),
        worst_edge=(int(chain.sources[worst]), int(chain.targets[worst])),
        worst_violation=float(violation[worst]),
    )


# ------------------------------------------------------------------ dynamics


def transient_distribution(chain: ChainSpec, start: int, t: float,
                           uniformizer: Optional[Uniformizer] = None) -> ProbDist:
    """Row ``start`` of exp(tQ) by uniformization, renormalized to sum 1."""
    start = _check_state(chain, start, 'Start')
    engine = uniformizer or DEFAULT_UNIFORMIZER
    initial = np.zeros((1, chain.state_count))
    initial[0, start] = 1.0
    row = engine.transition_rows(chain, initial, [t])[0, 0]
    return ProbDist(row / row.sum())


def propagate(chain: ChainSpec, mu: ProbDist, t: float,
              uniformizer: Optional[Uniformizer] = None) -> ProbDist:
    # Law at time t when started from mu.
    if mu.size != chain.state_count:
        raise DimensionMismatch(f"Distribution has {mu.size} entries for {chain.state_count} states.")
    engine = uniformizer or DEFAULT_UNIFORMIZER
    row = engine.transition_rows(chain, mu.values[None, :], [t])[0, 0]
    return ProbDist(row / row.sum())


def _transient_states(chain: ChainSpec, absorbing: Iterable[int], start: int) -> tuple[np.ndarray, int]:
    absorbing_set = sorted({_check_state(chain, a, 'Absorbing state') for a in absorbing})
    if not absorbing_set:
        raise EmptyAbsorbingSet("The absorbing set must contain at least one state.")
    start = _check_state(chain, start, 'Start')
    if start in absorbing_set:
        raise StartAbsorbed(f"Start state {start} lies in the absorbing set.")
    transient = np.setdiff1d(np.arange(chain.state_count), absorbing_set)
    return transient, int(np.searchsorted(transient, start))


def survival_curve(chain: ChainSpec, absorbing: Iterable[int], start: int, times: Sequence[float],
                   uniformizer: Optional[Uniformizer] = None) -> np.ndarray:
    """P(tau_absorbing > t) at every time, from one shared power sequence."""
    transient, position = _transient_states(chain, absorbing, start)
    engine = uniformizer or DEFAULT_UNIFORMIZER
    return engine.survival(chain, transient, position, times)


def survival_probability(chain: ChainSpec, absorbing: Iterable[int], start: int, t: float,
                         uniformizer: Optional[Uniformizer] = None) -> float:
    return float(survival_curve(chain, absorbing, start, [t], uniformizer)[0])


def spectral_gap(chain: ChainSpec, pi: Optional[ProbDist] = None) -> float:
    """Smallest nonzero eigenvalue of -Q from the symmetrized generator."""
    pi = pi if pi is not None else resolve_equilibrium(chain)
    if pi.size != chain.state_count:
        raise DimensionMismatch(f"Distribution has {pi.size} entries for {chain.state_count} states.")
    log_pi = pi.log_values()
    if not np.all(np.isfinite(log_pi)):
        raise ZeroReferenceMass("Stationary masses underflowed to zero; pass a log-domain distribution.")
    reverse = chain.reverse_edge
    if np.any(reverse < 0):
        raise NotReversible("Rate graph is not symmetric, so the chain cannot be reversible.")

    log_sym = 0.5 * (log_pi[chain.sources] - log_pi[chain.targets]) + chain.log_rates
    asymmetry = np.abs(log_sym - log_sym[reverse])
    if asymmetry.max() > NumericDefaults.SYMMETRY_TOLERANCE:
        e = int(np.argmax(asymmetry))
        raise NotReversible(
            f"Symmetrized generator is asymmetric by {asymmetry[e]:.3g} (log) at edge "
            f"{int(chain.sources[e])}->{int(chain.targets[e])}.")

    m = chain.state_count
    symmetric = np.zeros((m, m))
    symmetric[chain.sources, chain.targets] = np.exp(log_sym)
    symmetric = 0.5 * (symmetric + symmetric.T)
    symmetric[np.diag_indices(m)] = -chain.exit_rates
    eigenvalues = linalg.eigvalsh(-symmetric)
    return float(eigenvalues[1])


# ----------------------------------------------------------------- generator


def _pruefer_tree(rng: np.random.Generator, m: int) -> list[tuple[int, int]]:
    # Uniform random labeled tree from a random Pruefer sequence.
    if m == 2:
        return [(0, 1)]
    sequence = rng.integers(0, m, size=m - 2)
    degree = np.ones(m, dtype=int)
    np.add.at(degree, sequence, 1)
    leaves = [i for i in range(m) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = []
    for node in sequence:
        leaf = heapq.heappop(leaves)
        edges.append((min(leaf, int(node)), max(leaf, int(node))))
        degree[node] -= 1
        if degree[node] == 1:
            heapq.heappush(leaves, int(node))
    u, v = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((min(u, v), max(u, v)))
    return edges


def random_reversible_chain(seed: int, m: int, degree: float = NumericDefaults.SUITE_DEGREE,
                            rate_range: tuple[float, float] = NumericDefaults.SUITE_RATE_RANGE) -> ChainSpec:
    """
    Random irreducible chain reversible with respect to pi proportional to rho.

    Args:
        seed: Seed of the isolated random stream.
        m: Number of states (>= 2).
        degree: Average vertex degree of the underlying undirected graph.
        rate_range: Interval (lo, hi) for edge weights w and vertex weights rho.

    Returns:
        ChainSpec with Q(x, y) = w(x, y) / rho(x).
    """
    if m < 2:
        raise OutOfRange(f"A random chain needs at least two states, got {m}.")
    lo, hi = rate_range
    if not (0 < lo <= hi):
        raise OutOfRange(f"Rate range must satisfy 0 < lo <= hi, got {rate_range}.")
    if not (0 < degree <= m - 1):
        raise DegreeInfeasible(f"Average degree {degree} is infeasible for {m} states (max {m - 1}).")

    rng = np.random.default_rng(seed)
    tree = _pruefer_tree(rng, m)
    target_edges = max(m - 1, int(round(degree * m / 2.0)))
    tree_set = set(tree)
    candidates = [(i, j) for i in range(m) for j in range(i + 1, m) if (i, j) not in tree_set]
    extra_count = min(target_edges - (m - 1), len(candidates))
    extra = []
    if extra_count > 0:
        picks = rng.choice(len(candidates), size=extra_count, replace=False)
        extra = [candidates[int(p)] for p in np.sort(picks)]
    undirected = tree + extra

    weights = rng.uniform(lo, hi, size=len(undirected))
    rho = rng.uniform(lo, hi, size=m)
    edges = []
    for (i, j), w in zip(undirected, weights):
        edges.append((i, j, w / rho[i]))
        edges.append((j, i, w / rho[j]))
    return ChainSpec.from_edges(m, edges)
