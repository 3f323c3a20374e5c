"""
Uniformization engine.

P_t = sum_k Poisson(k; L*t) K^k with K = I + Q/L and L the largest exit rate.
Powers are shared across all requested times and accumulated chunk-wise
with one matrix product per chunk.
"""
from typing import Iterator, Sequence

import numpy as np
from scipy import sparse
from scipy.special import logsumexp
from scipy.stats import poisson

from resources.resource_config import NumericDefaults
from src.model.errors import NegativeTime, UniformizationOverflow
from src.model.markov_chain import ChainSpec


class Uniformizer:
    """Transient laws and survival functions of a chain by uniformization."""

    def __init__(
        self,
        tail_tolerance: float = NumericDefaults.TAIL_TOLERANCE,
        overflow_cap: float = NumericDefaults.OVERFLOW_CAP,
        dense_max_states: int = NumericDefaults.DENSE_KERNEL_MAX_STATES,
        chunk: int = NumericDefaults.POWER_CHUNK,
    ) -> None:
        self.tail_tolerance = tail_tolerance
        self.overflow_cap = overflow_cap
        self.dense_max_states = dense_max_states
        self.chunk = chunk

    # ----------------------------------------------------------------- helpers

    @staticmethod
    def validate_times(times: Sequence[float]) -> np.ndarray:
        grid = np.atleast_1d(np.asarray(times, dtype=float))
        if not np.all(np.isfinite(grid)):
            raise NegativeTime(f"Times must be finite, got {grid[~np.isfinite(grid)][0]}.")
        if np.any(grid < 0):
            raise NegativeTime(f"Times must be nonnegative, got {grid.min()}.")
        return grid

    def step_count(self, rate_time: float) -> int:
        """Number of kernel powers needed so the Poisson tail is below tolerance."""
        if rate_time > self.overflow_cap:
            raise UniformizationOverflow(
                f"Uniformization needs rate*time = {rate_time:.6g} steps, above the cap {self.overflow_cap:.6g}.")
        if rate_time <= 0:
            return 0
        return int(poisson.isf(self.tail_tolerance, rate_time)) + 1

    def poisson_weights(self, rate_times: np.ndarray, steps: int) -> np.ndarray:
        ks = np.arange(steps + 1)
        weights = np.zeros((rate_times.size, steps + 1))
        positive = rate_times > 0
        if np.any(positive):
            weights[positive] = poisson.pmf(ks[None, :], rate_times[positive][:, None])
        weights[~positive, 0] = 1.0
        return weights

    def _kernel(self, rates: sparse.csr_matrix, exit_rates: np.ndarray, uniform_rate: float):
        # K^T, so that a row block V advances as (K^T V^T)^T.
        m = exit_rates.size
        kernel = (sparse.identity(m, format='csr') - sparse.diags(exit_rates / uniform_rate)
                  + rates / uniform_rate)
        kernel_t = kernel.T.tocsr()
        if m <= self.dense_max_states:
            return kernel_t.toarray()
        return kernel_t

    def _power_chunks(self, initial: np.ndarray, kernel_t, steps: int) -> Iterator[tuple[int, np.ndarray]]:
        """Yield ``(first_power, stack)`` with ``stack[i] = initial @ K^(first_power + i)``."""
        current = np.array(initial, dtype=float)
        k = 0
        while k <= steps:
            size = min(self.chunk, steps - k + 1)
            stack = np.empty((size,) + current.shape)
            for i in range(size):
                stack[i] = current
                if k + i < steps:
                    current = np.ascontiguousarray((kernel_t @ current.T).T)
            yield k, stack
            k += size

    # -------------------------------------------------------------- linear mode

    def transition_rows(self, chain: ChainSpec, initial: np.ndarray, times: Sequence[float],
                        min_steps: int = 0) -> np.ndarray:
        """Propagate row distributions ``initial`` (r x m) to every time.

        ``min_steps`` forces at least that many kernel powers, so entries that
        need long paths are not truncated to zero at small times.
        Returns an array of shape ``(len(times), r, m)`` whose rows sum to 1.
        """
        grid = self.validate_times(times)
        rows = np.atleast_2d(np.asarray(initial, dtype=float))
        uniform_rate = chain.max_exit_rate
        steps = self.step_count(uniform_rate * grid.max())
        if grid.max() > 0:
            steps = max(steps, min_steps)
        weights = self.poisson_weights(uniform_rate * grid, steps)
        kernel_t = self._kernel(chain.rates, chain.exit_rates, uniform_rate)

        flat = np.zeros((grid.size, rows.size))
        for first, stack in self._power_chunks(rows, kernel_t, steps):
            flat += weights[:, first:first + stack.shape[0]] @ stack.reshape(stack.shape[0], -1)
        result = np.clip(flat.reshape((grid.size,) + rows.shape), 0.0, None)
        totals = result.sum(axis=2, keepdims=True)
        return result / np.where(totals > 0, totals, 1.0)

    def transition_matrices(self, chain: ChainSpec, times: Sequence[float], min_steps: int = 0) -> np.ndarray:
        """Full P_t for every time, shape ``(len(times), m, m)``."""
        return self.transition_rows(chain, np.eye(chain.state_count), times, min_steps)

    def survival(self, chain: ChainSpec, transient: np.ndarray, start_position: int,
                 times: Sequence[float]) -> np.ndarray:
        """P(no absorption by t) for the chain killed on leaving ``transient`` states.

        ``transient`` lists the non-absorbing states; ``start_position`` indexes into it.
        """
        grid = self.validate_times(times)
        exits = chain.exit_rates[transient]
        uniform_rate = float(exits.max())
        rates = chain.rates[transient][:, transient].tocsr()
        steps = self.step_count(uniform_rate * grid.max())
        weights = self.poisson_weights(uniform_rate * grid, steps)
        kernel_t = self._kernel(rates, exits, uniform_rate)

        initial = np.zeros((1, transient.size))
        initial[0, start_position] = 1.0
        result = np.zeros(grid.size)
        for first, stack in self._power_chunks(initial, kernel_t, steps):
            masses = stack.sum(axis=(1, 2))
            result += weights[:, first:first + masses.size] @ masses
        return np.clip(result, 0.0, 1.0)

    # ----------------------------------------------------------------- log mode

    @staticmethod
    def _log_kernel_columns(chain: ChainSpec, uniform_rate: float) -> tuple[np.ndarray, np.ndarray]:
        """Padded in-neighbour slots of log K: column j gathers from ``src[j, :]``."""
        m = chain.state_count
        log_rate = np.log(uniform_rate)
        with np.errstate(divide='ignore'):
            log_diag = np.log1p(-np.minimum(chain.exit_rates / uniform_rate, 1.0))

        order = np.argsort(chain.targets, kind='stable')
        tgt = chain.targets[order]
        src = chain.sources[order]
        log_w = chain.log_rates[order] - log_rate
        slot = 1 + np.arange(tgt.size) - np.searchsorted(tgt, tgt, side='left')

        width = int(np.bincount(chain.targets, minlength=m).max()) + 1
        in_src = np.zeros((m, width), dtype=np.int64)
        in_log_w = np.full((m, width), -np.inf)
        in_src[:, 0] = np.arange(m)
        in_log_w[:, 0] = log_diag
        in_src[tgt, slot] = src
        in_log_w[tgt, slot] = log_w
        return in_src, in_log_w

    def log_transition_matrix(self, chain: ChainSpec, t: float) -> np.ndarray:
        """log P_t for every start state, computed entirely in the log domain.

        At least m-1 powers are accumulated so every reachable entry carries
        its leading-order mass even when it is far below the double floor.
        """
        t = float(self.validate_times([t])[0])
        m = chain.state_count
        current = np.full((m, m), -np.inf)
        np.fill_diagonal(current, 0.0)
        if t == 0:
            return current

        uniform_rate = chain.max_exit_rate
        steps = max(self.step_count(uniform_rate * t), m - 1)
        log_weights = poisson.logpmf(np.arange(steps + 1), uniform_rate * t)
        in_src, in_log_w = self._log_kernel_columns(chain, uniform_rate)

        accumulated = current + log_weights[0]
        with np.errstate(divide='ignore', invalid='ignore'):
            for k in range(1, steps + 1):
                current = logsumexp(current[:, in_src] + in_log_w, axis=2)
                accumulated = np.logaddexp(accumulated, current + log_weights[k])
            accumulated -= logsumexp(accumulated, axis=1, keepdims=True)
        return accumulated
