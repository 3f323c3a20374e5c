"""
Markov chain model: the rate structure of a finite continuous-time chain and
probability vectors over its states.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.special import logsumexp

from src.model.errors import DimensionMismatch, NonIrreducible, OutOfRange

LabelsOrCount = Union[int, Sequence[str]]


def _freeze(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


def _labels_from(labels_or_count: LabelsOrCount) -> tuple[str, ...]:
    if isinstance(labels_or_count, (int, np.integer)):
        return tuple(str(i) for i in range(int(labels_or_count)))
    return tuple(str(label) for label in labels_or_count)


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """A labeled finite state space with its off-diagonal jump rates.

    Edges are stored as ``(source, target, log_rate)`` triples sorted by
    ``(source, target)``. The log form keeps rates below the double floor
    exact for log-domain work; the linear rate matrix is derived from it.
    The diagonal of the generator is the negative row sum.

    Irreducibility (strong connectivity of the positive-rate graph) is
    checked at construction.
    """

    state_labels: tuple[str, ...]
    sources: np.ndarray
    targets: np.ndarray
    log_rates: np.ndarray

    def __post_init__(self) -> None:
        labels = tuple(str(label) for label in self.state_labels)
        m = len(labels)
        src = np.asarray(self.sources, dtype=np.int64).ravel()
        tgt = np.asarray(self.targets, dtype=np.int64).ravel()
        log_rates = np.asarray(self.log_rates, dtype=float).ravel()

        if m < 2:
            raise NonIrreducible(f"A chain needs at least two states, got {m}.")
        if not (src.shape == tgt.shape == log_rates.shape):
            raise DimensionMismatch(
                f"Edge arrays differ in length: {src.size}, {tgt.size}, {log_rates.size}.")
        if src.size and (src.min() < 0 or tgt.min() < 0 or src.max() >= m or tgt.max() >= m):
            raise OutOfRange(f"Edge endpoints must lie in [0, {m - 1}].")
        if np.any(src == tgt):
            bad = int(src[np.argmax(src == tgt)])
            raise OutOfRange(f"Self-loop at state {bad}; the diagonal is implied.")
        if not np.all(np.isfinite(log_rates)):
            raise OutOfRange("Every listed rate must be strictly positive and finite.")

        order = np.lexsort((tgt, src))
        src, tgt, log_rates = src[order], tgt[order], log_rates[order]
        keys = src * m + tgt
        if keys.size and np.any(np.diff(keys) == 0):
            dup = int(np.argmax(np.diff(keys) == 0))
            raise OutOfRange(f"Duplicate edge {int(src[dup])}->{int(tgt[dup])}.")

        graph = sparse.csr_matrix((np.ones(src.size), (src, tgt)), shape=(m, m))
        n_components, _ = connected_components(graph, directed=True, connection='strong')
        if n_components != 1:
            raise NonIrreducible(
                f"The rate graph has {n_components} strongly connected components; expected 1.")

        object.__setattr__(self, 'state_labels', labels)
        object.__setattr__(self, 'sources', _freeze(src))
        object.__setattr__(self, 'targets', _freeze(tgt))
        object.__setattr__(self, 'log_rates', _freeze(log_rates))

    # ------------------------------------------------------------------ builders

    @classmethod
    def from_rate_matrix(cls, rates: np.ndarray, labels: Optional[Sequence[str]] = None) -> ChainSpec:
        """Build from a square matrix of off-diagonal rates; the diagonal is ignored."""
        matrix = np.asarray(rates, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatch(f"Rate matrix must be square, got shape {matrix.shape}.")
        off = matrix.copy()
        np.fill_diagonal(off, 0.0)
        if not np.all(np.isfinite(off)):
            raise OutOfRange("Rate matrix contains non-finite entries.")
        if np.any(off < 0):
            raise OutOfRange("Off-diagonal rates must be nonnegative.")
        src, tgt = np.nonzero(off)
        m = matrix.shape[0]
        names = _labels_from(m if labels is None else labels)
        if len(names) != m:
            raise DimensionMismatch(f"{len(names)} labels for {m} states.")
        return cls(names, src, tgt, np.log(off[src, tgt]))

    @classmethod
    def from_edges(cls, labels_or_count: LabelsOrCount,
                   edges: Iterable[tuple[int, int, float]]) -> ChainSpec:
        """Build from ``(i, j, rate)`` triples with strictly positive rates."""
        triples = list(edges)
        rates = np.array([float(rate) for _, _, rate in triples], dtype=float)
        if np.any(~(rates > 0)):
            raise OutOfRange("Every listed rate must be strictly positive.")
        with np.errstate(divide='ignore'):
            log_rates = np.log(rates)
        return cls(_labels_from(labels_or_count),
                   np.array([i for i, _, _ in triples], dtype=np.int64),
                   np.array([j for _, j, _ in triples], dtype=np.int64),
                   log_rates)

    @classmethod
    def from_log_edges(cls, labels_or_count: LabelsOrCount,
                       edges: Iterable[tuple[int, int, float]]) -> ChainSpec:
        """Build from ``(i, j, log_rate)`` triples."""
        triples = list(edges)
        return cls(_labels_from(labels_or_count),
                   np.array([i for i, _, _ in triples], dtype=np.int64),
                   np.array([j for _, j, _ in triples], dtype=np.int64),
                   np.array([lr for _, _, lr in triples], dtype=float))

    def relabel(self, permutation: Sequence[int]) -> ChainSpec:
        """Return the same chain with old state ``i`` moved to index ``permutation[i]``."""
        perm = np.asarray(permutation, dtype=np.int64)
        if perm.shape != (self.state_count,) or not np.array_equal(np.sort(perm), np.arange(self.state_count)):
            raise DimensionMismatch("Relabeling requires a permutation of all states.")
        labels = [''] * self.state_count
        for old, new in enumerate(perm):
            labels[new] = self.state_labels[old]
        return ChainSpec(tuple(labels), perm[self.sources], perm[self.targets], self.log_rates.copy())

    # ---------------------------------------------------------------- properties

    @property
    def state_count(self) -> int:
        return len(self.state_labels)

    @property
    def edge_count(self) -> int:
        return int(self.sources.size)

    @cached_property
    def rates(self) -> sparse.csr_matrix:
        # Underflowing rates vanish here but stay exact in log_rates.
        matrix = sparse.csr_matrix((np.exp(self.log_rates), (self.sources, self.targets)),
                                   shape=(self.state_count, self.state_count))
        matrix.eliminate_zeros()
        return matrix

    @cached_property
    def exit_rates(self) -> np.ndarray:
        return _freeze(np.bincount(self.sources, weights=np.exp(self.log_rates),
                                   minlength=self.state_count))

    @cached_property
    def reverse_edge(self) -> np.ndarray:
        """Index of the edge ``j -> i`` for every edge ``i -> j``, or -1."""
        m = self.state_count
        keys = self.sources * m + self.targets
        reverse_keys = self.targets * m + self.sources
        pos = np.searchsorted(keys, reverse_keys)
        pos = np.minimum(pos, max(keys.size - 1, 0))
        found = keys[pos] == reverse_keys
        return _freeze(np.where(found, pos, -1))

    @property
    def max_exit_rate(self) -> float:
        return float(self.exit_rates.max())

    def generator(self) -> sparse.csr_matrix:
        # Q = rates - diag(exit rates)
        return (self.rates - sparse.diags(self.exit_rates)).tocsr()

    def dense_generator(self) -> np.ndarray:
        return self.generator().toarray()

    def rate(self, i: int, j: int) -> float:
        return float(self.rates[i, j])

    def log_rate(self, i: int, j: int) -> float:
        m = self.state_count
        keys = self.sources * m + self.targets
        pos = np.searchsorted(keys, i * m + j)
        if pos < keys.size and keys[pos] == i * m + j:
            return float(self.log_rates[pos])
        return -np.inf

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChainSpec):
            return NotImplemented
        return (self.state_labels == other.state_labels
                and np.array_equal(self.sources, other.sources)
                and np.array_equal(self.targets, other.targets)
                and np.array_equal(self.log_rates, other.log_rates))

    __hash__ = None

    def __repr__(self) -> str:
        return f"ChainSpec(states={self.state_count}, edges={self.edge_count})"


@dataclass(frozen=True, eq=False)
class ProbDist:
    """A probability vector, optionally carried in the log domain.

    In log mode ``log_weights`` holds unnormalized log-masses and
    ``log_normalizer`` their log-sum; ``values`` is the linear image,
    which may contain underflowed zeros.
    """

    values: np.ndarray
    log_weights: Optional[np.ndarray] = None
    log_normalizer: float = 0.0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size == 0:
            raise DimensionMismatch("A distribution needs at least one state.")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise OutOfRange("Probabilities must be finite and nonnegative.")
        if abs(values.sum() - 1.0) > 1e-10:
            raise OutOfRange(f"Probabilities sum to {values.sum():.17g}, not 1.")
        object.__setattr__(self, 'values', _freeze(values))
        if self.log_weights is not None:
            log_weights = np.asarray(self.log_weights, dtype=float).ravel()
            if log_weights.shape != values.shape:
                raise DimensionMismatch("Log-weights and values differ in length.")
            object.__setattr__(self, 'log_weights', _freeze(log_weights))

    @classmethod
    def from_log_weights(cls, log_weights: np.ndarray) -> ProbDist:
        weights = np.asarray(log_weights, dtype=float)
        normalizer = float(logsumexp(weights))
        values = np.exp(weights - normalizer)
        return cls(values / values.sum(), weights, normalizer)

    @classmethod
    def point_mass(cls, size: int, index: int) -> ProbDist:
        values = np.zeros(size)
        values[index] = 1.0
        return cls(values)

    @property
    def is_log(self) -> bool:
        return self.log_weights is not None

    @property
    def size(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.size

    def log_values(self) -> np.ndarray:
        if self.log_weights is not None:
            return self.log_weights - self.log_normalizer
        with np.errstate(divide='ignore'):
            return np.log(self.values)

    def min_mass(self) -> float:
        return float(self.values.min())

    def to_linear(self) -> ProbDist:
        return ProbDist(self.values.copy())
