# Product Service - n-fold product chains: exact separation/Hellinger formulas, TV bounds, tensor oracle.
import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse

from resources.resource_config import NumericDefaults
from src.model.distance_profile import DistanceKind, DistanceProfile
from src.model.errors import OutOfRange, SizeCapExceeded
from src.model.markov_chain import ChainSpec, ProbDist
from src.services.log_service import get_logger

# Initialize logger for this module
logger = get_logger(__name__)

SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class ProductSpec:
    """n independent copies of ``base``; the tensor chain is built only under ``size_cap`` states."""

    base: ChainSpec
    copies: int
    size_cap: int = NumericDefaults.TENSOR_SIZE_CAP

    def __post_init__(self) -> None:
        if int(self.copies) != self.copies or self.copies < 1:
            raise OutOfRange(f"Copies must be a positive integer, got {self.copies}.")

    @property
    def state_count(self) -> int:
        return self.base.state_count ** self.copies


def _check_copies(n: int) -> None:
    if int(n) != n or n < 1:
        raise OutOfRange(f"Copies must be a positive integer, got {n}.")


def _one_minus_power(x, n: int):
    # 1 - (1 - x)^n with full relative precision for small x.
    with np.errstate(divide='ignore'):
        return -np.expm1(n * np.log1p(-x))


def product_separation(d_s, n: int):
    """
    Separation distance of the n-fold product, 1 - (1 - d_s)^n.

    Args:
        d_s: Marginal separation value(s) in [0, 1].
        n: Number of copies.

    Returns:
        Product separation, same shape as ``d_s``.
    """
    _check_copies(n)
    values = np.asarray(d_s, dtype=float)
    if np.any(values < 0) or np.any(values > 1) or np.any(np.isnan(values)):
        raise OutOfRange("Separation values must lie in [0, 1].")
    result = np.clip(_one_minus_power(values, n), 0.0, 1.0)
    return float(result) if result.ndim == 0 else result


def product_hellinger(d_h, n: int):
    """Hellinger distance of the n-fold product: 1 - D^2/2 = (1 - d^2/2)^n."""
    _check_copies(n)
    values = np.asarray(d_h, dtype=float)
    if np.any(values < 0) or np.any(values > SQRT2 + NumericDefaults.RANGE_SLACK) or np.any(np.isnan(values)):
        raise OutOfRange("Hellinger values must lie in [0, sqrt(2)].")
    half_square = np.clip(values ** 2 / 2.0, 0.0, 1.0)
    result = np.clip(np.sqrt(2.0 * _one_minus_power(half_square, n)), 0.0, SQRT2)
    return float(result) if result.ndim == 0 else result


def product_tv_bounds(d_h_marginal: float, d_tv_marginal: float, n: int) -> tuple[float, float]:
    """
    Bracket the TV distance of the n-fold product.

    Args:
        d_h_marginal: Marginal Hellinger value.
        d_tv_marginal: Marginal TV value; never larger than the Hellinger value.
        n: Number of copies.

    Returns:
        (lower, upper) with lower = max(d_tv, D^2/2) and upper = min(1, D), D the product Hellinger.
    """
    if not (0.0 <= d_tv_marginal <= 1.0):
        raise OutOfRange(f"Marginal TV must lie in [0, 1], got {d_tv_marginal}.")
    if d_tv_marginal > d_h_marginal + NumericDefaults.RANGE_SLACK:
        raise OutOfRange(f"Marginal TV {d_tv_marginal} exceeds marginal Hellinger {d_h_marginal}.")
    big_h = product_hellinger(d_h_marginal, n)
    upper = min(1.0, big_h)
    lower = min(max(d_tv_marginal, big_h ** 2 / 2.0), upper)
    return float(lower), float(upper)


def product_stationary(base_pi: ProbDist, n: int) -> ProbDist:
    _check_copies(n)
    values = base_pi.values
    for _ in range(n - 1):
        values = np.kron(values, base_pi.values)
    return ProbDist(values / values.sum())


def product_profile(marginal: DistanceProfile, n: int) -> DistanceProfile:
    """Lift a separation or Hellinger profile to the n-fold product."""
    if marginal.kind is DistanceKind.SEPARATION:
        values = product_separation(marginal.values, n)
    elif marginal.kind is DistanceKind.HELLINGER:
        values = product_hellinger(marginal.values, n)
    else:
        raise OutOfRange(f"No exact product formula for {marginal.kind.value}; use product_tv_envelope.")
    return DistanceProfile(marginal.kind, marginal.times, np.atleast_1d(values))


def product_tv_envelope(tv_profile: DistanceProfile, hellinger_profile: DistanceProfile,
                        n: int) -> tuple[DistanceProfile, DistanceProfile]:
    """Lower and upper TV profiles of the n-fold product."""
    if not np.array_equal(tv_profile.times, hellinger_profile.times):
        raise OutOfRange("TV and Hellinger profiles must share their time grid.")
    bounds = [product_tv_bounds(h, d, n) for d, h in zip(tv_profile.values, hellinger_profile.values)]
    lower = np.maximum.accumulate([pair[0] for pair in bounds][::-1])[::-1]
    upper = np.minimum.accumulate([pair[1] for pair in bounds])
    return (DistanceProfile(DistanceKind.TOTAL_VARIATION, tv_profile.times, lower),
            DistanceProfile(DistanceKind.TOTAL_VARIATION, tv_profile.times, np.maximum(upper, lower)))


def tensor_product(spec: ProductSpec) -> ChainSpec:
    """
    Explicit generator of the product chain as a Kronecker sum.

    Args:
        spec: Base chain, copies and size cap.

    Returns:
        ChainSpec on tuples in lexicographic order, labelled "(a,b,...)".
    """
    if spec.state_count > spec.size_cap:
        raise SizeCapExceeded(f"Tensor product has {spec.state_count} states; cap is {spec.size_cap}.")
    base = spec.base
    if spec.copies == 1:
        return base
    m = base.state_count
    rates = base.rates.tocsr()
    total: Optional[sparse.csr_matrix] = None
    for position in range(spec.copies):
        term = sparse.kron(
            sparse.kron(sparse.identity(m ** position, format='csr'), rates, format='csr'),
            sparse.identity(m ** (spec.copies - position - 1), format='csr'),
            format='csr')
        total = term if total is None else (total + term).tocsr()
    total = total.tocoo()
    labels = tuple('(' + ','.join(parts) + ')'
                   for parts in itertools.product(base.state_labels, repeat=spec.copies))
    logger.info(f"Built tensor product of {base!r}: {spec.copies} copies, {total.shape[0]} states.")
    edges = [(int(i), int(j), float(np.log(v))) for i, j, v in zip(total.row, total.col, total.data) if v > 0]
    return ChainSpec.from_log_edges(labels, edges)
