# Oracle Service - Closed-form reference values used to check the chain computations.
"""
Independent closed forms: the two-state chain and the Erlang-mixture law of
the hitting time of C from A in the two-route family.

Conditioned on taking the green edge at B, tau is a sum of n + 1 unit
exponentials; conditioned on the red branch, of 2n. Backtracks perturb this
by O(n * epsilon).
"""
import math
from typing import Union

import numpy as np
from scipy.special import gammaincc

from src.model.errors import OutOfRange

ArrayLike = Union[float, np.ndarray]


def _scalar_or_array(values: np.ndarray) -> ArrayLike:
    return float(values) if values.ndim == 0 else values


def erlang_survival(shape: int, t: ArrayLike) -> ArrayLike:
    """P(Erlang(shape, 1) > t), the regularized upper incomplete gamma."""
    if shape < 1:
        raise OutOfRange(f"Erlang shape must be positive, got {shape}.")
    grid = np.asarray(t, dtype=float)
    return _scalar_or_array(np.where(grid <= 0, 1.0, gammaincc(shape, np.maximum(grid, 0.0))))


def family_survival_oracle(n: int, t: ArrayLike) -> ArrayLike:
    """(1 - 1/n) * P(Erlang(n+1) > t) + (1/n) * P(Erlang(2n) > t)."""
    if n < 2:
        raise OutOfRange(f"Family size must be at least 2, got {n}.")
    green = np.asarray(erlang_survival(n + 1, t))
    red = np.asarray(erlang_survival(2 * n, t))
    return _scalar_or_array(np.clip((1.0 - 1.0 / n) * green + red / n, 0.0, 1.0))


def family_product_oracle(n: int, t: ArrayLike) -> ArrayLike:
    """1 - P(tau <= t)^n for n copies of the size-n family."""
    survival = np.asarray(family_survival_oracle(n, t))
    with np.errstate(divide='ignore'):
        return _scalar_or_array(np.clip(-np.expm1(n * np.log1p(-survival)), 0.0, 1.0))


def plateau_limit(epsilon: float = 0.0) -> float:
    # Product TV between times n/(1-eps) and 2n/(1-eps) for large n.
    if not (0.0 <= epsilon < 1.0):
        raise OutOfRange(f"Backtrack rate must lie in [0, 1), got {epsilon}.")
    return 1.0 - math.exp(-(1.0 - epsilon))


# --------------------------------------------------------------- two states


def _check_rates(a: float, b: float) -> None:
    if not (a > 0 and b > 0):
        raise OutOfRange(f"Two-state rates must be positive, got {a}, {b}.")


def two_state_transient(a: float, b: float, start: int, t: float) -> np.ndarray:
    """Law at time t of the chain with rates 0->1 = a and 1->0 = b."""
    _check_rates(a, b)
    if start not in (0, 1):
        raise OutOfRange(f"Start state must be 0 or 1, got {start}.")
    pi = np.array([b, a]) / (a + b)
    decay = math.exp(-(a + b) * t)
    point = np.eye(2)[start]
    return pi + (point - pi) * decay


def two_state_tv(a: float, b: float, t: ArrayLike) -> ArrayLike:
    _check_rates(a, b)
    grid = np.asarray(t, dtype=float)
    return _scalar_or_array(max(a, b) / (a + b) * np.exp(-(a + b) * grid))


def two_state_separation(a: float, b: float, t: ArrayLike) -> ArrayLike:
    _check_rates(a, b)
    return _scalar_or_array(np.exp(-(a + b) * np.asarray(t, dtype=float)))


def two_state_mixing_time(a: float, b: float, threshold: float) -> float:
    """inf{t : worst-case TV < threshold}; -ln(2 * threshold) / 2 for unit rates."""
    _check_rates(a, b)
    if not (0.0 < threshold < 1.0):
        raise OutOfRange(f"Threshold must lie in (0, 1), got {threshold}.")
    return max(0.0, math.log(max(a, b) / (a + b) / threshold) / (a + b))
