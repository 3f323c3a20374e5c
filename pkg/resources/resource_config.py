"""
Resource Configuration Module
Centralized numeric defaults and resource paths for the cutoff toolkit
"""
import os
from pathlib import Path
from typing import Final

# Base resource directory
RESOURCES_BASE = Path(__file__).parent

# Chain-spec files carry this extension
VALID_CHAIN_EXTENSIONS: Final[tuple[str, ...]] = ('.json',)

# Environment variables read at startup
THREADS_ENV_VAR: Final[str] = 'CUTOFF_THREADS'
LOG_LEVEL_ENV_VAR: Final[str] = 'CUTOFF_LOG_LEVEL'


class NumericDefaults:
    """Tolerances, caps and suite defaults used across the services"""

    # Uniformization
    TAIL_TOLERANCE = 1e-13
    OVERFLOW_CAP = 1e7
    DENSE_KERNEL_MAX_STATES = 64
    POWER_CHUNK = 64

    # Stationary distribution / reversibility
    LOG_MODE_FLOOR = 1e-280
    BALANCE_TOLERANCE = 1e-10
    CYCLE_TOLERANCE = 1e-8
    RESIDUAL_TOLERANCE = 1e-10
    SYMMETRY_TOLERANCE = 1e-8

    # Profiles
    MONOTONE_SLACK = 1e-9
    RANGE_SLACK = 1e-12

    # Mixing times
    BISECTION_REL_WIDTH = 1e-6
    CAP_FACTOR = 50.0
    MAX_CAP_DOUBLINGS = 40
    CUTOFF_DELTA = 0.1
    PRECUTOFF_BOUND = 5.0

    # Products
    TENSOR_SIZE_CAP = 200_000

    # Counterexample family
    FAMILY_DEFAULT_EPSILON = 1e-6
    SMALL_FAMILY_MAX_N = 10
    SEPARATION_TV_GAP = 0.01

    # Inequality suite
    SUITE_CHAIN_COUNT = 500
    SUITE_STATE_RANGE = (3, 12)
    SUITE_DEGREE = 3.0
    SUITE_RATE_RANGE = (0.5, 2.0)
    SUITE_GRID_POINTS = 25
    SUITE_GRID_SPAN = (0.01, 20.0)
    INEQUALITY_TOLERANCE = 1e-9
    PRODUCT_COPIES = 64
    PRODUCT_THRESHOLD = 0.3
    PRODUCT_RATIO_SLACK = 0.05
    PRODUCT_CHAIN_COUNT = 50
    WINDOW_COPIES = 256
    WINDOW_SLACK = 0.05
    WINDOW_CHAIN_COUNT = 20
    FAMILY_SUITE_SIZE = 8


class ResourcePaths:
    """Centralized resource path management"""

    CHAINS = RESOURCES_BASE / "chains"

    TWO_STATE = CHAINS / "two_state.json"
    BIRTH_DEATH = CHAINS / "birth_death.json"
    FOUR_CYCLE = CHAINS / "four_cycle.json"
    BIASED_CYCLE = CHAINS / "biased_three_cycle.json"

    @classmethod
    def list_sample_chains(cls) -> list[Path]:
        """Get list of all sample chain files"""
        if cls.CHAINS.exists():
            return sorted(p for p in cls.CHAINS.iterdir() if p.suffix in VALID_CHAIN_EXTENSIONS)
        return []

    @classmethod
    def validate_resources(cls) -> list[str]:
        """Return the sample files that are missing on disk"""
        expected = [cls.TWO_STATE, cls.BIRTH_DEATH, cls.FOUR_CYCLE, cls.BIASED_CYCLE]
        return [str(path) for path in expected if not path.exists()]


def get_chain_path(name: str) -> Path:
    """
    Get path for a bundled sample chain

    Args:
        name: Name of the chain file (with or without .json extension)

    Returns:
        Path to the chain file
    """
    if not name.endswith('.json'):
        name += '.json'
    return ResourcePaths.CHAINS / name


def default_thread_count() -> int:
    """
    Worker count for batch work, read from the environment

    Returns:
        A positive integer; the CPU count when the variable is unset or invalid
    """
    raw = os.environ.get(THREADS_ENV_VAR, '')
    try:
        value = int(raw)
    except ValueError:
        return os.cpu_count() or 1
    return max(1, value)


if __name__ == "__main__":
    missing = ResourcePaths.validate_resources()
    if missing:
        print("Missing resources:")
        for resource in missing:
            print(f"  - {resource}")
    else:
        print("All resources validated successfully!")
    print(f"Sample chains: {len(ResourcePaths.list_sample_chains())}")
    print(f"Default threads: {default_thread_count()}")
