"""
Closed-form oracles checked against the uniformization engine.
"""
import math

import numpy as np
import pytest

from src.model.errors import OutOfRange
from src.model.family import FamilyParams
from src.model.markov_chain import ChainSpec
from src.services import chain_service, oracle_service
from src.services.family_service import hitting_profile


def birth_chain_with_return(k: int) -> ChainSpec:
    """Unit-rate path 0 -> 1 -> ... -> k closed by a return edge k -> 0."""
    edges = [(i, i + 1, 1.0) for i in range(k)] + [(k, 0, 1.0)]
    return ChainSpec.from_edges(k + 1, edges)


class TestErlang:
    """Test cases for Erlang survival against pure-birth absorption times."""

    @pytest.mark.parametrize('k', [4, 16, 64])
    def test_matches_pure_birth_chain(self, k):
        """Absorption at k from 0 is a sum of k unit exponentials."""
        times = np.linspace(0.0, 3.0 * k, 13)
        survival = chain_service.survival_curve(birth_chain_with_return(k), [k], 0, times)
        assert np.abs(survival - oracle_service.erlang_survival(k, times)).max() < 1e-10

    def test_scalar_input_gives_float(self):
        """Scalars in, floats out; survival at zero is one."""
        assert oracle_service.erlang_survival(3, 0.0) == 1.0
        assert isinstance(oracle_service.erlang_survival(3, 1.0), float)

    def test_shape_must_be_positive(self):
        with pytest.raises(OutOfRange):
            oracle_service.erlang_survival(0, 1.0)


class TestFamilyOracle:
    """Test cases for the Erlang-mixture law of the hitting time of C."""

    def test_matches_family_chain_with_tiny_backtracks(self):
        """With epsilon = 2^-64 the chain survival equals the mixture to numerical precision."""
        params = FamilyParams(8)
        times = np.linspace(0.0, 40.0, 21)
        chain_survival = hitting_profile(params, times, with_tv=False).survival
        assert np.abs(chain_survival - oracle_service.family_survival_oracle(8, times)).max() < 1e-10

    def test_product_oracle_limits(self):
        """Product profile starts at one and vanishes far beyond 2n."""
        assert oracle_service.family_product_oracle(16, 0.0) == 1.0
        assert oracle_service.family_product_oracle(16, 200.0) < 1e-12

    def test_plateau_value(self):
        """The plateau between n and 2n sits at 1 - e^-(1 - eps)."""
        assert oracle_service.plateau_limit() == pytest.approx(1.0 - math.exp(-1.0))
        assert oracle_service.plateau_limit(0.5) == pytest.approx(1.0 - math.exp(-0.5))
        with pytest.raises(OutOfRange):
            oracle_service.plateau_limit(1.0)

    def test_product_oracle_on_plateau(self):
        """At t = 1.5n only the red branch is still running: 1 - (1 - 1/n)^n."""
        n = 256
        expected = 1.0 - (1.0 - 1.0 / n) ** n
        assert oracle_service.family_product_oracle(n, 1.5 * n) == pytest.approx(expected, abs=1e-3)


class TestTwoState:
    """Test cases for the two-state closed forms."""

    @pytest.mark.parametrize('a,b', [(1.0, 1.0), (1.0, 3.0), (0.2, 5.0)])
    def test_transient_matches_uniformization(self, a, b):
        chain = ChainSpec.from_edges(2, [(0, 1, a), (1, 0, b)])
        for t in (0.0, 0.05, 0.7, 3.0):
            for start in (0, 1):
                row = chain_service.transient_distribution(chain, start, t).values
                assert np.abs(row - oracle_service.two_state_transient(a, b, start, t)).max() < 1e-10

    def test_unit_rate_mixing_time(self):
        """t_mix(a) = -ln(2a)/2 for unit rates."""
        for a in (0.1, 0.25, 0.4):
            assert oracle_service.two_state_mixing_time(1.0, 1.0, a) == pytest.approx(-math.log(2 * a) / 2)

    def test_threshold_above_initial_distance(self):
        """No time is needed when the threshold exceeds d(0)."""
        assert oracle_service.two_state_mixing_time(1.0, 1.0, 0.6) == 0.0

    def test_rates_must_be_positive(self):
        with pytest.raises(OutOfRange):
            oracle_service.two_state_tv(0.0, 1.0, 1.0)
        with pytest.raises(OutOfRange):
            oracle_service.two_state_transient(1.0, 1.0, 2, 1.0)
