"""
Unit tests for probability distances, worst-case profiles and the l1(pi) operator norm.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.model.distance_profile import DistanceKind
from src.model.errors import DimensionMismatch, NotMeanZero, OutOfRange, ZeroReferenceMass
from src.model.markov_chain import ChainSpec, ProbDist
from src.model.uniformization import Uniformizer
from src.services import chain_service, metrics_service, oracle_service

weights = st.lists(st.floats(min_value=1e-3, max_value=1.0), min_size=5, max_size=5)


def normalized(raw) -> ProbDist:
    values = np.asarray(raw, dtype=float)
    return ProbDist(values / values.sum())


@pytest.fixture
def symmetric_pair():
    """Two states, unit rates both ways."""
    return ChainSpec.from_edges(2, [(0, 1, 1.0), (1, 0, 1.0)])


@pytest.fixture
def random_chain():
    return chain_service.random_reversible_chain(seed=23, m=7)


class TestDistance:
    """Test cases for distances between two distributions."""

    def test_point_masses(self):
        """Disjoint point masses are at TV 1 and Hellinger sqrt(2)."""
        mu, nu = ProbDist.point_mass(3, 0), ProbDist.point_mass(3, 2)
        assert metrics_service.distance(mu, nu, 'tv') == 1.0
        assert metrics_service.distance(mu, nu, 'hellinger') == pytest.approx(math.sqrt(2.0))

    def test_separation_needs_positive_reference(self):
        with pytest.raises(ZeroReferenceMass):
            metrics_service.distance(ProbDist([0.5, 0.5]), ProbDist([1.0, 0.0]), 'sep')

    def test_separation_of_uniform_rows(self):
        """sep(mu, pi) = 1 - min mu/pi."""
        mu, pi = ProbDist([0.1, 0.4, 0.5]), ProbDist([0.2, 0.4, 0.4])
        assert metrics_service.distance(mu, pi, DistanceKind.SEPARATION) == pytest.approx(0.5)

    def test_log_reference_matches_linear(self):
        """A log-domain reference gives the same separation."""
        mu = ProbDist([0.1, 0.4, 0.5])
        pi = ProbDist.from_log_weights(np.log([0.2, 0.4, 0.4]))
        assert metrics_service.distance(mu, pi, 'sep') == pytest.approx(0.5, abs=1e-12)

    def test_size_mismatch(self):
        with pytest.raises(DimensionMismatch):
            metrics_service.distance(ProbDist([1.0, 0.0]), ProbDist([0.2, 0.3, 0.5]), 'tv')

    def test_unknown_kind(self):
        with pytest.raises(OutOfRange):
            metrics_service.distance(ProbDist([1.0]), ProbDist([1.0]), 'kl')

    @settings(max_examples=60, deadline=None)
    @given(weights, weights)
    def test_tv_hellinger_sandwich(self, raw_mu, raw_nu):
        """tv <= hellinger <= sqrt(2 tv)."""
        mu, nu = normalized(raw_mu), normalized(raw_nu)
        tv = metrics_service.distance(mu, nu, 'tv')
        h = metrics_service.distance(mu, nu, 'hellinger')
        assert tv <= h + 1e-12
        assert h <= math.sqrt(2.0 * tv) + 1e-12

    @settings(max_examples=60, deadline=None)
    @given(weights, weights)
    def test_tv_below_separation(self, raw_mu, raw_nu):
        mu, nu = normalized(raw_mu), normalized(raw_nu)
        assert metrics_service.distance(mu, nu, 'tv') <= metrics_service.distance(mu, nu, 'sep') + 1e-12


class TestWorstCaseProfile:
    """Test cases for worst-case profiles against closed forms."""

    def test_two_state_profiles(self, symmetric_pair):
        """tv = e^-2t / 2, sep = e^-2t, pairwise = e^-2t."""
        times = np.linspace(0.0, 3.0, 16)
        decay = np.exp(-2.0 * times)
        tv = metrics_service.worst_case_profile(symmetric_pair, 'tv', times)
        sep = metrics_service.worst_case_profile(symmetric_pair, 'sep', times)
        pairwise = metrics_service.worst_case_profile(symmetric_pair, 'pairwise', times)
        assert np.abs(tv.values - oracle_service.two_state_tv(1.0, 1.0, times)).max() < 1e-12
        assert np.abs(sep.values - decay).max() < 1e-12
        assert np.abs(pairwise.values - decay).max() < 1e-12

    def test_two_state_hellinger(self, symmetric_pair):
        """H^2 = 2 - sqrt(1 + e) - sqrt(1 - e) with e = e^-2t."""
        times = np.array([0.1, 0.5, 1.0, 2.0])
        decay = np.exp(-2.0 * times)
        expected = np.sqrt(2.0 - np.sqrt(1.0 + decay) - np.sqrt(1.0 - decay))
        values = metrics_service.worst_case_values(symmetric_pair, DistanceKind.HELLINGER, times)
        assert np.abs(values - expected).max() < 1e-10

    def test_profiles_are_monotone(self, random_chain):
        """Every worst-case profile passes the DistanceProfile invariants."""
        times = np.geomspace(0.01, 10.0, 30)
        for kind in DistanceKind:
            profile = metrics_service.worst_case_profile(random_chain, kind, times)
            assert len(profile) == 30
            assert profile.kind is kind

    def test_separation_sandwich(self, random_chain):
        """d(t) <= d^s(t) <= 4 d(t / 2)."""
        times = np.geomspace(0.02, 8.0, 25)
        d = metrics_service.worst_case_profile(random_chain, 'tv', times).values
        sep = metrics_service.worst_case_profile(random_chain, 'sep', times).values
        d_half = metrics_service.worst_case_profile(random_chain, 'tv', times / 2.0).values
        assert np.all(d <= sep + 1e-9)
        assert np.all(sep <= 4.0 * d_half + 1e-9)

    def test_pairwise_sandwich(self, random_chain):
        """d <= dbar <= 2d."""
        times = np.geomspace(0.05, 5.0, 12)
        d = metrics_service.worst_case_values(random_chain, 'tv', times)
        dbar = metrics_service.worst_case_values(random_chain, 'pairwise', times)
        assert np.all(d <= dbar + 1e-12)
        assert np.all(dbar <= 2.0 * d + 1e-12)

    def test_log_separation_matches_linear(self, random_chain):
        """The log-domain separation path agrees with the linear one."""
        pi = chain_service.stationary_distribution(random_chain, 'log')
        engine = Uniformizer()
        for t in (0.2, 1.0, 3.0):
            linear = metrics_service.worst_case_values(random_chain, 'sep', [t], pi)[0]
            log = metrics_service.separation_from_log(engine.log_transition_matrix(random_chain, t),
                                                      pi.log_values())
            assert log == pytest.approx(linear, abs=1e-10)

    def test_start_distances_shape(self, random_chain):
        per_start = metrics_service.start_distances(random_chain, 'tv', [0.5, 1.0])
        pairs = metrics_service.start_distances(random_chain, 'pairwise', [0.5, 1.0])
        assert per_start.shape == (2, 7)
        assert pairs.shape == (2, 7, 7)

    def test_reduced_separation(self):
        """For rates 1, 3 the column of state 0 gives e^-4t."""
        chain = ChainSpec.from_edges(2, [(0, 1, 1.0), (1, 0, 3.0)])
        assert metrics_service.reduced_separation(chain, 0.4, 0) == pytest.approx(math.exp(-1.6), abs=1e-12)


class TestOperatorNorm:
    """Test cases for the l1(pi) contraction of pair test functions."""

    def test_pair_ratio_is_row_tv(self, random_chain):
        """||P_t f|| / ||f|| equals TV(P_t(x, .), P_t(y, .)) for reversible chains."""
        pi = chain_service.resolve_equilibrium(random_chain)
        t = 0.7
        f = metrics_service.pair_test_function(pi, 1, 4)
        ratio = metrics_service.operator_norm_ratio(random_chain, t, f, pi)
        rows = metrics_service.start_distances(random_chain, 'pairwise', [t], pi)[0]
        assert ratio == pytest.approx(rows[1, 4], abs=1e-10)

    def test_contraction_by_dbar(self, random_chain):
        pi = chain_service.resolve_equilibrium(random_chain)
        for t in (0.1, 1.0, 4.0):
            dbar = metrics_service.worst_case_values(random_chain, 'pairwise', [t], pi)[0]
            for x, y in ((0, 1), (2, 6), (5, 3)):
                f = metrics_service.pair_test_function(pi, x, y)
                assert metrics_service.l1_contraction_check(random_chain, t, f, dbar, pi)

    @pytest.mark.parametrize('t', [0.05, 0.6, 3.0])
    def test_random_functions_contract_by_dbar(self, random_chain, t):
        """500 random mean-zero f never beat the pair functions, which reach dbar."""
        pi = chain_service.resolve_equilibrium(random_chain)
        dbar = metrics_service.worst_case_values(random_chain, 'pairwise', [t], pi)[0]
        rng = np.random.default_rng(101)
        for _ in range(500):
            f = rng.normal(size=7)
            f -= pi.values @ f
            assert metrics_service.l1_contraction_check(random_chain, t, f, dbar, pi)
        pairs = [metrics_service.pair_test_function(pi, x, y) for x in range(7) for y in range(x + 1, 7)]
        best = max(metrics_service.operator_norm_ratio(random_chain, t, f, pi) for f in pairs)
        assert best == pytest.approx(dbar, abs=1e-6)

    def test_rejects_non_centred_function(self, random_chain):
        f = np.zeros(7)
        f[0] = 1.0
        with pytest.raises(NotMeanZero):
            metrics_service.operator_norm_ratio(random_chain, 1.0, f)

    def test_rejects_zero_and_misshaped_functions(self, random_chain):
        with pytest.raises(OutOfRange):
            metrics_service.operator_norm_ratio(random_chain, 1.0, np.zeros(7))
        with pytest.raises(DimensionMismatch):
            metrics_service.operator_norm_ratio(random_chain, 1.0, np.zeros(3))
        with pytest.raises(OutOfRange):
            metrics_service.pair_test_function(chain_service.resolve_equilibrium(random_chain), 2, 2)
