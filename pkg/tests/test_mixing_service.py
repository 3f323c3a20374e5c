"""
Unit tests for mixing-time search, cutoff classification, condition (H) and the product window.
"""
import math

import numpy as np
import pytest

from src.model.errors import AtLeastTwoSizes, CapTooSmall, InvalidThreshold, OutOfRange
from src.model.markov_chain import ChainSpec
from src.model.reports import CUTOFF_CONSISTENT, NEITHER, PRECUTOFF_CONSISTENT, MixingReport
from src.services import mixing_service, oracle_service
from src.services.chain_service import random_reversible_chain
from src.services.mixing_service import ProfileSource


@pytest.fixture
def symmetric_pair():
    return ChainSpec.from_edges(2, [(0, 1, 1.0), (1, 0, 1.0)])


@pytest.fixture
def tv_source(symmetric_pair):
    return ProfileSource.from_chain(symmetric_pair, 'tv')


def family_oracle_source(n: int) -> ProfileSource:
    """Hitting-time survival of G_n as a TV-like profile."""
    return ProfileSource.from_function(lambda t: oracle_service.family_survival_oracle(n, t), 'tv', 4.0 * n)


class TestMixingTime:
    """Test cases for the bisection search."""

    @pytest.mark.parametrize('a', [0.1, 0.25, 0.4])
    def test_two_state_closed_form(self, tv_source, a):
        """t_mix(a) = -ln(2a)/2 for unit rates."""
        assert mixing_service.mixing_time(tv_source, a, t_hi=1.0) == pytest.approx(-math.log(2 * a) / 2, abs=1e-6)

    def test_right_edge_is_below_threshold(self, tv_source):
        """The returned time already has d < a."""
        t = mixing_service.mixing_time(tv_source, 0.25)
        assert tv_source(t) < 0.25

    def test_asymmetric_rates(self):
        chain = ChainSpec.from_edges(2, [(0, 1, 1.0), (1, 0, 3.0)])
        source = ProfileSource.from_chain(chain, 'tv')
        expected = oracle_service.two_state_mixing_time(1.0, 3.0, 0.1)
        assert mixing_service.mixing_time(source, 0.1) == pytest.approx(expected, abs=1e-4)

    def test_threshold_above_initial_distance(self, tv_source):
        """d(0) = 1/2, so any larger threshold is met at once."""
        assert mixing_service.mixing_time(tv_source, 0.6) == 0.0

    def test_invalid_thresholds(self, tv_source):
        for a in (0.0, 1.0, -0.2):
            with pytest.raises(InvalidThreshold):
                mixing_service.mixing_time(tv_source, a)

    def test_explicit_cap_too_small(self, tv_source):
        with pytest.raises(CapTooSmall):
            mixing_service.mixing_time(tv_source, 0.1, t_hi=0.1)

    def test_cap_doubling(self):
        """A search started far too low still finds the closed form."""
        source = ProfileSource.from_function(lambda t: oracle_service.two_state_tv(1.0, 1.0, t), 'tv', 0.01)
        assert mixing_service.mixing_time(source, 0.25) == pytest.approx(math.log(2.0) / 2, abs=1e-5)

    def test_shared_cap_gives_monotone_times(self, tv_source):
        times, cap = mixing_service.mixing_times(tv_source, [0.05, 0.1, 0.2, 0.3, 0.45])
        assert times == sorted(times, reverse=True)
        assert cap > times[0]

    def test_memoized_evaluations(self, tv_source):
        mixing_service.mixing_time(tv_source, 0.25)
        count = tv_source.evaluations
        mixing_service.mixing_time(tv_source, 0.25)
        assert tv_source.evaluations == count


class TestReportsAndClassification:
    """Test cases for mixing reports, condition (H) and the cutoff tags."""

    def test_condition_h_two_state(self, symmetric_pair):
        """t_mix(1/4) * gap = ln 2."""
        assert mixing_service.condition_H(symmetric_pair) == pytest.approx(math.log(2.0), abs=1e-4)

    def test_report_carries_condition_h(self, tv_source):
        report = mixing_service.mixing_report(tv_source, [0.2, 0.3], size=2)
        assert report.condition_h == pytest.approx(math.log(2.0), abs=1e-4)
        assert report.thresholds == sorted(report.thresholds)
        assert report.ratio(0.2) >= report.ratio(0.3) >= 1.0

    def test_eps_must_not_exceed_half(self, tv_source):
        with pytest.raises(InvalidThreshold):
            mixing_service.mixing_report(tv_source, [0.6])

    def test_classify(self):
        def report(size, ratios):
            return MixingReport(kind='tv', size=size, eps_list=[0.2] * len(ratios), ratios=ratios)

        assert mixing_service.classify([report(8, [3.0]), report(64, [1.05])]) == CUTOFF_CONSISTENT
        assert mixing_service.classify([report(8, [3.0]), report(64, [1.5])]) == PRECUTOFF_CONSISTENT
        assert mixing_service.classify([report(8, [7.0]), report(64, [1.5])]) == NEITHER

    def test_needs_two_sizes(self):
        with pytest.raises(AtLeastTwoSizes):
            mixing_service.cutoff_diagnostics([(8, family_oracle_source(8))], 'tv', [0.2])

    def test_family_ratios_shrink_with_size(self):
        """Erlang-mixture profiles sharpen as n grows."""
        sizes = [8, 16, 32, 64]
        reports = mixing_service.cutoff_diagnostics([(n, family_oracle_source(n)) for n in sizes], 'tv', [0.2])
        ratios = [report.ratio(0.2) for report in reports]
        assert all(later < earlier for earlier, later in zip(ratios, ratios[1:]))
        assert ratios[2] <= 1.4
        assert {report.classification for report in reports} == {PRECUTOFF_CONSISTENT}

    def test_loose_delta_tags_cutoff(self):
        members = [(n, family_oracle_source(n)) for n in (16, 64)]
        reports = mixing_service.cutoff_diagnostics(members, 'tv', [0.2], delta=0.5)
        assert reports[-1].classification == CUTOFF_CONSISTENT


class TestProductWindow:
    """Test cases for the separation window of n-fold products."""

    def test_two_state_window_holds(self):
        marginal = ProfileSource.from_function(lambda t: oracle_service.two_state_separation(1.0, 1.0, t),
                                               'sep', 10.0)
        verdict = mixing_service.technios_check(marginal, 64)
        assert verdict.holds
        assert verdict.marginal_wide == pytest.approx(math.log(16.0) / 2, abs=1e-4)
        assert verdict.marginal_narrow == pytest.approx(math.log(256.0) / 2, abs=1e-4)
        assert verdict.marginal_wide <= verdict.product_early <= verdict.product_late <= verdict.marginal_narrow
        assert verdict.ratio <= 2.05

    def test_product_lift_of_source(self):
        marginal = ProfileSource.from_function(lambda t: oracle_service.two_state_separation(1.0, 1.0, t),
                                               'sep', 10.0)
        product = ProfileSource.product(marginal, 64)
        t = 2.0
        assert product(t) == pytest.approx(1.0 - (1.0 - math.exp(-4.0)) ** 64)

    def test_window_needs_separation(self, tv_source):
        with pytest.raises(OutOfRange):
            mixing_service.technios_check(tv_source, 64)

    def test_random_chains_respect_window(self):
        for seed in range(3):
            chain = random_reversible_chain(seed=seed, m=5)
            verdict = mixing_service.technios_check(ProfileSource.from_chain(chain, 'sep'), 64)
            assert verdict.holds, verdict
            assert np.isfinite(verdict.margin)
