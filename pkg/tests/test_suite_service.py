"""
Unit tests for the inequality suite: seeding, batch evaluation, witnesses and the Hellinger window.
"""
import os
from dataclasses import replace
from unittest.mock import patch

import pytest

from resources.resource_config import THREADS_ENV_VAR, NumericDefaults
from src.model.distance_profile import DistanceKind
from src.model.errors import CapTooSmall, CopiesTooSmall, InvalidConfig, ZeroReferenceMass
from src.model.family import FamilyParams
from src.model.markov_chain import ChainSpec
from src.model.reports import INEQUALITY_NAMES, InequalityResult, SuiteConfig, Witness
from src.services import chain_service, family_service, mixing_service, suite_service
from src.services.mixing_service import ProfileSource


@pytest.fixture(scope='module')
def small_config():
    """A few small chains with every inequality except the Hellinger window."""
    return SuiteConfig(master_seed=3, chain_count=4, state_range=(3, 6), grid_points=6,
                       inequalities=tuple(name for name in INEQUALITY_NAMES if name != 'hellinger_window'),
                       product_chain_count=2, window_chain_count=0)


@pytest.fixture(scope='module')
def small_report(small_config):
    return suite_service.run_suite(small_config)


class TestSuiteConfig:
    """Test cases for configuration validation."""

    def test_chain_count(self):
        with pytest.raises(InvalidConfig):
            SuiteConfig(chain_count=0)

    def test_unknown_inequality(self):
        with pytest.raises(InvalidConfig):
            SuiteConfig(inequalities=('bogus',))
        with pytest.raises(InvalidConfig):
            SuiteConfig(inequalities=())

    def test_tolerances(self):
        with pytest.raises(InvalidConfig):
            SuiteConfig(tolerances={'bogus': 1e-9})
        with pytest.raises(InvalidConfig):
            SuiteConfig(tolerances={'dbar_vs_tv': 0.0})
        assert SuiteConfig(tolerances={'dbar_vs_tv': 1e-6}).tolerance('dbar_vs_tv') == 1e-6

    def test_state_range(self):
        with pytest.raises(InvalidConfig):
            SuiteConfig(state_range=(1, 5))

    def test_threads_default_to_cpu_count(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
        assert SuiteConfig().threads == (os.cpu_count() or 1)
        monkeypatch.setenv(THREADS_ENV_VAR, '3')
        assert SuiteConfig().threads == 3
        monkeypatch.setenv(THREADS_ENV_VAR, 'many')
        assert SuiteConfig().threads == (os.cpu_count() or 1)


class TestInequalityResult:
    """Test cases for the pass verdict of one inequality."""

    def test_empty_result_does_not_pass(self):
        assert InequalityResult('dbar_vs_tv', 1e-9).passed is False

    def test_any_error_fails(self):
        result = InequalityResult('dbar_vs_tv', 1e-9)
        witness = Witness(0, 1, 3, [0.5])
        result.record(-0.2, witness)
        assert result.passed
        result.add_error()
        result.record(-0.3, witness)
        assert not result.passed
        assert (result.instances, result.errors, result.worst_margin) == (2, 1, -0.2)

    def test_violation_fails(self):
        result = InequalityResult('dbar_vs_tv', 1e-9)
        result.record(1e-3, Witness(0, 1, 3, [0.5]))
        assert not result.passed


class TestSeeding:
    """Test cases for seed spawning and chain sampling."""

    def test_seeds_are_deterministic(self, small_config):
        assert suite_service.chain_seeds(small_config) == suite_service.chain_seeds(small_config)
        assert len(set(suite_service.chain_seeds(small_config))) == 4

    def test_chain_sizes_in_range(self, small_config):
        for seed in suite_service.chain_seeds(small_config):
            chain = suite_service.chain_for_seed(small_config, seed)
            assert 3 <= chain.state_count <= 6

    def test_time_grid(self, small_config):
        grid = suite_service.time_grid(small_config, 2.0)
        assert len(grid) == 6
        assert grid[0] == pytest.approx(0.005)
        assert grid[-1] == pytest.approx(10.0)


class TestRunSuite:
    """Test cases for the batch driver."""

    def test_all_inequalities_pass(self, small_report):
        assert small_report.passed, [r for r in small_report.results if not r.passed]
        assert small_report.non_vacuous
        assert not small_report.errors

    def test_instance_counts(self, small_report):
        # 4 random chains plus the family instance, 6 grid points each.
        assert small_report.result('dbar_vs_tv').instances == 5 * 6
        assert small_report.result('product_separation_window').instances == 2

    def test_deterministic_across_threads(self, small_config, small_report):
        threaded = replace(small_config, threads=3)
        assert suite_service.run_suite(threaded).to_dict() == small_report.to_dict()

    def test_witness_replays_exactly(self, small_config, small_report):
        for result in small_report.results:
            replayed = suite_service.replay_witness(small_config, result.name, result.witness)
            assert replayed == pytest.approx(result.worst_margin, abs=1e-12)

    def test_family_instance_is_last(self, small_config):
        with patch.object(suite_service, '_evaluate_chain', wraps=suite_service._evaluate_chain) as spy:
            suite_service.run_suite(replace(small_config, inequalities=('dbar_vs_tv',)))
        _, index, chain, seed = spy.call_args_list[-1].args
        assert (index, seed) == (4, None)
        assert chain.state_count == 17

    def test_report_document(self, small_report):
        payload = small_report.to_dict()
        assert payload['schema_version'] == 1
        assert payload['passed'] is True
        assert [item['name'] for item in payload['results']][0] == 'hellinger_doubling'

    def test_vacuous_or_errored_report_does_not_pass(self, small_report):
        assert not replace(small_report, non_vacuous=False).passed
        assert not replace(small_report, errors=[{'chain_index': 0, 'inequality': None}]).passed

    def test_errored_check_fails_the_suite(self):
        """A check that raises on every instance is a failure, not a vacuous pass."""
        config = SuiteConfig(master_seed=3, chain_count=2, state_range=(3, 5), grid_points=4,
                             inequalities=('hellinger_window',), window_chain_count=2, threads=1)
        with patch('src.services.suite_service.hellinger_window_check', side_effect=CapTooSmall('cap')):
            report = suite_service.run_suite(config)
        result = report.result('hellinger_window')
        assert (result.instances, result.errors) == (0, 2)
        assert result.passed is False
        assert report.passed is False
        assert report.to_dict()['passed'] is False

    def test_errors_are_recorded_not_raised(self, small_config):
        with patch('src.services.suite_service.pointwise_margins', side_effect=ZeroReferenceMass('boom')):
            report = suite_service.run_suite(small_config)
        assert report.errors
        assert report.result('dbar_vs_tv').instances == 0
        assert report.result('dbar_vs_tv').errors == 5 * 6
        assert all('ZeroReferenceMass' in record['error'] for record in report.errors)


class TestHellingerWindow:
    """Test cases for the Hellinger window of n-fold products."""

    def test_two_state_window(self):
        chain = ChainSpec.from_edges(2, [(0, 1, 1.0), (1, 0, 1.0)])
        verdict = suite_service.hellinger_window_check(chain, 256)
        assert verdict.holds, verdict
        assert 0.95 * verdict.t_n <= verdict.lower_envelope_time
        assert verdict.upper_envelope_time <= 2.1 * verdict.t_n

    def test_needs_eight_copies(self):
        chain = chain_service.random_reversible_chain(seed=0, m=4)
        with pytest.raises(CopiesTooSmall):
            suite_service.hellinger_window_check(chain, 4)


@pytest.mark.slow
class TestAcceptanceScale:
    """The default batch and the 64-fold product windows."""

    def test_default_suite(self):
        report = suite_service.run_suite(SuiteConfig(master_seed=7))
        assert report.passed, [result for result in report.results if not result.passed]
        assert not report.errors
        assert report.result('hellinger_doubling').instances == (NumericDefaults.SUITE_CHAIN_COUNT + 1) * 25
        assert report.result('hellinger_window').instances == NumericDefaults.WINDOW_CHAIN_COUNT

    def test_product_window_over_random_chains(self):
        config = SuiteConfig(master_seed=7, chain_count=50)
        for seed in suite_service.chain_seeds(config):
            chain = suite_service.chain_for_seed(config, seed)
            verdict = mixing_service.technios_check(ProfileSource.from_chain(chain, DistanceKind.SEPARATION), 64)
            assert verdict.ratio <= 2.05, (seed, verdict)
            assert verdict.margin <= config.tolerance('product_separation_window'), (seed, verdict)

    def test_product_window_on_family_base(self):
        chain, _ = family_service.build_family_chain(FamilyParams(64))
        verdict = mixing_service.technios_check(ProfileSource.from_chain(chain, DistanceKind.SEPARATION), 64)
        assert verdict.ratio <= 2.05
        assert verdict.holds, verdict

    def test_hellinger_window_on_family_base(self):
        chain, _ = family_service.build_family_chain(FamilyParams(64))
        assert suite_service.hellinger_window_check(chain, 64).holds
