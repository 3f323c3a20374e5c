"""
Unit tests for the FileService: chain specs, profiles and report documents.
"""
import json

import numpy as np
import pytest

from resources.resource_config import ResourcePaths
from src.model.distance_profile import DistanceKind, DistanceProfile
from src.model.errors import ChainFormatError, NonIrreducible
from src.model.family import FamilyParams
from src.model.markov_chain import ChainSpec
from src.model.reports import MinorizationVerdict
from src.services.family_service import build_family_chain
from src.services.file_service import FileService


@pytest.fixture
def family_chain():
    return build_family_chain(FamilyParams(4))[0]


@pytest.fixture
def profile():
    return DistanceProfile(DistanceKind.TOTAL_VARIATION, [0.0, 0.1, 1.0 / 3.0], [0.5, 0.4093653765389909, 0.2567085595])


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding='utf-8')
    return path


class TestChainFiles:
    """Test cases for reading and writing chain specs."""

    def test_round_trip_is_exact(self, tmp_path, family_chain):
        path = FileService.save_chain(family_chain, tmp_path / 'g4.json')
        assert path is not None
        assert FileService.load_chain(path) == family_chain

    def test_small_rates_use_log_form(self):
        """A rate of e^-1000 is below the double floor and survives only as a log."""
        chain = ChainSpec.from_log_edges(2, [(0, 1, 0.0), (1, 0, -1000.0)])
        payload = FileService.chain_to_dict(chain)
        assert FileService.chain_from_dict(json.loads(FileService.to_json(payload))) == chain
        assert any(isinstance(rate, dict) and set(rate) == {'log'} for _, _, rate in payload['rates'])

    def test_bundled_samples_load(self):
        for path in ResourcePaths.list_sample_chains():
            assert FileService.load_chain(path).state_count >= 2

    def test_labels_as_endpoints(self):
        chain = FileService.chain_from_dict({'states': ['a', 'b'], 'rates': [['a', 'b', 1.0], ['b', 'a', 2.0]]})
        assert chain.rate(1, 0) == 2.0

    def test_syntax_error_location(self, tmp_path):
        path = write(tmp_path, 'broken.json', '{"states": ["a", "b"],\n  "rates": [[0, 1, 1.0],]}')
        with pytest.raises(ChainFormatError) as info:
            FileService.load_chain(path)
        assert info.value.location.startswith(f"{path}:2:")

    def test_field_error_location(self, tmp_path):
        document = {'states': ['a', 'b'], 'rates': [[0, 1, 1.0], [1, 0, -2.0]]}
        path = write(tmp_path, 'negative.json', json.dumps(document))
        with pytest.raises(ChainFormatError) as info:
            FileService.load_chain(path)
        assert info.value.location == f"{path}:rates[1][2]"

    @pytest.mark.parametrize('document,where', [
        ({'states': ['a', 'b']}, 'rates'),
        ({'states': ['a', 'a'], 'rates': []}, 'states'),
        ({'states': ['a', 'b'], 'rates': [[0, 'z', 1.0]]}, 'rates[0][1]'),
        ({'states': ['a', 'b'], 'rates': [[0, 1]]}, 'rates[0]'),
        ({'states': ['a', 'b'], 'rates': [[0, 1, {'log': 'x'}]]}, 'rates[0][2]'),
    ])
    def test_schema_errors(self, document, where):
        with pytest.raises(ChainFormatError) as info:
            FileService.chain_from_dict(document, 'doc')
        assert info.value.location == f"doc:{where}"

    def test_structural_errors_propagate(self):
        """A well-formed but reducible chain is not a format error."""
        with pytest.raises(NonIrreducible):
            FileService.chain_from_dict({'states': ['a', 'b'], 'rates': [[0, 1, 1.0]]})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ChainFormatError):
            FileService.load_chain(tmp_path / 'nope.json')

    def test_is_valid_chain_file(self, tmp_path):
        assert FileService.is_valid_chain_file(ResourcePaths.TWO_STATE)
        assert not FileService.is_valid_chain_file(write(tmp_path, 'chain.txt', '{}'))
        assert not FileService.is_valid_chain_file(tmp_path / 'missing.json')


class TestProfileFiles:
    """Test cases for profile CSV and JSON documents."""

    def test_csv_header(self, profile):
        text = FileService.profile_to_csv(profile)
        assert text.splitlines()[:2] == ['# kind=tv', 'time,value']

    def test_csv_round_trip_is_bit_exact(self, tmp_path, profile):
        path = FileService.save_profile_csv(profile, tmp_path / 'profile.csv')
        loaded = FileService.load_profile_csv(path)
        assert loaded.kind is DistanceKind.TOTAL_VARIATION
        assert np.array_equal(loaded.times, profile.times)
        assert np.array_equal(loaded.values, profile.values)

    def test_csv_needs_kind_line(self):
        with pytest.raises(ChainFormatError):
            FileService.profile_from_csv('time,value\n0,1\n')

    def test_json_round_trip(self, tmp_path, profile):
        path = FileService.save_profile_json(profile, tmp_path / 'profile.json')
        loaded = FileService.load_profile_json(path)
        assert np.array_equal(loaded.values, profile.values)


class TestDocuments:
    """Test cases for JSON reports and raw text output."""

    def test_to_json_handles_numpy_and_dataclasses(self):
        verdict = MinorizationVerdict(True, np.float64(0.5), (1, 2), 4.0, 0.0)
        text = FileService.to_json({'verdict': verdict, 'values': np.arange(3), 'count': np.int64(2)})
        assert text.endswith('\n')
        payload = json.loads(text)
        assert payload['verdict']['worst_pair'] == [1, 2]
        assert payload['values'] == [0, 1, 2]

    def test_save_text_failure_returns_none(self, tmp_path):
        assert FileService.save_text('data', tmp_path) is None

    def test_save_text_creates_parents(self, tmp_path):
        target = tmp_path / 'a' / 'b' / 'out.txt'
        assert FileService.save_text('data', target) == str(target)
        assert target.read_text(encoding='utf-8') == 'data'
