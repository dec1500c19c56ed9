"""Fixture generator: determinism, structure, and parse agreement."""

import numpy as np
import pytest

from epworkbench import synth
from epworkbench.domain import SeriesKind
from epworkbench.parsers import parse_eio, parse_idf, parse_output_table


def read_all(paths):
    return {role: path.read_bytes() for role, path in paths.items()}


class TestGenerateFixture:
    def test_seven_day_five_minute_row_count(self, fixture_paths):
        csv = fixture_paths["csv"].read_text()
        data_rows = [line for line in csv.splitlines()[1:] if line.strip()]
        assert len(data_rows) == 7 * 24 * 12  # 2016

    def test_byte_identical_across_runs(self, fixture_spec, tmp_path):
        first = synth.generate_fixture(fixture_spec, tmp_path / "a")
        second = synth.generate_fixture(fixture_spec, tmp_path / "b")
        assert read_all(first) == read_all(second)

    def test_single_zone_fixture(self, tmp_path):
        spec = synth.FixtureSpec(seed=3, n_zones=1, days=1)
        paths = synth.generate_fixture(spec, tmp_path)
        table = parse_output_table(paths["csv"].read_text())
        zone_series = [s for s in table.series if s.descriptor.kind is SeriesKind.ZONE]
        entities = {s.descriptor.entity for s in zone_series}
        assert entities == {"ZONE_1"}

    def test_idf_matches_spec(self, fixture_paths, fixture_spec):
        model = parse_idf(fixture_paths["idf"].read_text())
        assert len(model.zones) == fixture_spec.n_zones
        assert model.time_resolution == fixture_spec.resolution
        assert model.run_period == ((1, 1), (1, 7))

    def test_eio_zone_count(self, fixture_paths, fixture_spec):
        assert len(parse_eio(fixture_paths["eio"].read_text())) == fixture_spec.n_zones

    def test_default_set_yields_35_series_for_5_zones(self, fixture_paths):
        table = parse_output_table(fixture_paths["csv"].read_text())
        assert len(table.series) == 35

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            synth.FixtureSpec(n_zones=0)
        with pytest.raises(ValueError):
            synth.FixtureSpec(resolution=7)
        with pytest.raises(ValueError):
            synth.FixtureSpec(days=0)
        with pytest.raises(ValueError):
            synth.FixtureSpec(days=366, year=2023)


class TestReferenceValues:
    def test_values_match_parsed_file_bit_for_bit(self, fixture_paths, reference):
        table = parse_output_table(fixture_paths["csv"].read_text())
        assert len(table.series) == len(reference.series)
        for parsed, (header, descriptor, values) in zip(table.series, reference.series):
            assert parsed.header == header
            assert parsed.descriptor == descriptor
            np.testing.assert_array_equal(parsed.values, values)

    def test_zone_count_matches_spec(self, reference, fixture_spec):
        assert len(reference.geometry) == fixture_spec.n_zones

    def test_timestamps_uniform_at_resolution(self, reference, fixture_spec):
        deltas = {
            (b - a).total_seconds() for a, b in zip(reference.timestamps, reference.timestamps[1:])
        }
        assert deltas == {fixture_spec.resolution * 60.0}

    def test_geometry_positive(self, reference):
        assert all(g.floor_area > 0 and g.volume > 0 for g in reference.geometry)
