"""Domain types: construction invariants and the validate_* operations."""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from epworkbench.domain import (
    DUPLICATE_AGGREGATED_NAME,
    EMPTY_GROUP,
    INVALID_RESOLUTION,
    MISSING_WEATHER_FILE,
    UNKNOWN_ZONE,
    AggregationMethod,
    AggregationSpec,
    BuildingRecord,
    PrototypeKind,
    SampleTriple,
    SeriesDescriptor,
    SeriesKind,
    SimulationRecord,
    ValidationIssue,
    VariableTable,
    ZoneGeometry,
    validate_aggregation_spec,
    validate_simulation,
    zone_key,
)
from datetime import datetime, timedelta


def sim(resolution=5, weather="seattle.epw"):
    return SimulationRecord(
        building_id=1, weather_file_location=weather, time_resolution=resolution
    )


class TestValidateSimulation:
    def test_five_minute_resolution_is_valid(self):
        record = sim(resolution=5)
        assert validate_simulation(record) is record

    def test_non_divisor_resolution(self):
        issues = validate_simulation(sim(resolution=7))
        assert [i.code for i in issues] == [INVALID_RESOLUTION]

    def test_empty_weather_path(self):
        issues = validate_simulation(sim(resolution=60, weather=""))
        assert [i.code for i in issues] == [MISSING_WEATHER_FILE]

    def test_multiple_violations_all_reported(self):
        issues = validate_simulation(sim(resolution=13, weather="  "))
        assert {i.code for i in issues} == {INVALID_RESOLUTION, MISSING_WEATHER_FILE}

    @pytest.mark.parametrize("resolution", [1, 2, 3, 4, 5, 6, 10, 12, 15, 20, 30, 60])
    def test_all_divisors_accepted(self, resolution):
        assert validate_simulation(sim(resolution=resolution)) == sim(resolution=resolution)

    def test_pure_same_input_same_output(self):
        record = sim(resolution=7)
        assert validate_simulation(record) == validate_simulation(record)


FIVE_ZONES = {"Core_ZN", "Perimeter_ZN_1", "Perimeter_ZN_2", "Perimeter_ZN_3", "Perimeter_ZN_4"}


class TestValidateAggregationSpec:
    def test_single_group_over_all_zones(self):
        spec = AggregationSpec(
            method=AggregationMethod.SIMPLE, groups=(("Agg1", tuple(sorted(FIVE_ZONES))),)
        )
        assert validate_aggregation_spec(spec, FIVE_ZONES) is spec

    def test_unknown_zone(self):
        spec = AggregationSpec(method=AggregationMethod.SIMPLE, groups=(("A", ("Z9",)),))
        issues = validate_aggregation_spec(spec, {"Z1"})
        assert [i.code for i in issues] == [UNKNOWN_ZONE]
        assert "Z9" in issues[0].message

    def test_duplicate_aggregated_name(self):
        spec = AggregationSpec(
            method=AggregationMethod.SIMPLE, groups=(("A", ("Z1",)), ("A", ("Z1",)))
        )
        with pytest.warns(UserWarning):  # shared composite also warns
            issues = validate_aggregation_spec(spec, {"Z1"})
        assert DUPLICATE_AGGREGATED_NAME in {i.code for i in issues}

    def test_empty_group(self):
        spec = AggregationSpec(method=AggregationMethod.SIMPLE, groups=(("A", ()),))
        issues = validate_aggregation_spec(spec, {"Z1"})
        assert [i.code for i in issues] == [EMPTY_GROUP]

    def test_case_insensitive_zone_match(self):
        spec = AggregationSpec(method=AggregationMethod.SIMPLE, groups=(("A", ("core_zn ",)),))
        assert validate_aggregation_spec(spec, {"CORE_ZN"}) is spec

    def test_overlapping_composites_warn_but_pass(self):
        spec = AggregationSpec(
            method=AggregationMethod.SIMPLE, groups=(("A", ("Z1",)), ("B", ("Z1",)))
        )
        with pytest.warns(UserWarning, match="multiple aggregated zones"):
            assert validate_aggregation_spec(spec, {"Z1"}) is spec


class TestSampleTriple:
    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), float("-inf")])
    def test_nonfinite_value_rejected(self, bad):
        with pytest.raises(ValueError, match="finite"):
            SampleTriple(simulation_id=1, variable_id=1, datetime_id=1, value=bad)

    @given(st.floats(allow_nan=False, allow_infinity=False))
    def test_any_finite_value_accepted(self, value):
        triple = SampleTriple(simulation_id=1, variable_id=1, datetime_id=1, value=value)
        assert math.isfinite(triple.value)

    def test_nonpositive_ids_rejected(self):
        with pytest.raises(ValueError):
            SampleTriple(simulation_id=0, variable_id=1, datetime_id=1, value=0.0)


class TestTypes:
    def test_series_descriptor_site_forbids_entity(self):
        with pytest.raises(ValueError):
            SeriesDescriptor("Site Outdoor Air Drybulb Temperature", SeriesKind.SITE, entity="X")

    def test_series_descriptor_zone_requires_entity(self):
        with pytest.raises(ValueError):
            SeriesDescriptor("Zone Mean Air Temperature", SeriesKind.ZONE)

    def test_zone_geometry_positive(self):
        with pytest.raises(ValueError):
            ZoneGeometry("Z", floor_area=0.0, volume=10.0)
        with pytest.raises(ValueError):
            ZoneGeometry("Z", floor_area=10.0, volume=-1.0)

    def test_building_record_needs_name(self):
        with pytest.raises(ValueError):
            BuildingRecord(PrototypeKind.COMMERCIAL, "", "ASHRAE 2013", "5B")

    def test_variable_table_alignment(self):
        base = datetime(2023, 1, 1)
        stamps = [base + timedelta(minutes=5 * i) for i in range(3)]
        with pytest.raises(ValueError, match="length"):
            VariableTable(timestamps=stamps, columns={"A": [1.0, 2.0]})

    def test_variable_table_monotone_timestamps(self):
        base = datetime(2023, 1, 1)
        with pytest.raises(ValueError, match="increasing"):
            VariableTable(timestamps=(base, base), columns={})

    def test_zone_key_normalization(self):
        assert zone_key("  core_zn ") == "CORE_ZN"

    def test_validation_issue_str(self):
        issue = ValidationIssue("Code", "message")
        assert str(issue) == "Code: message"
