"""Weighting methods and dataset aggregation against brute-force oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epworkbench.aggregation import (
    EmptyZoneList,
    KeyMismatch,
    LengthMismatch,
    MissingGeometry,
    UnknownVariable,
    WeightVector,
    aggregate_dataset,
    aggregate_series,
    aggregated_geometry,
    build_weights,
    weights_for_selection,
)
from epworkbench.domain import (
    BUILDING_GROUP,
    AggregationMethod,
    AggregationSpec,
    VariableTable,
    ZoneGeometry,
)
from datetime import datetime, timedelta


def brute_force_mean(per_zone, weights):
    """Independent per-timestep Σ w_i · x_i oracle (pure Python loop)."""
    names = list(per_zone)
    n = len(per_zone[names[0]])
    out = []
    for t in range(n):
        acc = 0.0
        for name in names:
            acc += weights[name] * per_zone[name][t]
        out.append(acc)
    return out


def geom(name, area, volume=None):
    return ZoneGeometry(zone_name=name, floor_area=area, volume=volume or area * 3.0)


class TestBuildWeights:
    def test_simple_two_zones(self):
        w = build_weights([geom("A", 10), geom("B", 30)], AggregationMethod.SIMPLE)
        assert w.weights == {"A": 0.5, "B": 0.5}

    def test_area_weighted_hand_oracle(self):
        # areas {10, 30}: w = A_i / ΣA = {0.25, 0.75}
        w = build_weights([geom("A", 10), geom("B", 30)], AggregationMethod.AREA_WEIGHTED)
        assert w.weights == pytest.approx({"A": 0.25, "B": 0.75})

    def test_volume_weighted_hand_oracle(self):
        # volumes {100, 100, 200}: w = V_i / ΣV = {0.25, 0.25, 0.5}
        zones = [geom("A", 1, 100), geom("B", 1, 100), geom("C", 1, 200)]
        w = build_weights(zones, AggregationMethod.VOLUME_WEIGHTED)
        assert w.weights == pytest.approx({"A": 0.25, "B": 0.25, "C": 0.5})

    def test_empty_zone_list(self):
        with pytest.raises(EmptyZoneList):
            build_weights([], AggregationMethod.SIMPLE)

    def test_weights_sum_to_one(self):
        zones = [geom(f"Z{i}", 7.3 * i + 1) for i in range(9)]
        for method in AggregationMethod:
            total = sum(build_weights(zones, method).weights.values())
            assert total == pytest.approx(1.0, abs=1e-12)


class TestAggregateSeries:
    def test_single_zone_identity(self):
        values = np.array([1.5, -2.25, 7.0])
        out = aggregate_series({"A": values}, WeightVector({"A": 1.0}))
        np.testing.assert_array_equal(out, values)

    def test_two_zone_hand_oracle(self):
        per_zone = {"A": np.array([20.0, 20.0]), "B": np.array([24.0, 24.0])}
        out = aggregate_series(per_zone, WeightVector({"A": 0.25, "B": 0.75}))
        np.testing.assert_allclose(out, [23.0, 23.0])

    def test_constant_zones_stay_constant(self):
        per_zone = {"A": np.full(5, 3.25), "B": np.full(5, 3.25), "C": np.full(5, 3.25)}
        out = aggregate_series(per_zone, WeightVector({"A": 0.2, "B": 0.5, "C": 0.3}))
        np.testing.assert_allclose(out, np.full(5, 3.25), rtol=1e-12)

    def test_key_mismatch(self):
        with pytest.raises(KeyMismatch):
            aggregate_series({"A": np.zeros(2)}, WeightVector({"A": 0.5, "B": 0.5}))

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            aggregate_series(
                {"A": np.zeros(2), "B": np.zeros(3)}, WeightVector({"A": 0.5, "B": 0.5})
            )

    def test_case_insensitive_key_matching(self):
        out = aggregate_series({"core_zn": np.array([2.0])}, WeightVector({"CORE_ZN": 1.0}))
        np.testing.assert_array_equal(out, [2.0])

    def test_nan_propagates_without_renormalization(self):
        per_zone = {"A": np.array([1.0, np.nan]), "B": np.array([3.0, 3.0])}
        out = aggregate_series(per_zone, WeightVector({"A": 0.5, "B": 0.5}))
        assert out[0] == 2.0
        assert np.isnan(out[1])


instances = st.integers(min_value=1, max_value=5).flatmap(
    lambda n_zones: st.tuples(
        st.just(n_zones),
        st.integers(min_value=1, max_value=100),
        st.lists(
            st.floats(min_value=0.1, max_value=1000.0), min_size=2 * n_zones, max_size=2 * n_zones
        ),
        st.sampled_from(list(AggregationMethod)),
        st.randoms(use_true_random=False),
    )
)


@given(instances)
@settings(max_examples=120, deadline=None)
def test_oracle_equivalence_random_instances(instance):
    n_zones, steps, dims, method, rng = instance
    zones = [geom(f"Z{i}", dims[2 * i], dims[2 * i + 1]) for i in range(n_zones)]
    per_zone = {
        z.zone_name: np.array([rng.uniform(-50, 50) for _ in range(steps)]) for z in zones
    }
    weights = build_weights(zones, method)
    out = aggregate_series(per_zone, weights)

    expected = brute_force_mean(per_zone, weights.weights)
    np.testing.assert_allclose(out, expected, rtol=1e-9)

    # convexity (tiny slop for float rounding in the dot product)
    stack = np.vstack(list(per_zone.values()))
    lo, hi = stack.min(axis=0), stack.max(axis=0)
    span = np.maximum(np.abs(lo), np.abs(hi)) + 1.0
    assert np.all(out >= lo - 1e-12 * span)
    assert np.all(out <= hi + 1e-12 * span)

    # permutation invariance
    shuffled = dict(reversed(list(per_zone.items())))
    np.testing.assert_array_equal(out, aggregate_series(shuffled, weights))

    # scaling equivariance
    scaled = {k: 3.0 * v for k, v in per_zone.items()}
    np.testing.assert_allclose(aggregate_series(scaled, weights), 3.0 * out, rtol=1e-12)


class TestWeightsForSelection:
    def test_case_folded_resolution(self):
        w = weights_for_selection(AggregationMethod.SIMPLE, [geom("CORE_ZN", 10)], ["core_zn"])
        assert w.weights == {"CORE_ZN": 1.0}

    def test_missing_geometry_for_weighted_method(self):
        with pytest.raises(MissingGeometry):
            weights_for_selection(AggregationMethod.AREA_WEIGHTED, [geom("A", 10)], ["A", "B"])

    def test_simple_without_geometry(self):
        w = weights_for_selection(AggregationMethod.SIMPLE, [], ["A", "B", "C", "D", "E"])
        assert all(v == pytest.approx(0.2) for v in w.weights.values())
        assert len(w.weights) == 5


def make_tables(zone_values: dict, n=4):
    base = datetime(2023, 1, 1)
    stamps = tuple(base + timedelta(minutes=5 * i) for i in range(n))
    return {
        "Zone Mean Air Temperature": VariableTable(
            timestamps=stamps, columns={z: np.array(v, dtype=float) for z, v in zone_values.items()}
        ),
        "Site Outdoor Air Drybulb Temperature": VariableTable(
            timestamps=stamps, columns={"Site Outdoor Air Drybulb Temperature": np.arange(n) * 1.0}
        ),
    }


class TestAggregateDataset:
    def test_five_zones_reduce_to_single_column(self):
        zones = {f"Z{i}": [float(i)] * 4 for i in range(5)}
        tables = make_tables(zones)
        geometry = [geom(f"Z{i}", 10.0 * (i + 1)) for i in range(5)]
        spec = AggregationSpec(
            method=AggregationMethod.AREA_WEIGHTED, groups=(("Agg1", tuple(zones)),)
        )
        out = aggregate_dataset(tables, geometry, spec, list(tables))
        assert set(out) == {"Agg1", BUILDING_GROUP}
        agg_table = out["Agg1"]["Zone Mean Air Temperature"]
        assert list(agg_table.columns) == ["Agg1"]
        # Σ i·10(i+1) / Σ 10(i+1) = 400/150
        np.testing.assert_allclose(agg_table.columns["Agg1"], np.full(4, 400.0 / 150.0))

    def test_two_disjoint_groups(self):
        zones = {f"Z{i}": [1.0 * i] * 4 for i in range(4)}
        tables = make_tables(zones)
        spec = AggregationSpec(
            method=AggregationMethod.SIMPLE,
            groups=(("A", ("Z0", "Z1")), ("B", ("Z2", "Z3"))),
        )
        out = aggregate_dataset(tables, [], spec, ["Zone Mean Air Temperature"])
        assert set(out) == {"A", "B"}
        np.testing.assert_allclose(out["A"]["Zone Mean Air Temperature"].columns["A"], 0.5)
        np.testing.assert_allclose(out["B"]["Zone Mean Air Temperature"].columns["B"], 2.5)

    def test_equal_geometry_matches_simple(self):
        rng = np.random.default_rng(11)
        zones = {f"Z{i}": rng.normal(20, 3, 6).tolist() for i in range(3)}
        tables = {
            "Zone Mean Air Temperature": VariableTable(
                timestamps=tuple(
                    datetime(2023, 1, 1) + timedelta(minutes=5 * i) for i in range(6)
                ),
                columns={z: np.array(v) for z, v in zones.items()},
            )
        }
        geometry = [geom(z, 55.5, 160.0) for z in zones]
        groups = (("Agg", tuple(zones)),)
        out_area = aggregate_dataset(
            tables, geometry, AggregationSpec(AggregationMethod.AREA_WEIGHTED, groups), list(tables)
        )
        out_simple = aggregate_dataset(
            tables, geometry, AggregationSpec(AggregationMethod.SIMPLE, groups), list(tables)
        )
        np.testing.assert_allclose(
            out_area["Agg"]["Zone Mean Air Temperature"].columns["Agg"],
            out_simple["Agg"]["Zone Mean Air Temperature"].columns["Agg"],
            atol=1e-12,
        )

    def test_non_zone_variables_pass_through(self):
        tables = make_tables({"Z0": [1.0] * 4})
        spec = AggregationSpec(AggregationMethod.SIMPLE, (("Agg", ("Z0",)),))
        out = aggregate_dataset(tables, [], spec, list(tables))
        passthrough = out[BUILDING_GROUP]["Site Outdoor Air Drybulb Temperature"]
        assert passthrough is tables["Site Outdoor Air Drybulb Temperature"]

    def test_unknown_variable_in_selection(self):
        with pytest.raises(UnknownVariable):
            aggregate_dataset(
                make_tables({"Z0": [1.0] * 4}),
                [],
                AggregationSpec(AggregationMethod.SIMPLE, (("A", ("Z0",)),)),
                ["Nope"],
            )

    def test_sum_override(self):
        zones = {"Z0": [1.0] * 4, "Z1": [2.0] * 4}
        tables = make_tables(zones)
        spec = AggregationSpec(AggregationMethod.SIMPLE, (("Agg", ("Z0", "Z1")),))
        out = aggregate_dataset(
            tables, [], spec, ["Zone Mean Air Temperature"],
            sum_variables=["Zone Mean Air Temperature"],
        )
        np.testing.assert_allclose(out["Agg"]["Zone Mean Air Temperature"].columns["Agg"], 3.0)


class TestAggregatedGeometry:
    def test_sums_over_composites(self):
        spec = AggregationSpec(AggregationMethod.SIMPLE, (("Agg", ("A", "B")),))
        out = aggregated_geometry([geom("A", 10, 30), geom("B", 20, 50)], spec)
        assert out["Agg"].floor_area == 30
        assert out["Agg"].volume == 80

    def test_missing_composite_geometry_yields_none(self):
        spec = AggregationSpec(AggregationMethod.SIMPLE, (("Agg", ("A", "B")),))
        assert aggregated_geometry([geom("A", 10)], spec) == {"Agg": None}
