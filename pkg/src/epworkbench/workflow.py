"""End-to-end workflows tying parsers, aggregation and the store together.

``ingest_files`` turns one simulation's artifacts (IDF + optional EIO +
tabular output) into store rows; ``aggregate_simulation`` applies an
aggregation spec to a stored simulation and registers the aggregated
zones and series so they are queryable like any other variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from epworkbench import aggregation as agg
from epworkbench.domain import (
    BUILDING_GROUP,
    AggregationSpec,
    BuildingRecord,
    SampleTriple,
    SeriesDescriptor,
    SeriesKind,
    SimulationRecord,
    ValidationIssue,
    VariableTable,
    validate_aggregation_spec,
    validate_simulation,
    zone_key,
)
from epworkbench.parsers import (
    RawOutputTable,
    parse_eio,
    parse_idf,
    parse_output_datetime,
    parse_output_table,
)
from epworkbench.store import DEFAULT_BATCH_SIZE, EnergyStore


class WorkflowError(Exception):
    pass


class ValidationFailed(WorkflowError):
    def __init__(self, issues: Sequence[ValidationIssue]):
        super().__init__("; ".join(str(i) for i in issues))
        self.issues = tuple(issues)


class DuplicateSimulation(WorkflowError):
    def __init__(self, simulation_id: int):
        super().__init__(
            f"simulation {simulation_id} already holds samples for these inputs; "
            f"re-ingestion would duplicate them"
        )
        self.simulation_id = simulation_id


@dataclass(frozen=True)
class IngestResult:
    simulation_id: int
    building_id: int
    series_count: int
    step_count: int
    inserted: int
    skipped_nonfinite: int
    zone_ids: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class AggregateResult:
    simulation_id: int
    aggregated_zone_ids: dict[str, int]
    variable_ids: dict[str, dict[str, int]]
    inserted: int


def _instants(table: RawOutputTable, year: int) -> list[datetime]:
    return [parse_output_datetime(stamp, year) for stamp in table.datetime_column]


def ingest_files(
    store: EnergyStore,
    idf_path,
    output_path,
    building: BuildingRecord,
    weather_file_location: str,
    eio_path=None,
    schedule_name: str | None = None,
    year: int = 2023,
    prototype_attributes: Mapping[str, str] | None = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> IngestResult:
    """Parse one simulation's files and load everything into the store.

    Non-finite sample values are dropped (and counted) rather than stored.
    Raises :class:`DuplicateSimulation` when the same natural key already
    holds samples, so re-running an ingestion cannot silently grow the
    fact table.
    """
    idf = parse_idf(Path(idf_path).read_text())
    geometry = parse_eio(Path(eio_path).read_text()) if eio_path else []
    table = parse_output_table(Path(output_path).read_text())
    instants = _instants(table, year)

    record = SimulationRecord(
        building_id=0,  # placeholder until the building row exists
        weather_file_location=weather_file_location,
        time_resolution=idf.time_resolution,
        schedule_name=schedule_name if schedule_name is not None else (idf.schedule_names[0] if idf.schedule_names else ""),
    )
    checked = validate_simulation(record)
    if isinstance(checked, list):
        raise ValidationFailed(checked)

    building_id = store.upsert_building(building, prototype_attributes)
    record = SimulationRecord(
        building_id=building_id,
        weather_file_location=record.weather_file_location,
        time_resolution=record.time_resolution,
        schedule_name=record.schedule_name,
    )

    known = {zone_key(g.zone_name) for g in geometry}
    entries: list = list(geometry)
    for name in idf.zones:
        if zone_key(name) not in known:
            entries.append(name)
            known.add(zone_key(name))
    for series in table.series:
        descriptor = series.descriptor
        if descriptor.kind is SeriesKind.ZONE and zone_key(descriptor.entity) not in known:
            entries.append(descriptor.entity)
            known.add(zone_key(descriptor.entity))
    zone_ids = store.register_zones(entries, building_id)

    simulation_id = store.upsert_simulation(record)
    if store.sample_count(simulation_id) > 0:
        raise DuplicateSimulation(simulation_id)

    dt_ids = store.intern_datetimes(instants)
    var_ids = store.register_variables([s.descriptor for s in table.series], zone_ids)

    skipped = 0

    def triples() -> Iterator[SampleTriple]:
        nonlocal skipped
        for series in table.series:
            vid = var_ids[series.descriptor]
            for instant, value in zip(instants, series.values):
                v = float(value)
                if not math.isfinite(v):
                    skipped += 1
                    continue
                yield SampleTriple(
                    simulation_id=simulation_id,
                    variable_id=vid,
                    datetime_id=dt_ids[instant],
                    value=v,
                )

    inserted = store.bulk_insert_samples(triples(), batch_size=batch_size)
    return IngestResult(
        simulation_id=simulation_id,
        building_id=building_id,
        series_count=len(table.series),
        step_count=len(instants),
        inserted=inserted,
        skipped_nonfinite=skipped,
        zone_ids=zone_ids,
    )


def load_variable_tables(
    store: EnergyStore, simulation_id: int, names: Iterable[str] | None = None
) -> dict[str, VariableTable]:
    """Reassemble per-variable tables (entity columns side by side) for a simulation."""
    wanted = {n for n in names} if names is not None else None
    grouped: dict[str, dict[str, object]] = {}
    timestamps: dict[str, tuple] = {}
    for vid, descriptor in store.list_variables(simulation_id):
        if store.is_aggregated_variable(vid):
            continue
        name = descriptor.variable_name
        if wanted is not None and name not in wanted:
            continue
        table = store.query_series(simulation_id, [vid])[vid]
        [(label, values)] = table.columns.items()
        grouped.setdefault(name, {})[label] = values
        timestamps.setdefault(name, table.timestamps)
    return {
        name: VariableTable(timestamps=timestamps[name], columns=cols)
        for name, cols in grouped.items()
    }


def aggregate_simulation(
    store: EnergyStore,
    simulation_id: int,
    spec: AggregationSpec,
    variable_selection: Sequence[str] | None = None,
    sum_variables: Sequence[str] = (),
) -> AggregateResult:
    """Aggregate a stored simulation's zone series and store the results.

    Aggregated zones are registered (geometry as composite sums), the
    aggregated↔composite mapping rows written, and the new series
    inserted under the same simulation and calendar.  Non-zone variables
    in the selection pass through under ``__building__`` without
    re-insertion (their originals are already stored).
    """
    sim = store.get_simulation(simulation_id)
    tables = load_variable_tables(store, simulation_id)
    if not tables:
        raise WorkflowError(f"simulation {simulation_id} has no stored series")
    selection = list(variable_selection) if variable_selection is not None else sorted(tables)

    zone_names = set()
    for name, table in tables.items():
        if agg.classify_variable(name) is SeriesKind.ZONE:
            zone_names.update(table.columns)
    checked = validate_aggregation_spec(spec, zone_names or {""})
    if isinstance(checked, list):
        raise ValidationFailed(checked)

    geometry_map = store.zone_geometry(sim.building_id)
    geometry = [g for g in geometry_map.values() if g is not None]

    dataset = agg.aggregate_dataset(tables, geometry, spec, selection, sum_variables)

    zone_ids = store.zone_ids(sim.building_id)
    agg_geometry = agg.aggregated_geometry(geometry, spec)
    agg_zone_ids = store.register_aggregation(spec, zone_ids, agg_geometry, sim.building_id)

    units = {
        d.variable_name: (d.unit, d.frequency) for _, d in store.list_variables(simulation_id)
    }
    descriptors: dict[tuple[str, str], SeriesDescriptor] = {}
    for group_name, variables in dataset.items():
        if group_name == BUILDING_GROUP:
            continue
        for var_name in variables:
            unit, frequency = units.get(var_name, ("", ""))
            descriptors[(group_name, var_name)] = SeriesDescriptor(
                variable_name=var_name,
                kind=SeriesKind.ZONE,
                entity=group_name,
                unit=unit,
                frequency=frequency,
            )
    agg_zone_key_ids = {zone_key(name): zid for name, zid in agg_zone_ids.items()}
    var_ids = store.register_variables(list(descriptors.values()), agg_zone_key_ids)

    variable_ids: dict[str, dict[str, int]] = {}
    inserted = 0
    if descriptors:
        any_table = next(iter(next(iter(dataset.values())).values()))
        dt_ids = store.intern_datetimes(list(any_table.timestamps))

        def triples() -> Iterator[SampleTriple]:
            for (group_name, var_name), descriptor in descriptors.items():
                vid = var_ids[descriptor]
                variable_ids.setdefault(group_name, {})[var_name] = vid
                table = dataset[group_name][var_name]
                [(_, values)] = table.columns.items()
                for instant, value in zip(table.timestamps, values):
                    v = float(value)
                    if not math.isfinite(v):
                        continue
                    yield SampleTriple(
                        simulation_id=simulation_id,
                        variable_id=vid,
                        datetime_id=dt_ids[instant],
                        value=v,
                    )

        inserted = store.bulk_insert_samples(triples())
    for group_name, variables in dataset.items():
        if group_name == BUILDING_GROUP:
            variable_ids.setdefault(BUILDING_GROUP, {})
    return AggregateResult(
        simulation_id=simulation_id,
        aggregated_zone_ids=agg_zone_ids,
        variable_ids=variable_ids,
        inserted=inserted,
    )
