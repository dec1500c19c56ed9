"""Normalized relational store for simulation time series.

The schema follows the star-style layout: dimension tables for
buildings, prototypes, simulations, variables, zones and datetimes, a
fact table ``timeseries`` referencing simulations, variables and
datetimes by integer surrogate keys, and linking tables for the
many-to-many relationships (building↔zone, building↔prototype,
aggregated↔composite zones).

Physical layout of the fact table: each row covers a *run* of
consecutive datetime ids for one (simulation, variable), with the run's
values packed little-endian float64 in a single blob.  The logical
content is unchanged — three foreign keys plus values, with the
composite primary key on (simulation_id, variable_id, datetime_id) —
but clustering consecutive samples cuts per-sample key and b-tree
overhead from ~12 bytes to well under one, which is where the storage
advantage over nested textual exports comes from.  All operations
(duplicate detection, range queries, integrity checks) treat the table
as if it held one row per sample.

Concurrency: one writer at a time; a single connection guarded by a
reentrant lock serializes all operations, so readers never observe a
partially inserted batch.
"""

from __future__ import annotations

import json
import re
import sqlite3
import struct
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from epworkbench.domain import (
    AggregationSpec,
    BuildingRecord,
    PrototypeKind,
    SampleTriple,
    SeriesDescriptor,
    SeriesKind,
    SimulationRecord,
    VariableTable,
    ZoneGeometry,
    validate_simulation,
    zone_key,
)

DEFAULT_BATCH_SIZE = 10_000

_EPOCH = datetime(1970, 1, 1)


def to_epoch(instant: datetime) -> int:
    return int((instant - _EPOCH).total_seconds())


def from_epoch(seconds: int) -> datetime:
    return _EPOCH + timedelta(seconds=seconds)


class StoreError(Exception):
    """Base class for store failures."""


class StorageUnavailable(StoreError):
    pass


class ConstraintViolation(StoreError):
    pass


class UnknownBuilding(StoreError):
    def __init__(self, building_id: int):
        super().__init__(f"building {building_id} does not exist")
        self.building_id = building_id


class UnknownSimulation(StoreError):
    def __init__(self, simulation_id: int):
        super().__init__(f"simulation {simulation_id} does not exist")
        self.simulation_id = simulation_id


class UnknownVariable(StoreError):
    def __init__(self, variable_id: int):
        super().__init__(f"variable {variable_id} does not exist")
        self.variable_id = variable_id


class UnknownZone(StoreError):
    def __init__(self, name: str):
        super().__init__(f"zone {name!r} cannot be resolved")
        self.name = name


class UnknownZoneEntity(StoreError):
    def __init__(self, name: str):
        super().__init__(f"zone-kind series references unknown zone {name!r}")
        self.name = name


class NonMonotonicInput(StoreError):
    def __init__(self) -> None:
        super().__init__("timestamps must be strictly increasing")


class DuplicateTriple(StoreError):
    def __init__(self, triple: SampleTriple, inserted_before_failure: int):
        super().__init__(
            f"duplicate sample (sim={triple.simulation_id}, var={triple.variable_id}, "
            f"dt={triple.datetime_id}); {inserted_before_failure} rows from earlier "
            f"batches remain committed"
        )
        self.triple = triple
        self.inserted_before_failure = inserted_before_failure


class ForeignKeyViolation(StoreError):
    def __init__(self, detail: str, inserted_before_failure: int = 0):
        super().__init__(detail)
        self.inserted_before_failure = inserted_before_failure


@dataclass(frozen=True)
class TableStats:
    rows: int
    bytes: int


@dataclass(frozen=True)
class StorageReport:
    """Measured store footprint vs. the equivalent naive nested export."""

    tables: dict[str, TableStats]
    total_bytes: int
    sample_rows: int
    naive_bytes: int
    reduction_factor: float


_SCHEMA = """
CREATE TABLE IF NOT EXISTS buildings (
    building_id     INTEGER PRIMARY KEY,
    prototype_kind  TEXT NOT NULL CHECK (prototype_kind IN ('commercial','residential','manufactured')),
    energy_standard TEXT NOT NULL,
    climate_zone    TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS commercial_prototypes (
    prototype_id INTEGER PRIMARY KEY,
    name         TEXT NOT NULL UNIQUE,
    attributes   TEXT NOT NULL DEFAULT '{}'
);
CREATE TABLE IF NOT EXISTS residential_prototypes (
    prototype_id INTEGER PRIMARY KEY,
    name         TEXT NOT NULL UNIQUE,
    attributes   TEXT NOT NULL DEFAULT '{}'
);
CREATE TABLE IF NOT EXISTS manufactured_prototypes (
    prototype_id INTEGER PRIMARY KEY,
    name         TEXT NOT NULL UNIQUE,
    attributes   TEXT NOT NULL DEFAULT '{}'
);
CREATE TABLE IF NOT EXISTS commercial_prototype_links (
    building_id  INTEGER NOT NULL REFERENCES buildings(building_id),
    prototype_id INTEGER NOT NULL REFERENCES commercial_prototypes(prototype_id),
    PRIMARY KEY (building_id, prototype_id)
);
CREATE TABLE IF NOT EXISTS residential_prototype_links (
    building_id  INTEGER NOT NULL REFERENCES buildings(building_id),
    prototype_id INTEGER NOT NULL REFERENCES residential_prototypes(prototype_id),
    PRIMARY KEY (building_id, prototype_id)
);
CREATE TABLE IF NOT EXISTS manufactured_prototype_links (
    building_id  INTEGER NOT NULL REFERENCES buildings(building_id),
    prototype_id INTEGER NOT NULL REFERENCES manufactured_prototypes(prototype_id),
    PRIMARY KEY (building_id, prototype_id)
);
CREATE TABLE IF NOT EXISTS simulations (
    simulation_id         INTEGER PRIMARY KEY,
    building_id           INTEGER NOT NULL REFERENCES buildings(building_id),
    weather_file_location TEXT NOT NULL,
    time_resolution       INTEGER NOT NULL,
    schedule_name         TEXT NOT NULL DEFAULT '',
    UNIQUE (building_id, weather_file_location, time_resolution, schedule_name)
);
CREATE TABLE IF NOT EXISTS zones (
    zone_id       INTEGER PRIMARY KEY,
    zone_name     TEXT NOT NULL COLLATE NOCASE,
    floor_area    REAL,
    volume        REAL,
    is_aggregated INTEGER NOT NULL DEFAULT 0 CHECK (is_aggregated IN (0,1))
);
CREATE INDEX IF NOT EXISTS idx_zones_name ON zones(zone_name);
CREATE TABLE IF NOT EXISTS building_zones (
    building_id INTEGER NOT NULL REFERENCES buildings(building_id),
    zone_id     INTEGER NOT NULL REFERENCES zones(zone_id),
    PRIMARY KEY (building_id, zone_id)
);
CREATE TABLE IF NOT EXISTS variables (
    variable_id      INTEGER PRIMARY KEY,
    variable_name    TEXT NOT NULL,
    variable_kind    TEXT NOT NULL CHECK (variable_kind IN ('zone','surface','node','schedule','site')),
    entity_qualifier TEXT NOT NULL DEFAULT '',
    zone_id          INTEGER REFERENCES zones(zone_id),
    unit             TEXT NOT NULL DEFAULT '',
    frequency        TEXT NOT NULL DEFAULT '',
    UNIQUE (variable_name, variable_kind, entity_qualifier)
);
CREATE TABLE IF NOT EXISTS aggregation_zones (
    aggregated_zone_id INTEGER NOT NULL REFERENCES zones(zone_id),
    composite_zone_id  INTEGER NOT NULL REFERENCES zones(zone_id),
    method             TEXT NOT NULL CHECK (method IN ('simple','area_weighted','volume_weighted')),
    PRIMARY KEY (aggregated_zone_id, composite_zone_id)
);
CREATE TABLE IF NOT EXISTS datetimes (
    datetime_id INTEGER PRIMARY KEY,
    timestamp   INTEGER NOT NULL UNIQUE
);
CREATE TABLE IF NOT EXISTS timeseries (
    simulation_id INTEGER NOT NULL REFERENCES simulations(simulation_id),
    variable_id   INTEGER NOT NULL REFERENCES variables(variable_id),
    datetime_id   INTEGER NOT NULL REFERENCES datetimes(datetime_id),
    value_count   INTEGER NOT NULL CHECK (value_count >= 1),
    "values"      BLOB NOT NULL,
    PRIMARY KEY (simulation_id, variable_id, datetime_id)
) WITHOUT ROWID;
"""

TABLE_NAMES = (
    "buildings",
    "commercial_prototypes",
    "residential_prototypes",
    "manufactured_prototypes",
    "commercial_prototype_links",
    "residential_prototype_links",
    "manufactured_prototype_links",
    "simulations",
    "zones",
    "building_zones",
    "variables",
    "aggregation_zones",
    "datetimes",
    "timeseries",
)

_PROTOTYPE_TABLE = {
    PrototypeKind.COMMERCIAL: ("commercial_prototypes", "commercial_prototype_links"),
    PrototypeKind.RESIDENTIAL: ("residential_prototypes", "residential_prototype_links"),
    PrototypeKind.MANUFACTURED: ("manufactured_prototypes", "manufactured_prototype_links"),
}


def _sanitize(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name).strip("_") or "unnamed"


class EnergyStore:
    """A single SQLite-backed store.  ``dsn`` is a file path or ``:memory:``."""

    def __init__(self, dsn: str | Path = "epworkbench.db", init: bool = True):
        self.dsn = str(dsn)
        self._lock = threading.RLock()
        try:
            self._con = sqlite3.connect(self.dsn, check_same_thread=False, timeout=30.0)
        except sqlite3.Error as exc:
            raise StorageUnavailable(f"cannot open store at {self.dsn}: {exc}") from exc
        self._con.execute("PRAGMA foreign_keys = ON")
        try:
            self._con.execute("PRAGMA journal_mode = WAL")
        except sqlite3.Error:
            pass  # e.g. :memory: or unsupported filesystem
        if init:
            self.init_schema()

    def close(self) -> None:
        with self._lock:
            self._con.close()

    def __enter__(self) -> "EnergyStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- schema ------------------------------------------------------

    def init_schema(self) -> None:
        """Create all tables and constraints; safe to call repeatedly."""
        with self._lock:
            try:
                with self._con:
                    self._con.executescript(_SCHEMA)
            except sqlite3.Error as exc:
                raise StorageUnavailable(f"cannot initialize schema at {self.dsn}: {exc}") from exc

    def table_names(self) -> list[str]:
        with self._lock:
            rows = self._con.execute(
                "SELECT name FROM sqlite_master WHERE type='table' AND name NOT LIKE 'sqlite_%'"
            ).fetchall()
        return sorted(r[0] for r in rows)

    # -- buildings and prototypes -------------------------------------

    def upsert_building(
        self, record: BuildingRecord, prototype_attributes: Mapping[str, str] | None = None
    ) -> int:
        """Insert prototype, building and linking rows as needed; return the building id.

        The natural key is (prototype kind, prototype name, energy
        standard, climate zone); re-running with the same key returns the
        existing id.  New attributes merge into the prototype's attribute
        map.
        """
        proto_table, link_table = _PROTOTYPE_TABLE[record.prototype_kind]
        attrs = dict(prototype_attributes or {})
        with self._lock, self._con:
            row = self._con.execute(
                f"SELECT prototype_id, attributes FROM {proto_table} WHERE name = ?",
                (record.prototype_name,),
            ).fetchone()
            if row is None:
                cur = self._con.execute(
                    f"INSERT INTO {proto_table} (name, attributes) VALUES (?, ?)",
                    (record.prototype_name, json.dumps(attrs, sort_keys=True)),
                )
                prototype_id = cur.lastrowid
            else:
                prototype_id = row[0]
                if attrs:
                    merged = {**json.loads(row[1]), **attrs}
                    self._con.execute(
                        f"UPDATE {proto_table} SET attributes = ? WHERE prototype_id = ?",
                        (json.dumps(merged, sort_keys=True), prototype_id),
                    )
            found = self._con.execute(
                f"""SELECT b.building_id FROM buildings b
                    JOIN {link_table} l ON l.building_id = b.building_id
                    WHERE l.prototype_id = ? AND b.energy_standard = ? AND b.climate_zone = ?""",
                (prototype_id, record.energy_standard, record.climate_zone),
            ).fetchone()
            if found is not None:
                return int(found[0])
            cur = self._con.execute(
                "INSERT INTO buildings (prototype_kind, energy_standard, climate_zone) VALUES (?, ?, ?)",
                (record.prototype_kind.value, record.energy_standard, record.climate_zone),
            )
            building_id = cur.lastrowid
            self._con.execute(
                f"INSERT INTO {link_table} (building_id, prototype_id) VALUES (?, ?)",
                (building_id, prototype_id),
            )
            return int(building_id)

    def find_building(self, record: BuildingRecord) -> int | None:
        """Id of the building matching the record's natural key, if any."""
        proto_table, link_table = _PROTOTYPE_TABLE[record.prototype_kind]
        with self._lock:
            found = self._con.execute(
                f"""SELECT b.building_id FROM buildings b
                    JOIN {link_table} l ON l.building_id = b.building_id
                    JOIN {proto_table} p ON p.prototype_id = l.prototype_id
                    WHERE p.name = ? AND b.energy_standard = ? AND b.climate_zone = ?""",
                (record.prototype_name, record.energy_standard, record.climate_zone),
            ).fetchone()
        return int(found[0]) if found else None

    def upsert_simulation(self, record: SimulationRecord) -> int:
        """Return the id for a simulation, creating the row if its natural key is new."""
        checked = validate_simulation(record)
        if isinstance(checked, list):
            raise ConstraintViolation("; ".join(str(i) for i in checked))
        with self._lock, self._con:
            if not self._exists("buildings", "building_id", record.building_id):
                raise UnknownBuilding(record.building_id)
            found = self._con.execute(
                """SELECT simulation_id FROM simulations
                   WHERE building_id=? AND weather_file_location=? AND time_resolution=? AND schedule_name=?""",
                (
                    record.building_id,
                    record.weather_file_location,
                    record.time_resolution,
                    record.schedule_name,
                ),
            ).fetchone()
            if found is not None:
                return int(found[0])
            cur = self._con.execute(
                """INSERT INTO simulations (building_id, weather_file_location, time_resolution, schedule_name)
                   VALUES (?, ?, ?, ?)""",
                (
                    record.building_id,
                    record.weather_file_location,
                    record.time_resolution,
                    record.schedule_name,
                ),
            )
            return int(cur.lastrowid)

    def find_simulation(self, record: SimulationRecord) -> int | None:
        """Id of the simulation matching the record's natural key, if any."""
        with self._lock:
            found = self._con.execute(
                """SELECT simulation_id FROM simulations
                   WHERE building_id=? AND weather_file_location=? AND time_resolution=? AND schedule_name=?""",
                (
                    record.building_id,
                    record.weather_file_location,
                    record.time_resolution,
                    record.schedule_name,
                ),
            ).fetchone()
        return int(found[0]) if found else None

    # -- zones ---------------------------------------------------------

    def register_zones(
        self, entries: Iterable[ZoneGeometry | str], building_id: int
    ) -> dict[str, int]:
        """Register zones (with or without geometry) and link them to a building.

        Identical zones — same name and dimensions — reuse one row across
        buildings.  Returns a map from normalized zone name to zone id.
        """
        with self._lock, self._con:
            if not self._exists("buildings", "building_id", building_id):
                raise UnknownBuilding(building_id)
            out: dict[str, int] = {}
            for entry in entries:
                if isinstance(entry, ZoneGeometry):
                    name, area, volume = entry.zone_name, entry.floor_area, entry.volume
                else:
                    name, area, volume = str(entry), None, None
                zone_id = self._upsert_zone(name.strip(), area, volume, aggregated=False)
                self._con.execute(
                    "INSERT OR IGNORE INTO building_zones (building_id, zone_id) VALUES (?, ?)",
                    (building_id, zone_id),
                )
                out[zone_key(name)] = zone_id
            return out

    def _upsert_zone(self, name: str, area, volume, aggregated: bool) -> int:
        row = self._con.execute(
            """SELECT zone_id FROM zones
               WHERE zone_name = ? AND floor_area IS ? AND volume IS ? AND is_aggregated = ?""",
            (name, area, volume, int(aggregated)),
        ).fetchone()
        if row is not None:
            return int(row[0])
        cur = self._con.execute(
            "INSERT INTO zones (zone_name, floor_area, volume, is_aggregated) VALUES (?, ?, ?, ?)",
            (name, area, volume, int(aggregated)),
        )
        return int(cur.lastrowid)

    def zone_ids(self, building_id: int) -> dict[str, int]:
        """Normalized zone name → zone id for a building's non-aggregated zones."""
        with self._lock:
            rows = self._con.execute(
                """SELECT z.zone_name, z.zone_id FROM zones z
                   JOIN building_zones bz ON bz.zone_id = z.zone_id
                   WHERE bz.building_id = ? AND z.is_aggregated = 0""",
                (building_id,),
            ).fetchall()
        return {zone_key(name): int(zid) for name, zid in rows}

    def zone_geometry(self, building_id: int) -> dict[str, ZoneGeometry | None]:
        """Geometry per (non-aggregated) zone of a building; None when unknown."""
        with self._lock:
            rows = self._con.execute(
                """SELECT z.zone_name, z.floor_area, z.volume FROM zones z
                   JOIN building_zones bz ON bz.zone_id = z.zone_id
                   WHERE bz.building_id = ? AND z.is_aggregated = 0
                   ORDER BY z.zone_id""",
                (building_id,),
            ).fetchall()
        out: dict[str, ZoneGeometry | None] = {}
        for name, area, volume in rows:
            if area is not None and volume is not None and area > 0 and volume > 0:
                out[name] = ZoneGeometry(zone_name=name, floor_area=area, volume=volume)
            else:
                out[name] = None
        return out

    # -- variables -----------------------------------------------------

    def register_variables(
        self,
        descriptors: Sequence[SeriesDescriptor],
        zone_ids: Mapping[str, int] | None = None,
    ) -> dict[SeriesDescriptor, int]:
        """One variables row per distinct (name, kind, entity); idempotent.

        Zone-kind descriptors must resolve their entity to a zone row —
        via ``zone_ids`` (normalized name → id, as returned by
        :meth:`register_zones`) or by global zone-name lookup.
        """
        out: dict[SeriesDescriptor, int] = {}
        with self._lock, self._con:
            for descriptor in descriptors:
                entity = descriptor.entity or ""
                zone_id = None
                if descriptor.kind is SeriesKind.ZONE:
                    zone_id = (zone_ids or {}).get(zone_key(entity))
                    if zone_id is None:
                        row = self._con.execute(
                            "SELECT zone_id FROM zones WHERE zone_name = ? ORDER BY zone_id LIMIT 1",
                            (entity.strip(),),
                        ).fetchone()
                        if row is None:
                            raise UnknownZoneEntity(entity)
                        zone_id = int(row[0])
                row = self._con.execute(
                    """SELECT variable_id FROM variables
                       WHERE variable_name=? AND variable_kind=? AND entity_qualifier=?""",
                    (descriptor.variable_name, descriptor.kind.value, entity),
                ).fetchone()
                if row is not None:
                    out[descriptor] = int(row[0])
                    continue
                cur = self._con.execute(
                    """INSERT INTO variables (variable_name, variable_kind, entity_qualifier, zone_id, unit, frequency)
                       VALUES (?, ?, ?, ?, ?, ?)""",
                    (
                        descriptor.variable_name,
                        descriptor.kind.value,
                        entity,
                        zone_id,
                        descriptor.unit,
                        descriptor.frequency,
                    ),
                )
                out[descriptor] = int(cur.lastrowid)
        return out

    # -- aggregation registration ---------------------------------------

    def register_aggregation(
        self,
        spec: AggregationSpec,
        zone_ids: Mapping[str, int],
        aggregated_geometry: Mapping[str, ZoneGeometry | None],
        building_id: int | None = None,
    ) -> dict[str, int]:
        """Create aggregated-zone rows and the aggregated↔composite mapping rows.

        ``zone_ids`` maps normalized composite names to their zone ids.
        Aggregated zones are flagged and linked to ``building_id`` when
        given so they participate in later exports.
        """
        out: dict[str, int] = {}
        with self._lock, self._con:
            for group_name, members in spec.groups:
                geometry = aggregated_geometry.get(group_name)
                area = geometry.floor_area if geometry else None
                volume = geometry.volume if geometry else None
                agg_id = self._upsert_zone(group_name.strip(), area, volume, aggregated=True)
                for member in members:
                    composite_id = zone_ids.get(zone_key(member))
                    if composite_id is None:
                        raise UnknownZone(member)
                    self._con.execute(
                        """INSERT OR REPLACE INTO aggregation_zones
                           (aggregated_zone_id, composite_zone_id, method) VALUES (?, ?, ?)""",
                        (agg_id, composite_id, spec.method.value),
                    )
                if building_id is not None:
                    self._con.execute(
                        "INSERT OR IGNORE INTO building_zones (building_id, zone_id) VALUES (?, ?)",
                        (building_id, agg_id),
                    )
                out[group_name] = agg_id
        return out

    # -- datetimes -------------------------------------------------------

    def intern_datetimes(self, timestamps: Sequence[datetime]) -> dict[datetime, int]:
        """Map instants to datetime ids, appending rows only for new instants.

        Input must be strictly increasing.  The table is global: a second
        simulation with the same calendar adds zero rows.
        """
        for a, b in zip(timestamps, timestamps[1:]):
            if not a < b:
                raise NonMonotonicInput()
        epochs = [to_epoch(t) for t in timestamps]
        out: dict[datetime, int] = {}
        with self._lock, self._con:
            existing: dict[int, int] = {}
            for chunk_start in range(0, len(epochs), 500):
                chunk = epochs[chunk_start : chunk_start + 500]
                marks = ",".join("?" * len(chunk))
                for ts, dt_id in self._con.execute(
                    f"SELECT timestamp, datetime_id FROM datetimes WHERE timestamp IN ({marks})",
                    chunk,
                ):
                    existing[ts] = dt_id
            next_id = self._max_datetime_id() + 1
            new_rows = []
            for instant, epoch in zip(timestamps, epochs):
                if epoch in existing:
                    out[instant] = existing[epoch]
                else:
                    out[instant] = next_id
                    new_rows.append((next_id, epoch))
                    next_id += 1
            if new_rows:
                self._con.executemany("INSERT INTO datetimes VALUES (?, ?)", new_rows)
        return out

    def _max_datetime_id(self) -> int:
        row = self._con.execute("SELECT COALESCE(MAX(datetime_id), 0) FROM datetimes").fetchone()
        return int(row[0])

    # -- samples ---------------------------------------------------------

    def bulk_insert_samples(
        self, rows: Iterable[SampleTriple], batch_size: int = DEFAULT_BATCH_SIZE
    ) -> int:
        """Insert a stream of samples in all-or-nothing batches.

        Returns the total number inserted.  On a duplicate or foreign-key
        failure the current batch rolls back, earlier batches stay
        committed, and the raised error carries the resume point.
        """
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        inserted = 0
        batch: list[SampleTriple] = []
        for row in rows:
            batch.append(row)
            if len(batch) >= batch_size:
                self._insert_batch(batch, inserted)
                inserted += len(batch)
                batch = []
        if batch:
            self._insert_batch(batch, inserted)
            inserted += len(batch)
        return inserted

    def _insert_batch(self, batch: list[SampleTriple], inserted: int) -> None:
        ordered = sorted(batch, key=lambda r: (r.simulation_id, r.variable_id, r.datetime_id))
        for a, b in zip(ordered, ordered[1:]):
            if (a.simulation_id, a.variable_id, a.datetime_id) == (
                b.simulation_id,
                b.variable_id,
                b.datetime_id,
            ):
                raise DuplicateTriple(b, inserted)
        with self._lock, self._con:
            self._check_batch_fks(ordered, inserted)
            for lo, hi in self._runs(ordered):
                run = ordered[lo:hi]
                first = run[0]
                clash = self._con.execute(
                    """SELECT datetime_id, value_count FROM timeseries
                       WHERE simulation_id=? AND variable_id=?
                         AND datetime_id <= ? AND datetime_id + value_count > ?
                       ORDER BY datetime_id LIMIT 1""",
                    (
                        first.simulation_id,
                        first.variable_id,
                        run[-1].datetime_id,
                        first.datetime_id,
                    ),
                ).fetchone()
                if clash is not None:
                    dup_dt = max(int(clash[0]), first.datetime_id)
                    dup = next(r for r in run if r.datetime_id >= dup_dt)
                    raise DuplicateTriple(dup, inserted)
                blob = struct.pack(f"<{len(run)}d", *(r.value for r in run))
                self._con.execute(
                    "INSERT INTO timeseries VALUES (?, ?, ?, ?, ?)",
                    (first.simulation_id, first.variable_id, first.datetime_id, len(run), blob),
                )

    def _runs(self, ordered: list[SampleTriple]) -> Iterator[tuple[int, int]]:
        """Index ranges of maximal consecutive-datetime runs per (sim, var)."""
        start = 0
        for i in range(1, len(ordered) + 1):
            if i == len(ordered):
                yield (start, i)
                break
            a, b = ordered[i - 1], ordered[i]
            contiguous = (
                a.simulation_id == b.simulation_id
                and a.variable_id == b.variable_id
                and b.datetime_id == a.datetime_id + 1
            )
            if not contiguous:
                yield (start, i)
                start = i

    def _check_batch_fks(self, ordered: list[SampleTriple], inserted: int) -> None:
        for sim_id in sorted({r.simulation_id for r in ordered}):
            if not self._exists("simulations", "simulation_id", sim_id):
                raise ForeignKeyViolation(f"simulation {sim_id} does not exist", inserted)
        for var_id in sorted({r.variable_id for r in ordered}):
            if not self._exists("variables", "variable_id", var_id):
                raise ForeignKeyViolation(f"variable {var_id} does not exist", inserted)
        max_dt = self._max_datetime_id()
        for row in ordered:
            if row.datetime_id > max_dt:
                raise ForeignKeyViolation(f"datetime {row.datetime_id} does not exist", inserted)

    def _exists(self, table: str, column: str, value) -> bool:
        return (
            self._con.execute(f"SELECT 1 FROM {table} WHERE {column} = ?", (value,)).fetchone()
            is not None
        )

    # -- queries ----------------------------------------------------------

    def list_simulations(self) -> list[SimulationRecord]:
        with self._lock:
            rows = self._con.execute(
                """SELECT simulation_id, building_id, weather_file_location, time_resolution, schedule_name
                   FROM simulations ORDER BY simulation_id"""
            ).fetchall()
        return [
            SimulationRecord(
                simulation_id=r[0],
                building_id=r[1],
                weather_file_location=r[2],
                time_resolution=r[3],
                schedule_name=r[4],
            )
            for r in rows
        ]

    def get_simulation(self, simulation_id: int) -> SimulationRecord:
        with self._lock:
            row = self._con.execute(
                """SELECT simulation_id, building_id, weather_file_location, time_resolution, schedule_name
                   FROM simulations WHERE simulation_id = ?""",
                (simulation_id,),
            ).fetchone()
        if row is None:
            raise UnknownSimulation(simulation_id)
        return SimulationRecord(
            simulation_id=row[0],
            building_id=row[1],
            weather_file_location=row[2],
            time_resolution=row[3],
            schedule_name=row[4],
        )

    def list_variables(self, simulation_id: int) -> list[tuple[int, SeriesDescriptor]]:
        """Variables that have data for a simulation, with their ids."""
        self.get_simulation(simulation_id)
        with self._lock:
            rows = self._con.execute(
                """SELECT DISTINCT v.variable_id, v.variable_name, v.variable_kind,
                          v.entity_qualifier, v.unit, v.frequency
                   FROM timeseries t JOIN variables v ON v.variable_id = t.variable_id
                   WHERE t.simulation_id = ? ORDER BY v.variable_id""",
                (simulation_id,),
            ).fetchall()
        out = []
        for var_id, name, kind, entity, unit, frequency in rows:
            descriptor = SeriesDescriptor(
                variable_name=name,
                kind=SeriesKind(kind),
                entity=entity or None,
                unit=unit,
                frequency=frequency,
            )
            out.append((int(var_id), descriptor))
        return out

    def variable_descriptor(self, variable_id: int) -> SeriesDescriptor:
        with self._lock:
            row = self._con.execute(
                """SELECT variable_name, variable_kind, entity_qualifier, unit, frequency
                   FROM variables WHERE variable_id = ?""",
                (variable_id,),
            ).fetchone()
        if row is None:
            raise UnknownVariable(variable_id)
        return SeriesDescriptor(
            variable_name=row[0],
            kind=SeriesKind(row[1]),
            entity=row[2] or None,
            unit=row[3],
            frequency=row[4],
        )

    def is_aggregated_variable(self, variable_id: int) -> bool:
        with self._lock:
            row = self._con.execute(
                """SELECT z.is_aggregated FROM variables v
                   LEFT JOIN zones z ON z.zone_id = v.zone_id WHERE v.variable_id = ?""",
                (variable_id,),
            ).fetchone()
        if row is None:
            raise UnknownVariable(variable_id)
        return bool(row[0])

    def _datetime_lookup(self) -> np.ndarray:
        rows = self._con.execute("SELECT datetime_id, timestamp FROM datetimes").fetchall()
        if not rows:
            return np.zeros(1, dtype=np.int64)
        ids = np.fromiter((r[0] for r in rows), dtype=np.int64, count=len(rows))
        ts = np.fromiter((r[1] for r in rows), dtype=np.int64, count=len(rows))
        lookup = np.zeros(int(ids.max()) + 1, dtype=np.int64)
        lookup[ids] = ts
        return lookup

    def query_series(
        self,
        simulation_id: int,
        variable_ids: Sequence[int],
        start: datetime | None = None,
        end: datetime | None = None,
    ) -> dict[int, VariableTable]:
        """Series values for a simulation, ordered by timestamp.

        The ``[start, end]`` range is inclusive at both ends; omitted
        bounds mean unbounded.  Values round-trip bit-exactly.
        """
        self.get_simulation(simulation_id)
        descriptors = {vid: self.variable_descriptor(vid) for vid in variable_ids}
        lo = to_epoch(start) if start is not None else None
        hi = to_epoch(end) if end is not None else None
        with self._lock:
            lookup = self._datetime_lookup()
            out: dict[int, VariableTable] = {}
            for vid in variable_ids:
                runs = self._con.execute(
                    """SELECT datetime_id, value_count, "values" FROM timeseries
                       WHERE simulation_id = ? AND variable_id = ? ORDER BY datetime_id""",
                    (simulation_id, vid),
                ).fetchall()
                ids_parts = [np.arange(s, s + n, dtype=np.int64) for s, n, _ in runs]
                val_parts = [np.frombuffer(blob, dtype="<f8") for _, _, blob in runs]
                if ids_parts:
                    ids = np.concatenate(ids_parts)
                    values = np.concatenate(val_parts)
                else:
                    ids = np.zeros(0, dtype=np.int64)
                    values = np.zeros(0, dtype=np.float64)
                epochs = lookup[ids]
                mask = np.ones(len(epochs), dtype=bool)
                if lo is not None:
                    mask &= epochs >= lo
                if hi is not None:
                    mask &= epochs <= hi
                epochs, values = epochs[mask], values[mask]
                order = np.argsort(epochs, kind="stable")
                epochs, values = epochs[order], values[order]
                descriptor = descriptors[vid]
                label = descriptor.entity or descriptor.variable_name
                out[vid] = VariableTable(
                    timestamps=tuple(from_epoch(int(e)) for e in epochs),
                    columns={label: values},
                )
        return out

    def sample_count(self, simulation_id: int | None = None) -> int:
        """Logical sample rows (one per sim/var/datetime triple)."""
        with self._lock:
            if simulation_id is None:
                row = self._con.execute(
                    "SELECT COALESCE(SUM(value_count), 0) FROM timeseries"
                ).fetchone()
            else:
                row = self._con.execute(
                    "SELECT COALESCE(SUM(value_count), 0) FROM timeseries WHERE simulation_id = ?",
                    (simulation_id,),
                ).fetchone()
        return int(row[0])

    def integrity_violations(self) -> dict[str, int]:
        """Counts of orphaned references; all zeros on a healthy store."""
        queries = {
            "timeseries_missing_simulation": """
                SELECT COUNT(*) FROM timeseries t
                LEFT JOIN simulations s ON s.simulation_id = t.simulation_id
                WHERE s.simulation_id IS NULL""",
            "timeseries_missing_variable": """
                SELECT COUNT(*) FROM timeseries t
                LEFT JOIN variables v ON v.variable_id = t.variable_id
                WHERE v.variable_id IS NULL""",
            "timeseries_missing_datetime": """
                SELECT COUNT(*) FROM timeseries t
                LEFT JOIN datetimes d ON d.datetime_id = t.datetime_id
                WHERE d.datetime_id IS NULL""",
            "timeseries_run_past_calendar": """
                SELECT COUNT(*) FROM timeseries t
                WHERE t.datetime_id + t.value_count - 1 > (SELECT COALESCE(MAX(datetime_id),0) FROM datetimes)""",
            "simulations_missing_building": """
                SELECT COUNT(*) FROM simulations s
                LEFT JOIN buildings b ON b.building_id = s.building_id
                WHERE b.building_id IS NULL""",
            "variables_missing_zone": """
                SELECT COUNT(*) FROM variables v
                WHERE v.zone_id IS NOT NULL
                  AND NOT EXISTS (SELECT 1 FROM zones z WHERE z.zone_id = v.zone_id)""",
            "aggregation_zones_missing_zone": """
                SELECT COUNT(*) FROM aggregation_zones a
                WHERE NOT EXISTS (SELECT 1 FROM zones z WHERE z.zone_id = a.aggregated_zone_id)
                   OR NOT EXISTS (SELECT 1 FROM zones z WHERE z.zone_id = a.composite_zone_id)""",
        }
        with self._lock:
            return {name: int(self._con.execute(sql).fetchone()[0]) for name, sql in queries.items()}

    # -- storage accounting ------------------------------------------------

    def storage_report(self) -> StorageReport:
        """Per-table footprint plus comparison against the naive nested export.

        Store bytes are measured from the database's own page accounting;
        naive bytes are the exact size of the same data serialized as the
        nested per-series textual export (two-column CSV leaves plus
        manifests).
        """
        with self._lock:
            try:
                self._con.execute("PRAGMA wal_checkpoint(TRUNCATE)")
            except sqlite3.Error:
                pass
            tables: dict[str, TableStats] = {}
            page_size = int(self._con.execute("PRAGMA page_size").fetchone()[0])
            page_count = int(self._con.execute("PRAGMA page_count").fetchone()[0])
            total_bytes = page_size * page_count
            sizes: dict[str, int] = {}
            try:
                for name, nbytes in self._con.execute(
                    """SELECT m.tbl_name, SUM(d.pgsize) FROM dbstat d
                       JOIN sqlite_master m ON m.name = d.name GROUP BY m.tbl_name"""
                ):
                    sizes[name] = int(nbytes)
            except sqlite3.Error:
                pass  # dbstat vtab not compiled in; bytes default to 0 below
            for name in TABLE_NAMES:
                if name == "timeseries":
                    rows = self.sample_count()
                else:
                    rows = int(self._con.execute(f"SELECT COUNT(*) FROM {name}").fetchone()[0])
                tables[name] = TableStats(rows=rows, bytes=sizes.get(name, 0))

            naive = 0
            for sim in self.list_simulations():
                for _, _, leaf_rows in self._iter_leaves(sim.simulation_id):
                    naive += len("timestamp,value\n")
                    for instant, value in leaf_rows:
                        naive += len(f"{instant.isoformat(sep=' ')},{value!r}\n")
                naive += len(
                    json.dumps(self._manifest(sim.simulation_id, aggregated=False), indent=1)
                )

        sample_rows = tables["timeseries"].rows
        factor = (naive / total_bytes) if sample_rows else 0.0
        return StorageReport(
            tables=tables,
            total_bytes=total_bytes,
            sample_rows=sample_rows,
            naive_bytes=naive,
            reduction_factor=factor,
        )

    # -- nested export / import --------------------------------------------

    def _iter_leaves(self, simulation_id: int, variable_ids: Sequence[int] | None = None):
        """Yield (variable_id, descriptor, row iterator) per series of a simulation."""
        listing = self.list_variables(simulation_id)
        if variable_ids is not None:
            wanted = set(variable_ids)
            listing = [(vid, d) for vid, d in listing if vid in wanted]
        for vid, descriptor in listing:
            table = self.query_series(simulation_id, [vid])[vid]
            [(_, values)] = table.columns.items()
            yield vid, descriptor, zip(table.timestamps, (float(v) for v in values))

    def _manifest(self, simulation_id: int, aggregated: bool) -> dict:
        sim = self.get_simulation(simulation_id)
        with self._lock:
            brow = self._con.execute(
                """SELECT b.building_id, b.prototype_kind, b.energy_standard, b.climate_zone
                   FROM buildings b WHERE b.building_id = ?""",
                (sim.building_id,),
            ).fetchone()
            proto_table, link_table = _PROTOTYPE_TABLE[PrototypeKind(brow[1])]
            prow = self._con.execute(
                f"""SELECT p.name FROM {proto_table} p
                    JOIN {link_table} l ON l.prototype_id = p.prototype_id
                    WHERE l.building_id = ?""",
                (sim.building_id,),
            ).fetchone()
            zone_rows = self._con.execute(
                """SELECT DISTINCT z.zone_name, z.floor_area, z.volume, z.is_aggregated
                   FROM zones z JOIN building_zones bz ON bz.zone_id = z.zone_id
                   WHERE bz.building_id = ? ORDER BY z.zone_id""",
                (sim.building_id,),
            ).fetchall()
        leaves = []
        for vid, descriptor in self.list_variables(simulation_id):
            is_agg = self.is_aggregated_variable(vid)
            if aggregated and descriptor.kind is SeriesKind.ZONE and not is_agg:
                continue
            if not aggregated and is_agg:
                continue
            leaves.append(
                {
                    "path": self._leaf_path(simulation_id, vid, descriptor, aggregated),
                    "variable_id": vid,
                    "variable_name": descriptor.variable_name,
                    "kind": descriptor.kind.value,
                    "entity": descriptor.entity,
                    "unit": descriptor.unit,
                    "frequency": descriptor.frequency,
                }
            )
        return {
            "format": "epworkbench-nested-export/1",
            "shape": "aggregation" if aggregated else "generation",
            "simulation": {
                "simulation_id": sim.simulation_id,
                "weather_file_location": sim.weather_file_location,
                "time_resolution": sim.time_resolution,
                "schedule_name": sim.schedule_name,
            },
            "building": {
                "prototype_kind": brow[1],
                "prototype_name": prow[0] if prow else "",
                "energy_standard": brow[2],
                "climate_zone": brow[3],
            },
            "zones": [
                {
                    "zone_name": z[0],
                    "floor_area": z[1],
                    "volume": z[2],
                    "is_aggregated": bool(z[3]),
                }
                for z in zone_rows
            ],
            "leaves": leaves,
        }

    def _leaf_path(
        self, simulation_id: int, vid: int, descriptor: SeriesDescriptor, aggregated: bool
    ) -> str:
        var = _sanitize(descriptor.variable_name)
        if aggregated:
            if descriptor.kind is SeriesKind.ZONE:
                group = _sanitize(descriptor.entity or "")
            else:
                group = "__building__"
            return f"{group}/{var}.csv"
        name = f"{_sanitize(descriptor.entity)}__{var}" if descriptor.entity else var
        return f"sim_{simulation_id}/{name}.csv"

    def export_nested(
        self,
        simulation_id: int,
        dest,
        aggregated: bool = False,
        variable_ids: Sequence[int] | None = None,
    ) -> Path:
        """Write the nested archive for a simulation; returns the manifest path.

        ``aggregated=False`` exports the generation shape (original
        series, one leaf per entity column); ``aggregated=True`` exports
        aggregated-zone series grouped by aggregated zone, with non-zone
        series under ``__building__``.
        """
        manifest = self._manifest(simulation_id, aggregated)
        if variable_ids is not None:
            wanted = set(variable_ids)
            manifest["leaves"] = [l for l in manifest["leaves"] if l["variable_id"] in wanted]
        dest = Path(dest)
        dest.mkdir(parents=True, exist_ok=True)
        for leaf in manifest["leaves"]:
            path = dest / leaf["path"]
            path.parent.mkdir(parents=True, exist_ok=True)
            table = self.query_series(simulation_id, [leaf["variable_id"]])[leaf["variable_id"]]
            [(_, values)] = table.columns.items()
            with open(path, "w") as fh:
                fh.write("timestamp,value\n")
                for instant, value in zip(table.timestamps, values):
                    fh.write(f"{instant.isoformat(sep=' ')},{float(value)!r}\n")
        manifest_path = dest / "manifest.json"
        manifest_path.write_text(json.dumps(manifest, indent=1))
        return manifest_path

    def import_nested(self, src) -> int:
        """Re-ingest a nested export archive; returns the simulation id."""
        src = Path(src)
        manifest = json.loads((src / "manifest.json").read_text())
        building = manifest["building"]
        record = BuildingRecord(
            prototype_kind=PrototypeKind(building["prototype_kind"]),
            prototype_name=building["prototype_name"] or "unknown",
            energy_standard=building["energy_standard"],
            climate_zone=building["climate_zone"],
        )
        building_id = self.upsert_building(record)
        zone_entries: list[ZoneGeometry | str] = []
        aggregated_names = set()
        for z in manifest.get("zones", []):
            if z.get("is_aggregated"):
                aggregated_names.add(zone_key(z["zone_name"]))
            if z.get("floor_area") and z.get("volume"):
                zone_entries.append(
                    ZoneGeometry(
                        zone_name=z["zone_name"], floor_area=z["floor_area"], volume=z["volume"]
                    )
                )
            else:
                zone_entries.append(z["zone_name"])
        plain = [
            e
            for e in zone_entries
            if zone_key(e.zone_name if isinstance(e, ZoneGeometry) else e) not in aggregated_names
        ]
        zone_ids = self.register_zones(plain, building_id)
        with self._lock, self._con:
            for entry in zone_entries:
                name = entry.zone_name if isinstance(entry, ZoneGeometry) else entry
                if zone_key(name) in aggregated_names:
                    area = entry.floor_area if isinstance(entry, ZoneGeometry) else None
                    volume = entry.volume if isinstance(entry, ZoneGeometry) else None
                    agg_id = self._upsert_zone(name.strip(), area, volume, aggregated=True)
                    self._con.execute(
                        "INSERT OR IGNORE INTO building_zones (building_id, zone_id) VALUES (?, ?)",
                        (building_id, agg_id),
                    )
                    zone_ids[zone_key(name)] = agg_id
        sim_meta = manifest["simulation"]
        sim_id = self.upsert_simulation(
            SimulationRecord(
                building_id=building_id,
                weather_file_location=sim_meta["weather_file_location"],
                time_resolution=sim_meta["time_resolution"],
                schedule_name=sim_meta.get("schedule_name", ""),
            )
        )

        leaves = manifest["leaves"]
        descriptors = [
            SeriesDescriptor(
                variable_name=l["variable_name"],
                kind=SeriesKind(l["kind"]),
                entity=l["entity"],
                unit=l.get("unit", ""),
                frequency=l.get("frequency", ""),
            )
            for l in leaves
        ]
        var_ids = self.register_variables(descriptors, zone_ids)

        calendar: set[datetime] = set()
        parsed: list[tuple[int, list[tuple[datetime, float]]]] = []
        for leaf, descriptor in zip(leaves, descriptors):
            rows = []
            with open(src / leaf["path"]) as fh:
                next(fh)
                for line in fh:
                    stamp, _, value = line.rstrip("\n").partition(",")
                    instant = datetime.fromisoformat(stamp)
                    rows.append((instant, float(value)))
                    calendar.add(instant)
            parsed.append((var_ids[descriptor], rows))
        dt_ids = self.intern_datetimes(sorted(calendar))

        def triples() -> Iterator[SampleTriple]:
            for vid, rows in parsed:
                for instant, value in rows:
                    yield SampleTriple(
                        simulation_id=sim_id,
                        variable_id=vid,
                        datetime_id=dt_ids[instant],
                        value=value,
                    )

        self.bulk_insert_samples(triples())
        return sim_id
