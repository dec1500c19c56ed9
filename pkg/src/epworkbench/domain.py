"""Core domain types shared by all modules.

Types are immutable after construction and safe to share across threads.
Hard structural invariants (finite values, positive geometry, aligned
columns) are enforced at construction time; record-level business rules
live in the ``validate_*`` functions, which report violations instead of
raising so callers can surface every problem at once.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum

import numpy as np

# Time resolutions (minutes) that divide an hour evenly.
ALLOWED_RESOLUTIONS = (1, 2, 3, 4, 5, 6, 10, 12, 15, 20, 30, 60)

# Reserved group key under which non-zone series pass through aggregation.
BUILDING_GROUP = "__building__"


class PrototypeKind(str, Enum):
    COMMERCIAL = "commercial"
    RESIDENTIAL = "residential"
    MANUFACTURED = "manufactured"


class SeriesKind(str, Enum):
    ZONE = "zone"
    SURFACE = "surface"
    NODE = "node"
    SCHEDULE = "schedule"
    SITE = "site"


class AggregationMethod(str, Enum):
    SIMPLE = "simple"
    AREA_WEIGHTED = "area_weighted"
    VOLUME_WEIGHTED = "volume_weighted"


def zone_key(name: str) -> str:
    """Canonical zone-name key: case-insensitive, surrounding whitespace stripped.

    EnergyPlus upper-cases names in output headers while IDF files use
    mixed case, so all zone-name matching goes through this helper.
    """
    return name.strip().upper()


@dataclass(frozen=True)
class BuildingRecord:
    """One building model: a prototype under an energy standard in a climate zone."""

    prototype_kind: PrototypeKind
    prototype_name: str
    energy_standard: str
    climate_zone: str
    building_id: int | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.prototype_kind, PrototypeKind):
            object.__setattr__(self, "prototype_kind", PrototypeKind(self.prototype_kind))
        if not self.prototype_name:
            raise ValueError("prototype_name must be nonempty")
        if self.building_id is not None and self.building_id <= 0:
            raise ValueError("building_id must be positive")


@dataclass(frozen=True)
class SimulationRecord:
    """One EnergyPlus run of a building.

    ``time_resolution`` is in minutes and must divide 60; use
    :func:`validate_simulation` to check rather than relying on
    construction-time errors.
    """

    building_id: int
    weather_file_location: str
    time_resolution: int
    schedule_name: str = ""
    simulation_id: int | None = None

    def __post_init__(self) -> None:
        if self.simulation_id is not None and self.simulation_id <= 0:
            raise ValueError("simulation_id must be positive")


@dataclass(frozen=True)
class SeriesDescriptor:
    """A concrete reported series: what was measured, where, in which unit."""

    variable_name: str
    kind: SeriesKind
    entity: str | None = None
    unit: str = ""
    frequency: str = "TimeStep"

    def __post_init__(self) -> None:
        if not isinstance(self.kind, SeriesKind):
            object.__setattr__(self, "kind", SeriesKind(self.kind))
        if self.kind is SeriesKind.SITE:
            if self.entity is not None:
                raise ValueError("site-level series must not carry an entity qualifier")
        else:
            if not self.entity:
                raise ValueError(f"{self.kind.value}-level series requires an entity qualifier")

    @property
    def key(self) -> tuple[str, str, str | None]:
        return (self.variable_name, self.kind.value, self.entity)


@dataclass(frozen=True)
class ZoneGeometry:
    """A thermal zone's name, floor area [m²] and volume [m³]."""

    zone_name: str
    floor_area: float
    volume: float

    def __post_init__(self) -> None:
        if not self.zone_name or not self.zone_name.strip():
            raise ValueError("zone_name must be nonempty")
        if not (self.floor_area > 0):
            raise ValueError(f"floor_area must be positive, got {self.floor_area}")
        if not (self.volume > 0):
            raise ValueError(f"volume must be positive, got {self.volume}")


@dataclass(frozen=True)
class AggregationSpec:
    """Mapping of aggregated zones to their composite zones plus a weighting method."""

    method: AggregationMethod
    groups: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self) -> None:
        if not isinstance(self.method, AggregationMethod):
            object.__setattr__(self, "method", AggregationMethod(self.method))
        object.__setattr__(
            self,
            "groups",
            tuple((name, tuple(members)) for name, members in self.groups),
        )


@dataclass(frozen=True)
class VariableTable:
    """Aligned time series for one variable: a shared calendar and one column per entity."""

    timestamps: tuple[datetime, ...]
    columns: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamps", tuple(self.timestamps))
        cols = {}
        n = len(self.timestamps)
        for name, values in self.columns.items():
            arr = np.asarray(values, dtype=np.float64)
            if arr.shape != (n,):
                raise ValueError(
                    f"column {name!r} has length {arr.shape}, expected ({n},)"
                )
            cols[name] = arr
        object.__setattr__(self, "columns", cols)
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if not a < b:
                raise ValueError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True)
class SampleTriple:
    """One row of the time-series fact table."""

    simulation_id: int
    variable_id: int
    datetime_id: int
    value: float

    def __post_init__(self) -> None:
        for name in ("simulation_id", "variable_id", "datetime_id"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not math.isfinite(self.value):
            raise ValueError(f"value must be finite, got {self.value}")


# --- Validation ---------------------------------------------------------

INVALID_RESOLUTION = "InvalidResolution"
MISSING_WEATHER_FILE = "MissingWeatherFile"
UNKNOWN_ZONE = "UnknownZone"
EMPTY_GROUP = "EmptyGroup"
DUPLICATE_AGGREGATED_NAME = "DuplicateAggregatedName"


@dataclass(frozen=True)
class ValidationIssue:
    """One violated invariant, identified by a stable code."""

    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def validate_simulation(
    record: SimulationRecord,
) -> SimulationRecord | list[ValidationIssue]:
    """Return ``record`` unchanged if valid, else a list naming each violation."""
    issues = []
    if record.time_resolution not in ALLOWED_RESOLUTIONS:
        issues.append(
            ValidationIssue(
                INVALID_RESOLUTION,
                f"time_resolution {record.time_resolution} is not a divisor of 60",
            )
        )
    if not record.weather_file_location.strip():
        issues.append(
            ValidationIssue(MISSING_WEATHER_FILE, "weather_file_location is empty")
        )
    return issues if issues else record


def validate_aggregation_spec(
    spec: AggregationSpec, known_zones: set[str]
) -> AggregationSpec | list[ValidationIssue]:
    """Check an aggregation spec against the zone names it will be applied to.

    Zone names are matched case-insensitively.  Composite zones appearing
    in more than one group are allowed (a warning is emitted, since the
    overlap is usually unintended) but never rejected.
    """
    known = {zone_key(z) for z in known_zones}
    issues: list[ValidationIssue] = []
    seen_groups: set[str] = set()
    seen_composites: set[str] = set()
    for name, members in spec.groups:
        gk = zone_key(name)
        if gk in seen_groups:
            issues.append(
                ValidationIssue(DUPLICATE_AGGREGATED_NAME, f"aggregated zone {name!r} defined twice")
            )
        seen_groups.add(gk)
        if not members:
            issues.append(ValidationIssue(EMPTY_GROUP, f"aggregated zone {name!r} has no composite zones"))
        for member in members:
            mk = zone_key(member)
            if mk not in known:
                issues.append(ValidationIssue(UNKNOWN_ZONE, f"composite zone {member!r} is not a known zone"))
            if mk in seen_composites:
                warnings.warn(
                    f"composite zone {member!r} appears in multiple aggregated zones",
                    stacklevel=2,
                )
            seen_composites.add(mk)
    return issues if issues else spec
