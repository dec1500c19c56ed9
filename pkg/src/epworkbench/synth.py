"""Deterministic generator of pseudo-EnergyPlus fixtures.

Produces a matching triple of files (``model.idf``, ``eplusout.eio``,
``eplusout.csv``) in the exact formats the parsers consume, so the whole
pipeline can be exercised without an EnergyPlus install.  Output is
byte-identical for a fixed :class:`FixtureSpec`, and
:func:`reference_values` returns the same numbers in memory for oracle
comparisons without re-parsing.

The signal model per series is ``offset + amp·sin(2π·day_fraction) +
noise`` with seeded parameters; it exists only to make plots look
plausible and carries no physical claim.
"""

from __future__ import annotations

import calendar
import json
import math
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from importlib import resources
from pathlib import Path

import numpy as np

from epworkbench.domain import ALLOWED_RESOLUTIONS, SeriesDescriptor, ZoneGeometry
from epworkbench.parsers import classify_variable, format_output_datetime
from epworkbench.domain import SeriesKind


class IoFailure(OSError):
    """Fixture files could not be written."""


@dataclass(frozen=True)
class VariableTemplate:
    """One requested output variable; zone-kind templates expand per zone."""

    variable_name: str
    unit: str = ""
    entity: str | None = None

    @property
    def kind(self) -> SeriesKind:
        return classify_variable(self.variable_name)


def essential_variables() -> tuple[VariableTemplate, ...]:
    """The default variable selection, loaded from the packaged config file."""
    raw = resources.files("epworkbench").joinpath("data/essential_variables.json").read_text()
    spec = json.loads(raw)
    return tuple(
        VariableTemplate(v["variable_name"], v.get("unit", ""), v.get("entity"))
        for v in spec["variables"]
    )


@dataclass(frozen=True)
class FixtureSpec:
    seed: int = 7
    n_zones: int = 5
    variables: tuple[VariableTemplate, ...] = field(default_factory=essential_variables)
    resolution: int = 5
    days: int = 7
    year: int = 2023

    def __post_init__(self) -> None:
        if self.n_zones < 1:
            raise ValueError("n_zones must be >= 1")
        if self.days < 1:
            raise ValueError("days must be >= 1")
        if self.resolution not in ALLOWED_RESOLUTIONS:
            raise ValueError(f"resolution must divide 60, got {self.resolution}")
        year_days = 366 if calendar.isleap(self.year) else 365
        if self.days > year_days:
            raise ValueError("run period must fit within one calendar year")

    @property
    def steps(self) -> int:
        return self.days * 24 * 60 // self.resolution

    @property
    def zone_names(self) -> tuple[str, ...]:
        return tuple(f"Zone_{i}" for i in range(1, self.n_zones + 1))


@dataclass(frozen=True)
class FixtureData:
    """Everything the generated files contain, in memory."""

    timestamps: tuple[datetime, ...]
    series: tuple[tuple[str, SeriesDescriptor, np.ndarray], ...]
    geometry: tuple[ZoneGeometry, ...]
    zone_names: tuple[str, ...]
    schedule_names: tuple[str, ...]


def _descriptors(spec: FixtureSpec) -> list[SeriesDescriptor]:
    """Expand templates into concrete descriptors (zone templates × zones)."""
    out = []
    for template in spec.variables:
        if template.kind is SeriesKind.ZONE:
            for zone in spec.zone_names:
                out.append(
                    SeriesDescriptor(
                        variable_name=template.variable_name,
                        kind=SeriesKind.ZONE,
                        entity=zone.upper(),
                        unit=template.unit,
                    )
                )
        elif template.kind is SeriesKind.SITE:
            out.append(
                SeriesDescriptor(
                    variable_name=template.variable_name, kind=SeriesKind.SITE, unit=template.unit
                )
            )
        else:
            entity = (template.entity or f"{template.kind.value}_1").upper()
            out.append(
                SeriesDescriptor(
                    variable_name=template.variable_name,
                    kind=template.kind,
                    entity=entity,
                    unit=template.unit,
                )
            )
    return out


def _header_for(descriptor: SeriesDescriptor) -> str:
    name = f"{descriptor.variable_name} [{descriptor.unit}]({descriptor.frequency})"
    if descriptor.entity is not None:
        return f"{descriptor.entity}:{name}"
    return name


def reference_values(spec: FixtureSpec) -> FixtureData:
    """The exact tables :func:`generate_fixture` writes, without touching disk."""
    rng = random.Random(spec.seed)

    geometry = []
    for zone in spec.zone_names:
        area = float(f"{rng.uniform(40.0, 250.0):.2f}")
        height = rng.uniform(2.5, 4.0)
        volume = float(f"{area * height:.2f}")
        geometry.append(ZoneGeometry(zone_name=zone.upper(), floor_area=area, volume=volume))

    start = datetime(spec.year, 1, 1)
    step = timedelta(minutes=spec.resolution)
    timestamps = tuple(start + step * (i + 1) for i in range(spec.steps))

    steps_per_day = 24 * 60 // spec.resolution
    phase = 2.0 * math.pi * np.arange(1, spec.steps + 1) / steps_per_day

    series = []
    for descriptor in _descriptors(spec):
        offset = rng.uniform(5.0, 80.0)
        amp = rng.uniform(0.5, 15.0)
        sigma = rng.uniform(0.05, 1.5)
        noise = np.array([rng.gauss(0.0, sigma) for _ in range(spec.steps)])
        values = offset + amp * np.sin(phase) + noise
        series.append((_header_for(descriptor), descriptor, values))

    schedules = tuple(
        sorted({t.entity for t in spec.variables if t.kind is SeriesKind.SCHEDULE and t.entity})
    )
    return FixtureData(
        timestamps=timestamps,
        series=tuple(series),
        geometry=tuple(geometry),
        zone_names=spec.zone_names,
        schedule_names=schedules,
    )


def _idf_text(spec: FixtureSpec, data: FixtureData) -> str:
    end_date = datetime(spec.year, 1, 1) + timedelta(days=spec.days - 1)
    lines = [
        "! Synthetic building model fixture (deterministic)",
        "",
        f"Timestep, {60 // spec.resolution};",
        "",
        f"RunPeriod, Run Period 1, 1, 1, {end_date.month}, {end_date.day};",
        "",
    ]
    for zone in data.zone_names:
        lines.append(f"Zone, {zone};")
    lines.append("")
    for schedule in data.schedule_names:
        lines.append(
            f"Schedule:Compact, {schedule}, Fraction, Through: 12/31, For: AllDays, Until: 24:00, 0.5;"
        )
    lines.append("")
    for template in spec.variables:
        key = "*" if template.kind is SeriesKind.ZONE or template.entity is None else template.entity
        lines.append(f"Output:Variable, {key}, {template.variable_name}, TimeStep;")
    lines.append("")
    return "\n".join(lines)


def _eio_text(data: FixtureData) -> str:
    lines = [
        "Program Version,Synthetic Fixture Generator",
        "! <Zone Information>,Zone Name,North Axis {deg},Type,Multiplier,"
        "Ceiling Height {m},Floor Area {m2},Volume {m3},Zone Inside Convection Algorithm",
    ]
    for g in data.geometry:
        lines.append(
            f" Zone Information,{g.zone_name},0.0,1,1,3.00,{g.floor_area:.2f},{g.volume:.2f},TARP"
        )
    lines.append("")
    return "\n".join(lines)


def _csv_text(data: FixtureData) -> str:
    header = "Date/Time," + ",".join(h for h, _, _ in data.series)
    lines = [header]
    for i, instant in enumerate(data.timestamps):
        stamp = format_output_datetime(instant)
        row = [stamp] + [repr(float(values[i])) for _, _, values in data.series]
        lines.append(",".join(row))
    lines.append("")
    return "\n".join(lines)


def generate_fixture(spec: FixtureSpec, out_dir) -> dict[str, Path]:
    """Write ``model.idf``, ``eplusout.eio`` and ``eplusout.csv`` under ``out_dir``.

    Byte-identical across runs for the same spec.  Returns the paths keyed
    by role (``idf``, ``eio``, ``csv``).
    """
    data = reference_values(spec)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "idf": out / "model.idf",
            "eio": out / "eplusout.eio",
            "csv": out / "eplusout.csv",
        }
        paths["idf"].write_text(_idf_text(spec, data))
        paths["eio"].write_text(_eio_text(data))
        paths["csv"].write_text(_csv_text(data))
    except OSError as exc:
        raise IoFailure(f"cannot write fixture to {out}: {exc}") from exc
    return paths
