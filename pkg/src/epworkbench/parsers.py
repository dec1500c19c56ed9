"""Parsers for EnergyPlus text artifacts.

Three formats are consumed, each a deliberately targeted subset:

* ``.idf`` building models: objects are comma-separated field lists
  terminated by ``;``, with ``!`` starting a comment that runs to end of
  line.  Only the object classes the workbench needs are extracted
  (``Zone``, ``Timestep``, ``RunPeriod``, ``Output:Variable``,
  ``Schedule:Compact``); everything else is skipped intact.
* ``.eio`` tabular reports: the ``Zone Information`` section supplies
  per-zone floor area and volume.  Column positions are resolved from
  the section's header line, never hard-coded.
* the tabular ``.csv`` output export: a ``Date/Time`` column followed by
  one column per reported series, each header of the form
  ``ENTITY:Variable Name [Unit](Frequency)`` (entity absent for
  site-level series).

All parsers are pure functions and are safe for concurrent use.
"""

from __future__ import annotations

import calendar
import csv
import io
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from epworkbench.domain import SeriesDescriptor, SeriesKind


class ParseError(Exception):
    """Base class for all parser failures."""


class IdfSyntaxError(ParseError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"IDF syntax error at line {line}: {reason}")
        self.line = line
        self.reason = reason


class MissingZoneInformationSection(ParseError):
    def __init__(self) -> None:
        super().__init__("EIO report contains no 'Zone Information' section")


class NonPositiveGeometry(ParseError):
    def __init__(self, zone_name: str, detail: str):
        super().__init__(f"zone {zone_name!r}: {detail}")
        self.zone_name = zone_name


class MalformedHeader(ParseError):
    def __init__(self, header: str, reason: str, column: int | None = None):
        where = f" (column {column})" if column is not None else ""
        super().__init__(f"malformed series header {header!r}{where}: {reason}")
        self.header = header
        self.reason = reason
        self.column = column


class RaggedRow(ParseError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"malformed table row at line {line}: {reason}")
        self.line = line
        self.reason = reason


class BadStamp(ParseError):
    def __init__(self, stamp: str):
        super().__init__(f"unparseable date stamp {stamp!r}")
        self.stamp = stamp


@dataclass(frozen=True)
class IdfModel:
    """The subset of an IDF the workbench cares about."""

    zones: tuple[str, ...] = ()
    timestep_per_hour: int = 6
    run_period: tuple[tuple[int, int], tuple[int, int]] = ((1, 1), (12, 31))
    requested_output_variables: tuple[tuple[str, str, str], ...] = ()
    schedule_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.timestep_per_hour not in range(1, 61) or 60 % self.timestep_per_hour:
            raise ValueError(
                f"timestep_per_hour must divide 60, got {self.timestep_per_hour}"
            )
        if self.run_period[0] > self.run_period[1]:
            raise ValueError(f"run_period begin {self.run_period[0]} after end {self.run_period[1]}")

    @property
    def time_resolution(self) -> int:
        """Minutes per reported timestep."""
        return 60 // self.timestep_per_hour


@dataclass(frozen=True)
class RawSeries:
    header: str
    descriptor: SeriesDescriptor
    values: np.ndarray


@dataclass(frozen=True)
class RawOutputTable:
    """A parsed tabular output file: raw stamps plus length-aligned series."""

    datetime_column: tuple[str, ...]
    series: tuple[RawSeries, ...] = field(default_factory=tuple)


def _split_objects(text: str):
    """Yield (line_number, [fields]) per ``;``-terminated IDF object."""
    buf: list[str] = []
    start_line = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        code = line.split("!", 1)[0]
        while code:
            if start_line is None and code.strip():
                start_line = lineno
            end = code.find(";")
            if end < 0:
                buf.append(code)
                break
            buf.append(code[:end])
            fields = [f.strip() for f in "".join(buf).split(",")]
            yield start_line or lineno, fields
            buf = []
            start_line = None
            code = code[end + 1 :]
    tail = "".join(buf)
    if tail.strip():
        raise IdfSyntaxError(start_line or 1, "object not terminated by ';'")


def _int_field(fields: list[str], index: int, lineno: int, what: str) -> int:
    try:
        return int(fields[index])
    except (IndexError, ValueError):
        raise IdfSyntaxError(lineno, f"expected integer {what}") from None


def parse_idf(text: str) -> IdfModel:
    """Extract zones, timestep, run period, output requests and schedule names.

    Missing optional objects fall back to defaults (``Timestep`` 6 per
    hour, full-year run period).  Unknown object classes are ignored.
    ``RunPeriod`` year fields (values above 31) are skipped, so both the
    legacy 4-integer and the modern 6-field form parse.
    """
    zones: list[str] = []
    schedules: list[str] = []
    outputs: list[tuple[str, str, str]] = []
    timestep = 6
    run_period = ((1, 1), (12, 31))

    for lineno, fields in _split_objects(text):
        cls = fields[0].strip().lower()
        if not cls:
            raise IdfSyntaxError(lineno, "empty object class name")
        if cls == "zone":
            if len(fields) < 2 or not fields[1]:
                raise IdfSyntaxError(lineno, "Zone object has no name")
            zones.append(fields[1])
        elif cls == "timestep":
            timestep = _int_field(fields, 1, lineno, "timestep per hour")
        elif cls == "runperiod":
            rest = fields[1:]
            if rest and not re.fullmatch(r"\d+", rest[0] or ""):
                rest = rest[1:]  # named run period
            dates = [int(f) for f in rest if re.fullmatch(r"\d+", f or "") and int(f) <= 31]
            if len(dates) < 4:
                raise IdfSyntaxError(lineno, "RunPeriod needs begin/end month and day")
            run_period = ((dates[0], dates[1]), (dates[2], dates[3]))
        elif cls == "output:variable":
            key = fields[1] if len(fields) > 1 else "*"
            name = fields[2] if len(fields) > 2 else ""
            freq = fields[3] if len(fields) > 3 else "TimeStep"
            outputs.append((key or "*", name, freq or "TimeStep"))
        elif cls == "schedule:compact":
            if len(fields) > 1 and fields[1]:
                schedules.append(fields[1])

    try:
        return IdfModel(
            zones=tuple(zones),
            timestep_per_hour=timestep,
            run_period=run_period,
            requested_output_variables=tuple(outputs),
            schedule_names=tuple(schedules),
        )
    except ValueError as exc:
        raise IdfSyntaxError(1, str(exc)) from None


def parse_eio(text: str):
    """Parse the ``Zone Information`` section into :class:`ZoneGeometry` records.

    The header line (``! <Zone Information>,Zone Name,...``) declares the
    column layout; floor-area and volume positions are looked up there by
    name so reordered or extended reports still parse.
    """
    from epworkbench.domain import ZoneGeometry

    header_cols: list[str] | None = None
    rows: list[list[str]] = []
    for line in text.splitlines():
        stripped = line.strip()
        low = stripped.lower()
        if low.startswith("!") and "<zone information>" in low:
            header_cols = [c.strip().lower() for c in stripped.split(",")]
        elif low.startswith("zone information,"):
            rows.append([c.strip() for c in stripped.split(",")])

    if header_cols is None:
        raise MissingZoneInformationSection()

    def col(substring: str) -> int:
        for i, name in enumerate(header_cols):
            if substring in name:
                return i
        raise MissingZoneInformationSection()

    name_col = col("zone name")
    area_col = col("floor area")
    volume_col = col("volume")

    geometries = []
    for fields in rows:
        zone = fields[name_col] if name_col < len(fields) else ""
        try:
            area = float(fields[area_col])
            volume = float(fields[volume_col])
        except (IndexError, ValueError):
            raise NonPositiveGeometry(zone, "floor area or volume missing or not numeric") from None
        if area <= 0 or volume <= 0:
            raise NonPositiveGeometry(zone, f"floor area {area} / volume {volume} must be positive")
        geometries.append(ZoneGeometry(zone_name=zone, floor_area=area, volume=volume))
    return geometries


_KIND_PREFIXES = (
    ("zone ", SeriesKind.ZONE),
    ("surface ", SeriesKind.SURFACE),
    ("system node ", SeriesKind.NODE),
    ("schedule ", SeriesKind.SCHEDULE),
)


def classify_variable(variable_name: str) -> SeriesKind:
    """Kind of a series, from its variable-name prefix; site when no prefix matches."""
    low = variable_name.lower()
    for prefix, kind in _KIND_PREFIXES:
        if low.startswith(prefix):
            return kind
    return SeriesKind.SITE


def parse_series_header(header: str) -> SeriesDescriptor:
    """Parse ``ENTITY:Variable Name [Unit](Frequency)`` into a descriptor.

    The entity split happens on the *last* ``:`` before the ``[`` so
    entity names containing colons survive.  Unit brackets are mandatory;
    the frequency suffix is optional.
    """
    open_b = header.find("[")
    if open_b < 0:
        raise MalformedHeader(header, "missing '[unit]' brackets")
    close_b = header.find("]", open_b)
    if close_b < 0:
        raise MalformedHeader(header, "missing '[unit]' brackets")
    unit = header[open_b + 1 : close_b].strip()

    name_part = header[:open_b]
    entity: str | None = None
    variable_name = name_part.strip()
    colon = name_part.rfind(":")
    if colon >= 0:
        entity = name_part[:colon].strip()
        variable_name = name_part[colon + 1 :].strip()
        if not entity:
            raise MalformedHeader(header, "empty entity qualifier")
    if not variable_name:
        raise MalformedHeader(header, "empty variable name")

    freq_match = re.search(r"\(([^)]*)\)", header[close_b + 1 :])
    frequency = freq_match.group(1).strip() if freq_match else ""

    kind = classify_variable(variable_name)
    if kind is SeriesKind.SITE and entity is not None:
        raise MalformedHeader(header, "site-level series must not carry an entity qualifier")
    if kind is not SeriesKind.SITE and entity is None:
        raise MalformedHeader(header, f"{kind.value}-level series requires an entity qualifier")
    return SeriesDescriptor(
        variable_name=variable_name, kind=kind, entity=entity, unit=unit, frequency=frequency
    )


def parse_output_table(text: str) -> RawOutputTable:
    """Parse a tabular output export into length-aligned series."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise RaggedRow(1, "file is empty") from None
    if not header or header[0].strip().lower() != "date/time":
        raise MalformedHeader(header[0] if header else "", "first column must be 'Date/Time'", column=0)

    descriptors = []
    for col_index, raw in enumerate(header[1:], start=1):
        try:
            descriptors.append(parse_series_header(raw.strip()))
        except MalformedHeader as exc:
            raise MalformedHeader(raw, exc.reason, column=col_index) from None

    stamps: list[str] = []
    columns: list[list[float]] = [[] for _ in descriptors]
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise RaggedRow(lineno, f"expected {len(header)} fields, found {len(row)}")
        stamps.append(row[0])
        for i, cell in enumerate(row[1:]):
            try:
                columns[i].append(float(cell))
            except ValueError:
                raise RaggedRow(lineno, f"field {i + 1} is not a number: {cell!r}") from None

    series = tuple(
        RawSeries(header=h.strip(), descriptor=d, values=np.asarray(vals, dtype=np.float64))
        for h, d, vals in zip(header[1:], descriptors, columns)
    )
    return RawOutputTable(datetime_column=tuple(stamps), series=series)


def write_output_table(table: RawOutputTable) -> str:
    """Serialize a table back to the tabular export format (inverse of parse)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["Date/Time"] + [s.header for s in table.series])
    for i, stamp in enumerate(table.datetime_column):
        writer.writerow([stamp] + [repr(float(s.values[i])) for s in table.series])
    return out.getvalue()


_STAMP_RE = re.compile(r"^\s*(\d{1,2})/(\d{1,2})\s+(\d{1,2}):(\d{2}):(\d{2})\s*$")


def parse_output_datetime(stamp: str, year: int = 2023) -> datetime:
    """Resolve an EnergyPlus ``MM/DD  HH:MM:SS`` stamp within ``year``.

    EnergyPlus marks end-of-day as ``24:00:00``; that normalizes to
    ``00:00:00`` of the following day.
    """
    match = _STAMP_RE.match(stamp)
    if not match:
        raise BadStamp(stamp)
    month, day, hour, minute, second = (int(g) for g in match.groups())
    if not 1 <= month <= 12:
        raise BadStamp(stamp)
    if not 1 <= day <= calendar.monthrange(year, month)[1]:
        raise BadStamp(stamp)
    if minute > 59 or second > 59:
        raise BadStamp(stamp)
    if hour == 24:
        if minute or second:
            raise BadStamp(stamp)
        return datetime(year, month, day) + timedelta(days=1)
    if hour > 23:
        raise BadStamp(stamp)
    return datetime(year, month, day, hour, minute, second)


def format_output_datetime(instant: datetime) -> str:
    """Render an instant in the EnergyPlus stamp convention (midnight as 24:00:00)."""
    if instant.hour == 0 and instant.minute == 0 and instant.second == 0:
        previous = instant - timedelta(days=1)
        return f" {previous.month:02d}/{previous.day:02d}  24:00:00"
    return f" {instant.month:02d}/{instant.day:02d}  {instant.hour:02d}:{instant.minute:02d}:{instant.second:02d}"
