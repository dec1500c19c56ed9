"""Combine composite-zone series into aggregated-zone series.

Three weighting methods are supported: simple average (w_i = 1/N), floor
area-weighted average (w_i = A_i / ΣA) and volume-weighted average
(w_i = V_i / ΣV).  Weights always form a convex combination, so every
aggregated value lies between the per-timestep min and max of its
composite zones.  Missing values propagate: a NaN in any composite
column makes the aggregate NaN at that timestep rather than silently
renormalizing around the gap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from epworkbench.domain import (
    BUILDING_GROUP,
    AggregationMethod,
    AggregationSpec,
    VariableTable,
    ZoneGeometry,
    zone_key,
)
from epworkbench.parsers import classify_variable
from epworkbench.domain import SeriesKind


class AggregationError(Exception):
    """Base class for aggregation failures."""


class EmptyZoneList(AggregationError):
    def __init__(self) -> None:
        super().__init__("cannot build weights over an empty zone list")


class MissingGeometry(AggregationError):
    def __init__(self, zone_name: str):
        super().__init__(f"zone {zone_name!r} has no usable geometry for a weighted method")
        self.zone_name = zone_name


class KeyMismatch(AggregationError):
    def __init__(self, missing: Sequence[str], extra: Sequence[str]):
        super().__init__(
            f"zone keys of series and weights differ (missing={sorted(missing)}, extra={sorted(extra)})"
        )
        self.missing = tuple(missing)
        self.extra = tuple(extra)


class LengthMismatch(AggregationError):
    def __init__(self, lengths: dict[str, int]):
        super().__init__(f"series vectors have differing lengths: {lengths}")


class UnknownVariable(AggregationError):
    def __init__(self, name: str):
        super().__init__(f"variable {name!r} is not present in the dataset")
        self.name = name


@dataclass(frozen=True)
class WeightVector:
    """Convex weights over zones: nonnegative, summing to one."""

    weights: dict[str, float]

    def __post_init__(self) -> None:
        if not self.weights:
            raise EmptyZoneList()
        for zone, w in self.weights.items():
            if not (w >= 0):
                raise ValueError(f"weight for {zone!r} must be nonnegative, got {w}")
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {total!r}")


def build_weights(zones: Sequence[ZoneGeometry], method: AggregationMethod) -> WeightVector:
    """Weights over ``zones`` for the given method, keyed by zone name."""
    method = AggregationMethod(method)
    if not zones:
        raise EmptyZoneList()
    if method is AggregationMethod.SIMPLE:
        w = 1.0 / len(zones)
        return WeightVector({z.zone_name: w for z in zones})

    attr = "floor_area" if method is AggregationMethod.AREA_WEIGHTED else "volume"
    sizes = []
    for z in zones:
        size = getattr(z, attr, None)
        if size is None or not (size > 0):
            raise MissingGeometry(z.zone_name)
        sizes.append(size)
    total = sum(sizes)
    return WeightVector({z.zone_name: s / total for z, s in zip(zones, sizes)})


def aggregate_series(per_zone: Mapping[str, np.ndarray], weights: WeightVector) -> np.ndarray:
    """Per-timestep weighted combination ``out[t] = Σ_i w_i · x_i[t]``.

    The key sets of ``per_zone`` and ``weights`` must be identical (up to
    zone-name normalization) and all vectors the same length.
    """
    series_by_key = {zone_key(name): np.asarray(v, dtype=np.float64) for name, v in per_zone.items()}
    weights_by_key = {zone_key(name): w for name, w in weights.weights.items()}
    if series_by_key.keys() != weights_by_key.keys():
        missing = weights_by_key.keys() - series_by_key.keys()
        extra = series_by_key.keys() - weights_by_key.keys()
        raise KeyMismatch(sorted(missing), sorted(extra))

    lengths = {k: len(v) for k, v in series_by_key.items()}
    if len(set(lengths.values())) > 1:
        raise LengthMismatch(lengths)

    keys = sorted(series_by_key)  # fixed order: permutation invariance
    matrix = np.vstack([series_by_key[k] for k in keys])
    w = np.array([weights_by_key[k] for k in keys], dtype=np.float64)
    return w @ matrix


def weights_for_selection(
    method: AggregationMethod,
    geometry: Sequence[ZoneGeometry],
    group: Sequence[str],
) -> WeightVector:
    """Weights for one aggregation group, resolving names case-insensitively.

    For the simple average, zones missing from ``geometry`` are allowed
    (the method needs no dimensions); weighted methods raise
    :class:`MissingGeometry` for any unresolvable zone.
    """
    method = AggregationMethod(method)
    if not group:
        raise EmptyZoneList()
    by_key = {zone_key(g.zone_name): g for g in geometry}
    resolved: list[ZoneGeometry] = []
    names: list[str] = []
    for name in group:
        found = by_key.get(zone_key(name))
        if found is not None:
            resolved.append(found)
            names.append(found.zone_name)
        elif method is AggregationMethod.SIMPLE:
            names.append(name)
        else:
            raise MissingGeometry(name)
    if method is AggregationMethod.SIMPLE:
        w = 1.0 / len(names)
        return WeightVector({n: w for n in names})
    return build_weights(resolved, method)


def aggregated_geometry(
    geometry: Sequence[ZoneGeometry], spec: AggregationSpec
) -> dict[str, ZoneGeometry | None]:
    """Geometry of each aggregated zone: sums over its composite zones.

    Returns ``None`` for a group when any composite zone lacks geometry,
    so downstream weighted re-aggregation fails loudly instead of using a
    partial sum.
    """
    by_key = {zone_key(g.zone_name): g for g in geometry}
    out: dict[str, ZoneGeometry | None] = {}
    for name, members in spec.groups:
        parts = [by_key.get(zone_key(m)) for m in members]
        if any(p is None for p in parts):
            out[name] = None
        else:
            out[name] = ZoneGeometry(
                zone_name=name,
                floor_area=sum(p.floor_area for p in parts),
                volume=sum(p.volume for p in parts),
            )
    return out


def aggregate_dataset(
    tables: Mapping[str, VariableTable],
    geometry: Sequence[ZoneGeometry],
    spec: AggregationSpec,
    variable_selection: Iterable[str],
    sum_variables: Iterable[str] = (),
) -> dict[str, dict[str, VariableTable]]:
    """Apply an aggregation spec to a per-variable dataset.

    ``tables`` maps variable name to a :class:`VariableTable` whose
    columns are entity names.  Zone-kind variables are combined per group
    into a single column named after the aggregated zone; all other
    selected variables pass through unchanged under the reserved
    ``__building__`` group.  Variables named in ``sum_variables`` are
    combined by plain summation instead of a weighted mean (for extensive
    quantities such as loads).
    """
    selection = list(variable_selection)
    for name in selection:
        if name not in tables:
            raise UnknownVariable(name)
    summed = {zone_key(v) for v in sum_variables}

    result: dict[str, dict[str, VariableTable]] = {}
    for var_name in selection:
        table = tables[var_name]
        if classify_variable(var_name) is not SeriesKind.ZONE:
            result.setdefault(BUILDING_GROUP, {})[var_name] = table
            continue
        columns_by_key = {zone_key(c): c for c in table.columns}
        for group_name, members in spec.groups:
            member_cols = {}
            for member in members:
                col = columns_by_key.get(zone_key(member))
                if col is None:
                    raise KeyMismatch(missing=[member], extra=[])
                member_cols[col] = table.columns[col]
            if zone_key(var_name) in summed:
                combined = np.sum(np.vstack(list(member_cols.values())), axis=0)
            else:
                weights = weights_for_selection(spec.method, geometry, list(member_cols))
                combined = aggregate_series(member_cols, weights)
            result.setdefault(group_name, {})[var_name] = VariableTable(
                timestamps=table.timestamps, columns={group_name: combined}
            )
    return result
