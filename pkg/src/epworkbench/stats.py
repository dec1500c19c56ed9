"""Statistics and plot-ready payloads for the three analysis views.

``describe`` summarizes a single series (histogram, mean, sample
variance, range), ``scatter`` pairs two series on their shared
timestamps, and ``timeseries_slice`` restricts a multi-series dataset to
an inclusive date range.  ``render_static_plot`` writes PNG versions of
the corresponding figures for scripted reporting; the interactive
equivalents live in the web explorer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from typing import Mapping

import numpy as np

from epworkbench.domain import VariableTable


class StatsError(Exception):
    """Base class for statistics failures."""


class EmptySeries(StatsError):
    def __init__(self) -> None:
        super().__init__("series is empty after dropping non-finite values")


class NoOverlap(StatsError):
    def __init__(self) -> None:
        super().__init__("the two series share no timestamps")


class EmptyRange(StatsError):
    def __init__(self) -> None:
        super().__init__("no series has points inside the requested range")


class RenderFailure(StatsError):
    pass


@dataclass(frozen=True)
class DistributionSummary:
    """Essential statistics of one series plus an equal-width histogram."""

    count: int
    nonfinite_count: int
    mean: float
    variance: float
    minimum: float
    maximum: float
    value_range: float
    histogram: tuple[tuple[float, float, int], ...]


@dataclass(frozen=True)
class ScatterPayload:
    """Aligned (x, y) pairs at the timestamps both series share."""

    timestamps: tuple[datetime, ...]
    x_values: np.ndarray
    y_values: np.ndarray
    x_label: str = "x"
    y_label: str = "y"


def sturges_bins(n: int) -> int:
    """Default histogram bin count: ⌈log2 n⌉ + 1."""
    return max(1, math.ceil(math.log2(n)) + 1) if n > 0 else 1


def describe(series, bins: int | None = None) -> DistributionSummary:
    """Summarize a value vector, dropping (and counting) non-finite entries."""
    values = np.asarray(series, dtype=np.float64).ravel()
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        raise EmptySeries()
    nonfinite = int(values.size - finite.size)
    if bins is None:
        bins = sturges_bins(finite.size)
    if bins < 1:
        raise ValueError(f"bin count must be >= 1, got {bins}")
    counts, edges = np.histogram(finite, bins=bins)
    variance = float(np.var(finite, ddof=1)) if finite.size > 1 else 0.0
    return DistributionSummary(
        count=int(finite.size),
        nonfinite_count=nonfinite,
        mean=float(np.mean(finite)),
        variance=variance,
        minimum=float(np.min(finite)),
        maximum=float(np.max(finite)),
        value_range=float(np.max(finite) - np.min(finite)),
        histogram=tuple(
            (float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(len(counts))
        ),
    )


def _single_column(table: VariableTable) -> tuple[str, np.ndarray]:
    if len(table.columns) != 1:
        raise ValueError(f"expected a single-column table, got {sorted(table.columns)}")
    [(name, values)] = table.columns.items()
    return name, values


def scatter(x: VariableTable, y: VariableTable) -> ScatterPayload:
    """Inner-join two single-column series on timestamp, ascending in time."""
    x_label, x_values = _single_column(x)
    y_label, y_values = _single_column(y)
    y_index = {ts: i for i, ts in enumerate(y.timestamps)}
    shared = [(ts, i, y_index[ts]) for i, ts in enumerate(x.timestamps) if ts in y_index]
    if not shared:
        raise NoOverlap()
    timestamps = tuple(ts for ts, _, _ in shared)
    xs = np.array([x_values[i] for _, i, _ in shared], dtype=np.float64)
    ys = np.array([y_values[j] for _, _, j in shared], dtype=np.float64)
    return ScatterPayload(timestamps=timestamps, x_values=xs, y_values=ys, x_label=x_label, y_label=y_label)


def timeseries_slice(
    tables: Mapping[str, VariableTable], start: datetime, end: datetime
) -> dict[str, VariableTable]:
    """Restrict every series to [start, end], inclusive at both ends.

    Series keep independent lengths when their calendars differ; series
    with no points in range are dropped.  Raises :class:`EmptyRange`
    when nothing at all falls inside the window.
    """
    if start > end:
        raise ValueError(f"range start {start} is after end {end}")
    out: dict[str, VariableTable] = {}
    for name, table in tables.items():
        ts = table.timestamps
        lo = 0
        while lo < len(ts) and ts[lo] < start:
            lo += 1
        hi = len(ts)
        while hi > lo and ts[hi - 1] > end:
            hi -= 1
        if hi > lo:
            out[name] = VariableTable(
                timestamps=ts[lo:hi],
                columns={c: v[lo:hi] for c, v in table.columns.items()},
            )
    if not out:
        raise EmptyRange()
    return out


def render_static_plot(payload, kind: str, path) -> None:
    """Write a PNG figure for a distribution, scatter or timeseries payload.

    Output is deterministic for a fixed payload and size (no embedded
    timestamps), so repeated renders of the same data are byte-identical.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if kind not in ("distribution", "scatter", "timeseries"):
        raise RenderFailure(f"unknown plot kind {kind!r}")

    fig, ax = plt.subplots(figsize=(8, 4.5), dpi=100)
    try:
        if kind == "distribution":
            if not isinstance(payload, DistributionSummary) or not payload.histogram:
                raise RenderFailure("distribution plot needs a non-empty DistributionSummary")
            lefts = [lo for lo, _, _ in payload.histogram]
            widths = [hi - lo for lo, hi, _ in payload.histogram]
            counts = [n for _, _, n in payload.histogram]
            ax.bar(lefts, counts, width=widths, align="edge", edgecolor="black", linewidth=0.4)
            ax.set_ylabel("count")
            ax.set_title(
                f"mean={payload.mean:.4g}  variance={payload.variance:.4g}  range={payload.value_range:.4g}"
            )
        elif kind == "scatter":
            if not isinstance(payload, ScatterPayload) or len(payload.x_values) == 0:
                raise RenderFailure("scatter plot needs a non-empty ScatterPayload")
            ax.scatter(payload.x_values, payload.y_values, s=6)
            ax.set_xlabel(payload.x_label)
            ax.set_ylabel(payload.y_label)
        else:
            if not isinstance(payload, Mapping) or not payload:
                raise RenderFailure("timeseries plot needs a non-empty mapping of tables")
            for name, table in payload.items():
                for column, values in table.columns.items():
                    label = name if column == name else f"{name} ({column})"
                    ax.plot(table.timestamps, values, label=label, linewidth=0.8)
            ax.legend(fontsize=7)
            fig.autofmt_xdate()
        fig.savefig(path, format="png", metadata={"Software": "epworkbench"})
    except RenderFailure:
        raise
    except Exception as exc:
        raise RenderFailure(str(exc)) from exc
    finally:
        plt.close(fig)
