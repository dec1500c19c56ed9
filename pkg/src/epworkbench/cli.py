"""Command-line front door for the workbench.

Subcommands map 1:1 onto module operations: ``synth`` (fixture
generation), ``ingest``, ``aggregate``, ``query``, ``stats``, ``plot``,
``export``, ``bench-storage`` and ``serve``.  No business logic lives
here; every command is a thin adapter over the library.

Exit codes: 0 success, 1 validation error, 2 I/O error, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime

from epworkbench import stats as stats_mod
from epworkbench import synth, workflow
from epworkbench.aggregation import AggregationError
from epworkbench.domain import AggregationMethod, AggregationSpec, BuildingRecord, PrototypeKind
from epworkbench.parsers import ParseError
from epworkbench.store import EnergyStore, StorageUnavailable, StoreError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_USAGE = 64


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epworkbench", description=__doc__)
    parser.add_argument(
        "--store",
        default=os.environ.get("STORE_DSN", "epworkbench.db"),
        help="store location (or STORE_DSN env var)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a deterministic pseudo-EnergyPlus fixture")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--zones", type=int, default=5)
    p.add_argument("--days", type=int, default=7)
    p.add_argument("--resolution", type=int, default=5, help="minutes per timestep")
    p.add_argument("--year", type=int, default=2023)
    p.add_argument("--out", default="fixture", help="output directory")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("ingest", help="parse simulation files into the store")
    p.add_argument("--idf", required=True)
    p.add_argument("--output", required=True, help="tabular output csv")
    p.add_argument("--eio")
    p.add_argument("--weather", required=True, help="weather file location to record")
    p.add_argument("--schedule", default=None)
    p.add_argument("--prototype-kind", default="commercial", choices=[k.value for k in PrototypeKind])
    p.add_argument("--prototype-name", default="Synthetic Office")
    p.add_argument("--standard", default="ASHRAE 2013")
    p.add_argument("--climate", default="5B")
    p.add_argument("--year", type=int, default=2023)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("aggregate", help="combine composite zones into aggregated zones")
    p.add_argument("--sim", type=int, required=True)
    p.add_argument("--method", default="simple", choices=[m.value for m in AggregationMethod])
    p.add_argument(
        "--group",
        action="append",
        required=True,
        metavar="NAME=Z1,Z2,...",
        help="aggregated zone definition; repeatable",
    )
    p.add_argument("--variables", help="comma-separated variable names (default: all)")
    p.add_argument("--sum", action="append", default=[], metavar="VARIABLE",
                   help="combine this variable by summation instead of weighted mean")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("query", help="list variables or fetch series values")
    p.add_argument("--sim", type=int, required=True)
    p.add_argument("--vars", help="comma-separated variable ids (omit to list the catalog)")
    p.add_argument("--range", default="full", help="'full' or 'START,END' (ISO-8601, inclusive)")
    p.add_argument("--limit", type=int, default=0, help="print at most N points per series (0 = all)")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("stats", help="distribution or scatter statistics")
    p.add_argument("--sim", type=int, required=True)
    p.add_argument("--kind", required=True, choices=["distribution", "scatter"])
    p.add_argument("--var", type=int, help="variable id (distribution)")
    p.add_argument("--x", type=int, help="x variable id (scatter)")
    p.add_argument("--y", type=int, help="y variable id (scatter)")
    p.add_argument("--bins", type=int)
    p.add_argument("--range", default="full")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("plot", help="render a static PNG figure")
    p.add_argument("--sim", type=int, required=True)
    p.add_argument("--kind", required=True, choices=["distribution", "scatter", "timeseries"])
    p.add_argument("--vars", required=True, help="variable ids: 1 (distribution), 2 (scatter), n (timeseries)")
    p.add_argument("--range", default="full")
    p.add_argument("--bins", type=int)
    p.add_argument("--out", required=True, help="output PNG path")

    p = sub.add_parser("export", help="write the nested archive for a simulation")
    p.add_argument("--sim", type=int, required=True)
    p.add_argument("--dest", required=True)
    p.add_argument("--aggregated", action="store_true", help="export the aggregation-shaped archive")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("bench-storage", help="measure store footprint vs naive nested export")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("serve", help="run the HTTP API (and web UI when built)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=int(os.environ.get("PORT", "8000")))
    p.add_argument("--static", default=os.environ.get("STATIC_DIR"))

    return parser


def _parse_range(raw: str) -> tuple[datetime | None, datetime | None]:
    if raw == "full":
        return None, None
    try:
        start_raw, _, end_raw = raw.partition(",")
        start = datetime.fromisoformat(start_raw.strip()) if start_raw.strip() else None
        end = datetime.fromisoformat(end_raw.strip()) if end_raw.strip() else None
    except ValueError:
        raise ValueError(f"--range must be 'full' or 'START,END' ISO instants, got {raw!r}")
    if start is not None and end is not None and start > end:
        raise ValueError(f"range start {start} is after end {end}")
    return start, end


def _parse_groups(raw_groups: list[str]) -> tuple[tuple[str, tuple[str, ...]], ...]:
    groups = []
    for raw in raw_groups:
        name, eq, members = raw.partition("=")
        if not eq or not name.strip():
            raise ValueError(f"--group must look like NAME=Z1,Z2,... got {raw!r}")
        zones = tuple(z.strip() for z in members.split(",") if z.strip())
        groups.append((name.strip(), zones))
    return tuple(groups)


def _emit(args, payload: dict, text_lines: list[str]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=1))
    else:
        for line in text_lines:
            print(line)


def _cmd_synth(args) -> int:
    spec = synth.FixtureSpec(
        seed=args.seed, n_zones=args.zones, resolution=args.resolution, days=args.days, year=args.year
    )
    paths = synth.generate_fixture(spec, args.out)
    payload = {role: str(path) for role, path in paths.items()}
    payload["steps"] = spec.steps
    _emit(args, payload, [f"{role}: {path}" for role, path in paths.items()] + [f"steps: {spec.steps}"])
    return EXIT_OK


def _cmd_ingest(args, store: EnergyStore) -> int:
    building = BuildingRecord(
        prototype_kind=PrototypeKind(args.prototype_kind),
        prototype_name=args.prototype_name,
        energy_standard=args.standard,
        climate_zone=args.climate,
    )
    result = workflow.ingest_files(
        store,
        idf_path=args.idf,
        output_path=args.output,
        building=building,
        weather_file_location=args.weather,
        eio_path=args.eio,
        schedule_name=args.schedule,
        year=args.year,
    )
    payload = {
        "simulation_id": result.simulation_id,
        "building_id": result.building_id,
        "series_count": result.series_count,
        "step_count": result.step_count,
        "inserted": result.inserted,
        "skipped_nonfinite": result.skipped_nonfinite,
    }
    _emit(
        args,
        payload,
        [
            f"simulation {result.simulation_id} (building {result.building_id}): "
            f"{result.inserted} samples over {result.series_count} series × {result.step_count} steps"
        ],
    )
    return EXIT_OK


def _cmd_aggregate(args, store: EnergyStore) -> int:
    spec = AggregationSpec(method=AggregationMethod(args.method), groups=_parse_groups(args.group))
    selection = [v.strip() for v in args.variables.split(",")] if args.variables else None
    result = workflow.aggregate_simulation(
        store, args.sim, spec, variable_selection=selection, sum_variables=args.sum
    )
    payload = {
        "simulation_id": result.simulation_id,
        "aggregated_zones": result.aggregated_zone_ids,
        "variable_ids": result.variable_ids,
        "inserted": result.inserted,
    }
    lines = [
        f"aggregated zone {name!r} -> zone id {zid}"
        for name, zid in result.aggregated_zone_ids.items()
    ] + [f"inserted {result.inserted} aggregated samples"]
    _emit(args, payload, lines)
    return EXIT_OK


def _cmd_query(args, store: EnergyStore) -> int:
    start, end = _parse_range(args.range)
    if not args.vars:
        listing = store.list_variables(args.sim)
        payload = {
            "simulation_id": args.sim,
            "variables": [
                {
                    "variable_id": vid,
                    "variable_name": d.variable_name,
                    "kind": d.kind.value,
                    "entity": d.entity,
                    "unit": d.unit,
                }
                for vid, d in listing
            ],
        }
        lines = [
            f"{vid:4d}  {d.kind.value:8s}  {d.entity or '-':24s}  {d.variable_name} [{d.unit}]"
            for vid, d in listing
        ]
        _emit(args, payload, lines)
        return EXIT_OK

    vids = [int(v) for v in args.vars.split(",") if v.strip()]
    tables = store.query_series(args.sim, vids, start, end)
    payload = {"simulation_id": args.sim, "series": []}
    lines = []
    for vid in vids:
        table = tables[vid]
        [(label, values)] = table.columns.items()
        payload["series"].append(
            {
                "variable_id": vid,
                "label": label,
                "timestamps": [t.isoformat() for t in table.timestamps],
                "values": [float(v) for v in values],
            }
        )
        lines.append(f"variable {vid} ({label}): {len(values)} points")
        shown = zip(table.timestamps, values)
        if args.limit:
            shown = list(shown)[: args.limit]
        for instant, value in shown:
            lines.append(f"  {instant.isoformat()}  {float(value)!r}")
    _emit(args, payload, lines)
    return EXIT_OK


def _cmd_stats(args, store: EnergyStore) -> int:
    start, end = _parse_range(args.range)
    if args.kind == "distribution":
        if args.var is None:
            raise ValueError("--var is required for distribution stats")
        table = store.query_series(args.sim, [args.var], start, end)[args.var]
        [(label, values)] = table.columns.items()
        summary = stats_mod.describe(values, bins=args.bins)
        payload = {
            "variable_id": args.var,
            "label": label,
            "count": summary.count,
            "mean": summary.mean,
            "variance": summary.variance,
            "min": summary.minimum,
            "max": summary.maximum,
            "range": summary.value_range,
            "histogram": [[lo, hi, n] for lo, hi, n in summary.histogram],
        }
        lines = [
            f"{label}: n={summary.count} mean={summary.mean:.6g} variance={summary.variance:.6g} "
            f"min={summary.minimum:.6g} max={summary.maximum:.6g} range={summary.value_range:.6g}"
        ]
        _emit(args, payload, lines)
        return EXIT_OK

    if args.x is None or args.y is None:
        raise ValueError("--x and --y are required for scatter stats")
    tables = store.query_series(args.sim, [args.x, args.y], start, end)
    payload_obj = stats_mod.scatter(tables[args.x], tables[args.y])
    payload = {
        "x_label": payload_obj.x_label,
        "y_label": payload_obj.y_label,
        "pairs": len(payload_obj.x_values),
        "x_values": [float(v) for v in payload_obj.x_values],
        "y_values": [float(v) for v in payload_obj.y_values],
    }
    _emit(args, payload, [f"{payload_obj.x_label} vs {payload_obj.y_label}: {payload['pairs']} pairs"])
    return EXIT_OK


def _cmd_plot(args, store: EnergyStore) -> int:
    start, end = _parse_range(args.range)
    vids = [int(v) for v in args.vars.split(",") if v.strip()]
    tables = store.query_series(args.sim, vids, start, end)
    if args.kind == "distribution":
        if len(vids) != 1:
            raise ValueError("distribution plots take exactly one variable id")
        [(_, values)] = tables[vids[0]].columns.items()
        payload = stats_mod.describe(values, bins=args.bins)
    elif args.kind == "scatter":
        if len(vids) != 2:
            raise ValueError("scatter plots take exactly two variable ids")
        payload = stats_mod.scatter(tables[vids[0]], tables[vids[1]])
    else:
        named = {}
        for vid in vids:
            descriptor = store.variable_descriptor(vid)
            named[descriptor.entity or descriptor.variable_name] = tables[vid]
        payload = named
    stats_mod.render_static_plot(payload, args.kind, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_export(args, store: EnergyStore) -> int:
    manifest = store.export_nested(args.sim, args.dest, aggregated=args.aggregated)
    _emit(args, {"manifest": str(manifest)}, [f"manifest: {manifest}"])
    return EXIT_OK


def _cmd_bench_storage(args, store: EnergyStore) -> int:
    report = store.storage_report()
    payload = {
        "tables": {name: {"rows": s.rows, "bytes": s.bytes} for name, s in report.tables.items()},
        "total_bytes": report.total_bytes,
        "sample_rows": report.sample_rows,
        "naive_bytes": report.naive_bytes,
        "reduction_factor": report.reduction_factor,
    }
    lines = [f"{name:32s} rows={s.rows:10d} bytes={s.bytes:10d}" for name, s in report.tables.items()]
    lines += [
        f"{'store total':32s} bytes={report.total_bytes}",
        f"{'naive nested export':32s} bytes={report.naive_bytes}",
        f"reduction factor: {report.reduction_factor:.2f}",
    ]
    _emit(args, payload, lines)
    return EXIT_OK


def _cmd_serve(args, store: EnergyStore) -> int:
    import uvicorn

    from epworkbench.service import create_app

    app = create_app(store=store, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    try:
        if args.command == "synth":
            return _cmd_synth(args)
        store = EnergyStore(args.store)
        try:
            if args.command == "ingest":
                return _cmd_ingest(args, store)
            if args.command == "aggregate":
                return _cmd_aggregate(args, store)
            if args.command == "query":
                return _cmd_query(args, store)
            if args.command == "stats":
                return _cmd_stats(args, store)
            if args.command == "plot":
                return _cmd_plot(args, store)
            if args.command == "export":
                return _cmd_export(args, store)
            if args.command == "bench-storage":
                return _cmd_bench_storage(args, store)
            if args.command == "serve":
                return _cmd_serve(args, store)
        finally:
            store.close()
    except StorageUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OSError, synth.IoFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ParseError, StoreError, AggregationError, stats_mod.StatsError,
            workflow.WorkflowError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
