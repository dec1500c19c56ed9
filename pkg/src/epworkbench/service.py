"""HTTP API for the workbench: catalog, ingestion, aggregation, query, stats.

Ingestion and aggregation run as asynchronous jobs with polling via
``GET /api/jobs/{id}`` because full-year files take a while; cheap
validation (file readability, IDF/EIO parse errors, duplicate
simulations, bad aggregation specs) happens synchronously so callers get
400/409 immediately.  Write jobs execute on a single worker thread,
honoring the store's one-writer contract.

Environment: ``STORE_DSN`` (store location), ``EPLUS_EXE`` (optional
external simulator), ``PORT`` (serve command).  Static UI assets, when
present, are served at ``/`` with the API under ``/api``.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from epworkbench import stats as stats_mod
from epworkbench import workflow
from epworkbench.domain import (
    AggregationMethod,
    AggregationSpec,
    BuildingRecord,
    PrototypeKind,
    SimulationRecord,
    validate_aggregation_spec,
    zone_key,
)
from epworkbench.parsers import ParseError, parse_eio, parse_idf
from epworkbench.store import EnergyStore, StoreError, UnknownSimulation, UnknownVariable


@dataclass
class Job:
    job_id: str
    phase: str = "pending"  # pending -> running -> done | failed
    progress: float = 0.0
    error: str | None = None
    result: dict | None = None

    def as_dict(self) -> dict:
        out = {"job_id": self.job_id, "phase": self.phase, "progress": self.progress}
        if self.error is not None:
            out["error"] = self.error
        if self.result is not None:
            out["result"] = self.result
        return out


class JobRegistry:
    """In-process job table with a single worker, so writes never overlap."""

    def __init__(self) -> None:
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()
        self._executor = ThreadPoolExecutor(max_workers=1)

    def submit(self, fn) -> Job:
        job = Job(job_id=uuid.uuid4().hex[:12])
        with self._lock:
            self._jobs[job.job_id] = job

        def run() -> None:
            self._update(job.job_id, phase="running", progress=0.0)
            try:
                result = fn()
                self._update(job.job_id, phase="done", progress=1.0, result=result)
            except Exception as exc:  # surfaced to the poller, never raised here
                self._update(job.job_id, phase="failed", error=f"{type(exc).__name__}: {exc}")

        self._executor.submit(run)
        return job

    def _update(self, job_id: str, **changes) -> None:
        with self._lock:
            job = self._jobs[job_id]
            for key, value in changes.items():
                setattr(job, key, value)

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)


class BuildingIn(BaseModel):
    prototype_kind: str
    prototype_name: str
    energy_standard: str = ""
    climate_zone: str = ""
    attributes: dict[str, str] = Field(default_factory=dict)


class IngestRequest(BaseModel):
    idf_path: str
    output_path: str
    eio_path: str | None = None
    weather_file_location: str
    schedule_name: str | None = None
    year: int = 2023
    building: BuildingIn


class GroupIn(BaseModel):
    name: str
    zones: list[str]


class AggregateRequest(BaseModel):
    simulation_id: int
    method: str
    groups: list[GroupIn]
    variables: list[str] | None = None
    sum_variables: list[str] = Field(default_factory=list)


class RunPeriodIn(BaseModel):
    begin_month: int = 1
    begin_day: int = 1
    end_month: int = 12
    end_day: int = 31


class SimulateRequest(BaseModel):
    idf_path: str
    epw_path: str
    building: BuildingIn
    timestep_per_hour: int | None = None
    run_period: RunPeriodIn | None = None
    variables: list[str] | None = None
    year: int = 2023


def _parse_instant(raw: str | None, name: str) -> datetime | None:
    if raw is None or raw == "":
        return None
    try:
        return datetime.fromisoformat(raw)
    except ValueError:
        raise HTTPException(status_code=400, detail=f"{name} is not an ISO-8601 instant: {raw!r}")


def _parse_ids(raw: str) -> list[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise HTTPException(status_code=400, detail=f"variable ids must be integers: {raw!r}")


def create_app(
    store: EnergyStore | None = None,
    store_dsn: str | None = None,
    static_dir: str | None = None,
    simulator_exe: str | None = None,
) -> FastAPI:
    """Build the API application around one store instance."""
    if store is None:
        store = EnergyStore(store_dsn or os.environ.get("STORE_DSN", "epworkbench.db"))
    if simulator_exe is None:
        simulator_exe = os.environ.get("EPLUS_EXE")
    jobs = JobRegistry()
    app = FastAPI(title="epworkbench", version="0.1.0")
    app.state.store = store
    app.state.jobs = jobs

    @app.exception_handler(StoreError)
    def _store_error(_, exc: StoreError):
        if isinstance(exc, (UnknownSimulation, UnknownVariable)):
            return JSONResponse(status_code=404, content={"detail": str(exc)})
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    # -- catalog -----------------------------------------------------

    @app.get("/api/simulations")
    def simulations() -> list[dict]:
        return [
            {
                "simulation_id": s.simulation_id,
                "building_id": s.building_id,
                "weather_file_location": s.weather_file_location,
                "time_resolution": s.time_resolution,
                "schedule_name": s.schedule_name,
            }
            for s in store.list_simulations()
        ]

    @app.get("/api/simulations/{simulation_id}/variables")
    def simulation_variables(simulation_id: int) -> list[dict]:
        try:
            listing = store.list_variables(simulation_id)
        except UnknownSimulation as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return [
            {
                "variable_id": vid,
                "variable_name": d.variable_name,
                "kind": d.kind.value,
                "entity": d.entity,
                "unit": d.unit,
                "frequency": d.frequency,
                "aggregated": store.is_aggregated_variable(vid),
            }
            for vid, d in listing
        ]

    # -- jobs ----------------------------------------------------------

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str) -> dict:
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return job.as_dict()

    # -- ingestion -------------------------------------------------------

    def _check_ingest(request: IngestRequest) -> BuildingRecord:
        for label, path in (
            ("idf_path", request.idf_path),
            ("output_path", request.output_path),
            ("eio_path", request.eio_path),
        ):
            if path and not os.path.isfile(path):
                raise HTTPException(status_code=400, detail=f"{label} is not a readable file: {path}")
        try:
            kind = PrototypeKind(request.building.prototype_kind)
        except ValueError:
            raise HTTPException(
                status_code=400,
                detail=f"prototype_kind must be one of {[k.value for k in PrototypeKind]}",
            )
        try:
            building = BuildingRecord(
                prototype_kind=kind,
                prototype_name=request.building.prototype_name,
                energy_standard=request.building.energy_standard,
                climate_zone=request.building.climate_zone,
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        try:
            idf = parse_idf(Path(request.idf_path).read_text())
            if request.eio_path:
                parse_eio(Path(request.eio_path).read_text())
        except ParseError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if not request.weather_file_location.strip():
            raise HTTPException(status_code=400, detail="MissingWeatherFile: weather_file_location is empty")

        schedule = request.schedule_name
        if schedule is None:
            schedule = idf.schedule_names[0] if idf.schedule_names else ""
        building_id = store.find_building(building)
        if building_id is not None:
            existing = store.find_simulation(
                SimulationRecord(
                    building_id=building_id,
                    weather_file_location=request.weather_file_location,
                    time_resolution=idf.time_resolution,
                    schedule_name=schedule,
                )
            )
            if existing is not None and store.sample_count(existing) > 0:
                raise HTTPException(
                    status_code=409,
                    detail=f"simulation {existing} already ingested for these inputs",
                )
        return building

    @app.post("/api/ingest", status_code=202)
    def ingest(request: IngestRequest) -> dict:
        building = _check_ingest(request)

        def run() -> dict:
            result = workflow.ingest_files(
                store,
                idf_path=request.idf_path,
                output_path=request.output_path,
                building=building,
                weather_file_location=request.weather_file_location,
                eio_path=request.eio_path,
                schedule_name=request.schedule_name,
                year=request.year,
                prototype_attributes=request.building.attributes,
            )
            return {
                "simulation_id": result.simulation_id,
                "building_id": result.building_id,
                "series_count": result.series_count,
                "step_count": result.step_count,
                "inserted": result.inserted,
                "skipped_nonfinite": result.skipped_nonfinite,
            }

        return jobs.submit(run).as_dict()

    # -- aggregation ------------------------------------------------------

    @app.post("/api/aggregate", status_code=202)
    def aggregate(request: AggregateRequest) -> dict:
        sim = store.get_simulation(request.simulation_id)  # 404 via handler
        try:
            method = AggregationMethod(request.method)
        except ValueError:
            raise HTTPException(
                status_code=400,
                detail=f"method must be one of {[m.value for m in AggregationMethod]}",
            )
        spec = AggregationSpec(
            method=method,
            groups=tuple((g.name, tuple(g.zones)) for g in request.groups),
        )
        zone_names = set()
        for _, descriptor in store.list_variables(request.simulation_id):
            if descriptor.kind.value == "zone" and descriptor.entity:
                zone_names.add(descriptor.entity)
        checked = validate_aggregation_spec(spec, zone_names or {""})
        if isinstance(checked, list):
            raise HTTPException(
                status_code=400, detail="; ".join(str(issue) for issue in checked)
            )
        if method is not AggregationMethod.SIMPLE:
            geometry = store.zone_geometry(sim.building_id)
            by_key = {zone_key(n): g for n, g in geometry.items()}
            for _, members in spec.groups:
                for member in members:
                    if by_key.get(zone_key(member)) is None:
                        raise HTTPException(
                            status_code=400,
                            detail=f"MissingGeometry: zone {member!r} has no floor area/volume "
                            f"(ingest an EIO or use the simple method)",
                        )

        def run() -> dict:
            result = workflow.aggregate_simulation(
                store,
                request.simulation_id,
                spec,
                variable_selection=request.variables,
                sum_variables=request.sum_variables,
            )
            return {
                "simulation_id": result.simulation_id,
                "aggregated_zones": result.aggregated_zone_ids,
                "variable_ids": result.variable_ids,
                "inserted": result.inserted,
            }

        return jobs.submit(run).as_dict()

    # -- series and stats ----------------------------------------------------

    def _series_payload(simulation_id: int, vids: list[int], start, end) -> dict:
        tables = store.query_series(simulation_id, vids, start, end)
        series = []
        for vid in vids:
            descriptor = store.variable_descriptor(vid)
            table = tables[vid]
            [(label, values)] = table.columns.items()
            series.append(
                {
                    "variable_id": vid,
                    "variable_name": descriptor.variable_name,
                    "kind": descriptor.kind.value,
                    "entity": descriptor.entity,
                    "unit": descriptor.unit,
                    "label": label,
                    "timestamps": [t.isoformat() for t in table.timestamps],
                    "values": [float(v) for v in values],
                }
            )
        return {"simulation_id": simulation_id, "series": series}

    @app.get("/api/series")
    def series(sim: int, vars: str, start: str | None = None, end: str | None = None) -> dict:
        lo = _parse_instant(start, "start")
        hi = _parse_instant(end, "end")
        if lo is not None and hi is not None and lo > hi:
            raise HTTPException(status_code=400, detail=f"start {start} is after end {end}")
        vids = _parse_ids(vars)
        if not vids:
            raise HTTPException(status_code=400, detail="vars must name at least one variable id")
        return _series_payload(sim, vids, lo, hi)

    @app.get("/api/stats/distribution")
    def distribution(
        sim: int,
        var: int,
        start: str | None = None,
        end: str | None = None,
        bins: int | None = None,
    ) -> dict:
        lo = _parse_instant(start, "start")
        hi = _parse_instant(end, "end")
        if lo is not None and hi is not None and lo > hi:
            raise HTTPException(status_code=400, detail=f"start {start} is after end {end}")
        table = store.query_series(sim, [var], lo, hi)[var]
        [(label, values)] = table.columns.items()
        descriptor = store.variable_descriptor(var)
        try:
            summary = stats_mod.describe(values, bins=bins)
        except stats_mod.EmptySeries as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {
            "simulation_id": sim,
            "variable_id": var,
            "variable_name": descriptor.variable_name,
            "entity": descriptor.entity,
            "unit": descriptor.unit,
            "label": label,
            "count": summary.count,
            "nonfinite_count": summary.nonfinite_count,
            "mean": summary.mean,
            "variance": summary.variance,
            "min": summary.minimum,
            "max": summary.maximum,
            "range": summary.value_range,
            "histogram": [
                {"lo": lo_edge, "hi": hi_edge, "count": count}
                for lo_edge, hi_edge, count in summary.histogram
            ],
        }

    @app.get("/api/stats/scatter")
    def scatter_stats(
        sim: int, x: int, y: int, start: str | None = None, end: str | None = None
    ) -> dict:
        lo = _parse_instant(start, "start")
        hi = _parse_instant(end, "end")
        if lo is not None and hi is not None and lo > hi:
            raise HTTPException(status_code=400, detail=f"start {start} is after end {end}")
        tables = store.query_series(sim, [x, y], lo, hi)
        try:
            payload = stats_mod.scatter(tables[x], tables[y])
        except stats_mod.NoOverlap as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        dx, dy = store.variable_descriptor(x), store.variable_descriptor(y)
        return {
            "simulation_id": sim,
            "x": {"variable_id": x, "variable_name": dx.variable_name, "entity": dx.entity, "unit": dx.unit},
            "y": {"variable_id": y, "variable_name": dy.variable_name, "entity": dy.entity, "unit": dy.unit},
            "timestamps": [t.isoformat() for t in payload.timestamps],
            "x_values": [float(v) for v in payload.x_values],
            "y_values": [float(v) for v in payload.y_values],
        }

    # -- external simulator adapter (feature-gated, untested in CI) -----------

    @app.post("/api/simulate", status_code=202)
    def simulate(request: SimulateRequest) -> dict:
        if not simulator_exe:
            raise HTTPException(
                status_code=503,
                detail="SimulatorNotConfigured: set EPLUS_EXE to enable /api/simulate",
            )
        if request.timestep_per_hour is not None and (
            request.timestep_per_hour not in range(1, 61) or 60 % request.timestep_per_hour
        ):
            raise HTTPException(
                status_code=400,
                detail=f"InvalidResolution: timestep {request.timestep_per_hour} does not divide 60",
            )
        if not os.path.isfile(request.idf_path):
            raise HTTPException(status_code=400, detail=f"idf_path is not a readable file: {request.idf_path}")
        if not os.path.isfile(request.epw_path):
            raise HTTPException(status_code=400, detail=f"epw_path is not a readable file: {request.epw_path}")
        try:
            kind = PrototypeKind(request.building.prototype_kind)
            record = BuildingRecord(
                prototype_kind=kind,
                prototype_name=request.building.prototype_name,
                energy_standard=request.building.energy_standard,
                climate_zone=request.building.climate_zone,
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

        def run() -> dict:
            workdir = Path(tempfile.mkdtemp(prefix="epwb_sim_"))
            idf_text = Path(request.idf_path).read_text()
            idf_text = _apply_overrides(idf_text, request)
            staged = workdir / "model.idf"
            staged.write_text(idf_text)
            cmd = [simulator_exe, "-w", request.epw_path, "-d", str(workdir), "-r", str(staged)]
            proc = subprocess.run(cmd, capture_output=True, text=True)
            if proc.returncode != 0:
                raise RuntimeError(f"simulator failed ({proc.returncode}): {proc.stderr[-500:]}")
            result = workflow.ingest_files(
                store,
                idf_path=staged,
                output_path=workdir / "eplusout.csv",
                building=record,
                weather_file_location=request.epw_path,
                eio_path=(workdir / "eplusout.eio") if (workdir / "eplusout.eio").exists() else None,
                year=request.year,
            )
            shutil.rmtree(workdir, ignore_errors=True)
            return {"simulation_id": result.simulation_id, "inserted": result.inserted}

        return jobs.submit(run).as_dict()

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def _apply_overrides(idf_text: str, request: SimulateRequest) -> str:
    """Rewrite the override-relevant IDF objects in a staged copy."""
    lines = [idf_text]
    if request.timestep_per_hour is not None:
        lines.append(f"\nTimestep, {request.timestep_per_hour};\n")
    if request.run_period is not None:
        rp = request.run_period
        lines.append(
            f"\nRunPeriod, Override Period, {rp.begin_month}, {rp.begin_day}, {rp.end_month}, {rp.end_day};\n"
        )
    for name in request.variables or []:
        lines.append(f"\nOutput:Variable, *, {name}, TimeStep;\n")
    return "".join(lines)


def main() -> None:
    """Entry point for ``python -m epworkbench.service``."""
    import uvicorn

    app = create_app(
        store_dsn=os.environ.get("STORE_DSN", "epworkbench.db"),
        static_dir=os.environ.get("STATIC_DIR"),
    )
    uvicorn.run(app, host="127.0.0.1", port=int(os.environ.get("PORT", "8000")))


if __name__ == "__main__":
    main()
