"""Shared fixtures: the standard 7-day synthetic run and stores seeded with it."""

import shutil

import pytest

from epworkbench import synth, workflow
from epworkbench.domain import BuildingRecord, PrototypeKind
from epworkbench.store import EnergyStore

OFFICE = BuildingRecord(
    prototype_kind=PrototypeKind.COMMERCIAL,
    prototype_name="Synthetic Small Office",
    energy_standard="ASHRAE 2013",
    climate_zone="5B",
)


@pytest.fixture(scope="session")
def fixture_spec():
    return synth.FixtureSpec(seed=7, n_zones=5, resolution=5, days=7, year=2023)


@pytest.fixture(scope="session")
def fixture_paths(fixture_spec, tmp_path_factory):
    out = tmp_path_factory.mktemp("fixture")
    return synth.generate_fixture(fixture_spec, out)


@pytest.fixture(scope="session")
def reference(fixture_spec):
    return synth.reference_values(fixture_spec)


@pytest.fixture(scope="session")
def _seeded_db(fixture_paths, tmp_path_factory):
    """A store file with the standard fixture ingested once, copied per test."""
    path = tmp_path_factory.mktemp("seed") / "seed.db"
    with EnergyStore(path) as store:
        result = workflow.ingest_files(
            store,
            idf_path=fixture_paths["idf"],
            output_path=fixture_paths["csv"],
            building=OFFICE,
            weather_file_location="seattle.epw",
            eio_path=fixture_paths["eio"],
        )
    return path, result


@pytest.fixture
def seeded_store(_seeded_db, tmp_path):
    """Fresh copy of the ingested store plus the ingest result."""
    src, result = _seeded_db
    dst = tmp_path / "store.db"
    shutil.copy(src, dst)
    store = EnergyStore(dst)
    yield store, result
    store.close()


@pytest.fixture
def empty_store(tmp_path):
    store = EnergyStore(tmp_path / "empty.db")
    yield store
    store.close()
