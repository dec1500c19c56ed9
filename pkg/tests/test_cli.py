"""CLI contract: subcommands, exit codes, --json output."""

import json

import numpy as np
import pytest

from epworkbench.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, main


@pytest.fixture
def run(capsys):
    def invoke(*argv):
        code = main(list(argv))
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return invoke


@pytest.fixture
def workdir(tmp_path):
    return {
        "store": str(tmp_path / "cli.db"),
        "fixture": str(tmp_path / "fx"),
        "tmp": tmp_path,
    }


def synth_args(workdir, **over):
    args = {"seed": 7, "zones": 5, "days": 7, "resolution": 5}
    args.update(over)
    return [
        "synth",
        "--seed", str(args["seed"]),
        "--zones", str(args["zones"]),
        "--days", str(args["days"]),
        "--resolution", str(args["resolution"]),
        "--out", workdir["fixture"],
    ]


def ingest_args(workdir):
    return [
        "--store", workdir["store"],
        "ingest",
        "--idf", f"{workdir['fixture']}/model.idf",
        "--eio", f"{workdir['fixture']}/eplusout.eio",
        "--output", f"{workdir['fixture']}/eplusout.csv",
        "--weather", "seattle.epw",
    ]


class TestRoundTrip:
    def test_synth_ingest_query_matches_reference(self, run, workdir, reference):
        assert run(*synth_args(workdir))[0] == EXIT_OK
        code, out, _ = run(*ingest_args(workdir), "--json")
        assert code == EXIT_OK
        ingest = json.loads(out)
        assert ingest["inserted"] == 70560

        code, out, _ = run(
            "--store", workdir["store"], "query",
            "--sim", str(ingest["simulation_id"]), "--json",
        )
        assert code == EXIT_OK
        catalog = json.loads(out)["variables"]
        assert len(catalog) == 35

        # values of the first catalog entry equal the fixture reference series
        by_key = {
            (d.variable_name, d.kind.value, d.entity): values
            for _, d, values in reference.series
        }
        first = catalog[0]
        code, out, _ = run(
            "--store", workdir["store"], "query",
            "--sim", str(ingest["simulation_id"]),
            "--vars", str(first["variable_id"]),
            "--range", "full", "--json",
        )
        assert code == EXIT_OK
        series = json.loads(out)["series"][0]
        expected = by_key[(first["variable_name"], first["kind"], first["entity"])]
        np.testing.assert_array_equal(np.array(series["values"]), expected)

    def test_aggregate_creates_single_zone(self, run, workdir):
        run(*synth_args(workdir))
        run(*ingest_args(workdir))
        code, out, _ = run(
            "--store", workdir["store"], "aggregate",
            "--sim", "1", "--method", "area_weighted",
            "--group", "Agg1=ZONE_1,ZONE_2,ZONE_3,ZONE_4,ZONE_5",
            "--json",
        )
        assert code == EXIT_OK
        payload = json.loads(out)
        assert list(payload["aggregated_zones"]) == ["Agg1"]
        assert payload["inserted"] == 6 * 2016

    def test_bench_storage_reports_reduction(self, run, workdir):
        run(*synth_args(workdir))
        run(*ingest_args(workdir))
        code, out, _ = run("--store", workdir["store"], "bench-storage", "--json")
        assert code == EXIT_OK
        report = json.loads(out)
        assert report["reduction_factor"] >= 3.0
        assert report["tables"]["timeseries"]["rows"] == 70560

    def test_export_writes_manifest(self, run, workdir):
        run(*synth_args(workdir))
        run(*ingest_args(workdir))
        dest = workdir["tmp"] / "export"
        code, out, _ = run(
            "--store", workdir["store"], "export", "--sim", "1", "--dest", str(dest)
        )
        assert code == EXIT_OK
        assert (dest / "manifest.json").exists()

    def test_plot_writes_png(self, run, workdir):
        run(*synth_args(workdir, days=1))
        run(*ingest_args(workdir))
        png = workdir["tmp"] / "out.png"
        code, _, _ = run(
            "--store", workdir["store"], "plot",
            "--sim", "1", "--kind", "distribution", "--vars", "1", "--out", str(png),
        )
        assert code == EXIT_OK
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_stats_distribution(self, run, workdir):
        run(*synth_args(workdir, days=1))
        run(*ingest_args(workdir))
        code, out, _ = run(
            "--store", workdir["store"], "stats",
            "--sim", "1", "--kind", "distribution", "--var", "1", "--json",
        )
        assert code == EXIT_OK
        assert json.loads(out)["count"] == 288


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, run):
        code, _, _ = run("synth", "--does-not-exist")
        assert code == EXIT_USAGE

    def test_unknown_subcommand_is_usage_error(self, run):
        code, _, _ = run("frobnicate")
        assert code == EXIT_USAGE

    def test_missing_input_file_is_io_error(self, run, workdir):
        code, _, err = run(
            "--store", workdir["store"], "ingest",
            "--idf", "/nonexistent.idf",
            "--output", "/nonexistent.csv",
            "--weather", "w.epw",
        )
        assert code == EXIT_IO
        assert "error" in err

    def test_validation_error_exit_one(self, run, workdir):
        run(*synth_args(workdir))
        run(*ingest_args(workdir))
        code, _, err = run(
            "--store", workdir["store"], "aggregate",
            "--sim", "1", "--method", "simple", "--group", "A=GHOST_ZONE",
        )
        assert code == EXIT_VALIDATION
        assert "GHOST_ZONE" in err

    def test_duplicate_ingest_exit_one(self, run, workdir):
        run(*synth_args(workdir))
        assert run(*ingest_args(workdir))[0] == EXIT_OK
        code, _, err = run(*ingest_args(workdir))
        assert code == EXIT_VALIDATION
        assert "already holds samples" in err

    def test_bad_range_exit_one(self, run, workdir):
        run(*synth_args(workdir, days=1))
        run(*ingest_args(workdir))
        code, _, _ = run(
            "--store", workdir["store"], "query", "--sim", "1", "--vars", "1",
            "--range", "2024-01-01T00:00:00,2023-01-01T00:00:00",
        )
        assert code == EXIT_VALIDATION

    def test_help_exits_zero(self, run):
        code, _, _ = run("--help")
        assert code == EXIT_OK
