from pathlib import Path

from typer.testing import CliRunner

from vqsched.bench import EntityRow, Report, ReportCell, emit, parse_report
from vqsched.cli import app
from vqsched.workload import load_stream

ASSETS = Path(__file__).parent / "assets"

runner = CliRunner()


def report_file(path, values, format="csv"):
    cells = [
        ReportCell(
            strategy=strategy,
            replication=r,
            seed=r,
            rows=[EntityRow(entity="system", initial_cost=cost, enhanced_cost=cost)],
        )
        for strategy, costs in values.items()
        for r, cost in enumerate(costs)
    ]
    return emit(Report(scenario="cli", cells=cells), path, format)


class TestGenerate:
    """Stream files from the command line."""

    def test_writes_stream(self, tmp_path):
        out = tmp_path / "stream.jsonl"
        result = runner.invoke(app, ["generate", "--out", str(out), "--tiers", "2", "--jobs", "5", "--seed", "9"])
        assert result.exit_code == 0, result.output
        stream = load_stream(out)
        assert stream.n_tiers == 2
        assert len(stream.jobs) == 5

    def test_workload_from_scenario(self, tmp_path):
        out = tmp_path / "stream.jsonl"
        result = runner.invoke(app, ["generate", "--out", str(out), "--scenario", str(ASSETS / "scenario.toml")])
        assert result.exit_code == 0, result.output
        assert len(load_stream(out).jobs) == 8

    def test_bad_arrival_process(self, tmp_path):
        result = runner.invoke(app, ["generate", "--out", str(tmp_path / "s.jsonl"), "--arrivals", "bursty"])
        assert result.exit_code == 1


class TestRun:
    """Scenario runs."""

    def test_writes_report(self, tmp_path):
        result = runner.invoke(
            app,
            ["run", "--scenario", str(ASSETS / "scenario.toml"), "--out", str(tmp_path), "--replications", "1"],
        )
        assert result.exit_code == 0, result.output
        report = parse_report(tmp_path / "tiny-backlog.csv")
        assert report.strategies == ["fcfs", "ga:tier:waiting"]
        assert list(tmp_path.glob("*.convergence.csv"))

    def test_jsonl_format(self, tmp_path):
        result = runner.invoke(
            app,
            [
                "run",
                "--scenario", str(ASSETS / "scenario.toml"),
                "--out", str(tmp_path),
                "--replications", "1",
                "--format", "jsonl",
            ],
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "tiny-backlog.jsonl").read_text().startswith("{")

    def test_missing_scenario(self, tmp_path):
        result = runner.invoke(app, ["run", "--scenario", str(tmp_path / "absent.toml")])
        assert result.exit_code == 1

    def test_invalid_scenario(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text('name = "bad"\nstrategies = ["fifo"]\n\n[workload]\nn_jobs = 4\n')
        result = runner.invoke(app, ["run", "--scenario", str(path)])
        assert result.exit_code == 1

    def test_unknown_format(self, tmp_path):
        result = runner.invoke(
            app, ["run", "--scenario", str(ASSETS / "scenario.toml"), "--out", str(tmp_path), "--format", "xml"]
        )
        assert result.exit_code == 1

    def test_failed_cells_exit_two(self, tmp_path):
        path = tmp_path / "drained.toml"
        path.write_text(
            'name = "drained"\nstrategies = ["fcfs"]\nreplications = 1\nbacklog = 3\n\n'
            "[workload]\nn_jobs = 3\n"
        )
        result = runner.invoke(app, ["run", "--scenario", str(path), "--out", str(tmp_path)])
        assert result.exit_code == 2
        assert parse_report(tmp_path / "drained.csv").cells[0].error


class TestCompare:
    """Ranking report files."""

    def test_ordering_holds(self, tmp_path):
        path = report_file(tmp_path / "r.csv", {"ga": [1.0 + r for r in range(10)], "wrr": [5.0 + r for r in range(10)]})
        result = runner.invoke(app, ["compare", str(path), "--expected", "ga,wrr"])
        assert result.exit_code == 0, result.output

    def test_ordering_fails(self, tmp_path):
        path = report_file(tmp_path / "r.csv", {"ga": [1.0 + r for r in range(10)], "wrr": [5.0 + r for r in range(10)]})
        result = runner.invoke(app, ["compare", str(path), "--expected", "wrr,ga"])
        assert result.exit_code == 2

    def test_insignificant_link_fails(self, tmp_path):
        ga = [float(r) for r in range(10)]
        wlc = [r + (5.0 if r < 6 else -1.0) for r in range(10)]
        path = report_file(tmp_path / "r.csv", {"ga": ga, "wlc": wlc})
        result = runner.invoke(app, ["compare", str(path), "--expected", "ga,wlc"])
        assert result.exit_code == 2

    def test_only_named_links_need_significance(self, tmp_path):
        ga = [float(r) for r in range(10)]
        wlc = [r + (5.0 if r < 6 else -1.0) for r in range(10)]
        wrr = [r + 20.0 for r in range(10)]
        path = report_file(tmp_path / "r.csv", {"ga": ga, "wlc": wlc, "wrr": wrr})
        args = ["compare", str(path), "--expected", "ga,wlc,wrr", "--significant", "wlc>wrr"]
        assert runner.invoke(app, args).exit_code == 0
        args[-1] = "ga>wlc"
        assert runner.invoke(app, args).exit_code == 2

    def test_malformed_link(self, tmp_path):
        path = report_file(tmp_path / "r.csv", {"ga": [1.0] * 10, "wrr": [2.0] * 10})
        result = runner.invoke(app, ["compare", str(path), "--expected", "ga,wrr", "--significant", "ga-wrr"])
        assert result.exit_code == 1

    def test_pools_several_files(self, tmp_path):
        first = report_file(tmp_path / "a.csv", {"ga": [1.0] * 5, "wrr": [2.0] * 5})
        second = report_file(tmp_path / "b.jsonl", {"ga": [1.0] * 10, "wrr": [2.0] * 10}, "jsonl")
        result = runner.invoke(app, ["compare", str(first), str(second), "--expected", "ga,wrr"])
        assert result.exit_code == 0, result.output

    def test_too_few_replications(self, tmp_path):
        path = report_file(tmp_path / "r.csv", {"ga": [1.0] * 3, "wrr": [2.0] * 3})
        result = runner.invoke(app, ["compare", str(path)])
        assert result.exit_code == 1

    def test_unknown_metric(self, tmp_path):
        path = report_file(tmp_path / "r.csv", {"ga": [1.0] * 10, "wrr": [2.0] * 10})
        result = runner.invoke(app, ["compare", str(path), "--metric", "makespan"])
        assert result.exit_code == 1


class TestOracle:
    """Exit status of the oracle checks."""

    def test_passes(self, mocker):
        def exact(seed, instances, generations, summary):
            summary.instances = summary.optimal = summary.within_tolerance = instances
            return summary

        mocker.patch("vqsched.cli.oracle_ga", side_effect=exact)
        replay = mocker.patch("vqsched.cli.oracle_replay")
        result = runner.invoke(app, ["oracle", "--instances", "4", "--runs", "3"])
        assert result.exit_code == 0, result.output
        assert replay.call_args.args[:2] == (0, 3)

    def test_replay_mismatch_fails(self, mocker):
        def mismatched(seed, runs, summary):
            summary.runs = runs
            summary.mismatches.append("run 0: job 1 differs")
            return summary

        mocker.patch("vqsched.cli.oracle_ga")
        mocker.patch("vqsched.cli.oracle_replay", side_effect=mismatched)
        result = runner.invoke(app, ["oracle", "--instances", "0", "--runs", "1"])
        assert result.exit_code == 2
