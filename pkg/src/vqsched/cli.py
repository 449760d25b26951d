"""Command line entry point.

Exit codes: 0 on success, 1 on usage or IO errors, 2 when an invariant or
acceptance check fails.
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple

import toml
import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from vqsched.bench import (
    OracleSummary,
    RankTable,
    Report,
    compare_strategies,
    load_scenario,
    oracle_ga,
    oracle_replay,
    parse_report,
    run_scenario,
    write_outputs,
)
from vqsched.exceptions import SchedulingError
from vqsched.logs import configure_logging
from vqsched.workload import WorkloadConfig, generate_stream, save_stream

EXIT_USAGE = 1
EXIT_CHECK = 2

app = typer.Typer(help="Differentiated SLA-penalty scheduling over virtual queues.", no_args_is_help=True)
console = Console()
logger = logging.getLogger(__name__)


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="Log debug output.")):
    configure_logging(logging.DEBUG if verbose else logging.INFO)


def _fail(message: str, code: int = EXIT_USAGE) -> typer.Exit:
    console.print(f"[red]error:[/red] {message}")
    return typer.Exit(code=code)


def _load(scenario: Path, seed: Optional[int], replications: Optional[int]):
    try:
        loaded = load_scenario(scenario)
    except (OSError, toml.TomlDecodeError, ValidationError) as error:
        raise _fail(f"cannot load scenario {scenario}: {error}")
    updates = {}
    if seed is not None:
        updates["workload"] = loaded.workload.model_copy(update={"seed": seed})
    if replications is not None:
        updates["replications"] = replications
    return loaded.model_copy(update=updates) if updates else loaded


def _link(text: str) -> Tuple[str, str]:
    better, sep, worse = text.partition(">")
    if not sep or not better.strip() or not worse.strip():
        raise _fail(f"significant link '{text}' is not of the form better>worse")
    return better.strip(), worse.strip()


@app.command()
def generate(
    out: Path = typer.Option(..., "--out", help="Stream file to write (JSON lines)."),
    scenario: Optional[Path] = typer.Option(None, "--scenario", help="Take the workload from a scenario."),
    seed: Optional[int] = typer.Option(None, "--seed", min=0),
    tiers: int = typer.Option(1, "--tiers", min=1),
    resources: int = typer.Option(1, "--resources", min=1),
    jobs: int = typer.Option(25, "--jobs", min=1),
    arrivals: str = typer.Option("batch", "--arrivals", help="batch or poisson"),
):
    """Draw a job stream and save it."""
    if scenario is not None:
        config = _load(scenario, seed, None).workload
    else:
        try:
            config = WorkloadConfig(
                n_tiers=tiers,
                n_resources=resources,
                n_jobs=jobs,
                seed=seed or 0,
                arrival_process=arrivals,
            )
        except ValidationError as error:
            raise _fail(str(error))
    try:
        path = save_stream(generate_stream(config), out)
    except OSError as error:
        raise _fail(f"cannot write {out}: {error}")
    console.print(f"wrote {config.n_jobs} jobs to {path}")


def summary_table(report: Report) -> Table:
    table = Table(title=f"{report.scenario} ({report.objective})")
    for column in ("strategy", "runs", "failed", "initial", "enhanced", "improvement %"):
        table.add_column(column, justify="left" if column == "strategy" else "right")
    for strategy in report.strategies:
        cells = [c for c in report.cells if c.strategy == strategy]
        rows = [c.system for c in cells if c.error is None and c.system is not None]
        failed = len(cells) - len(rows)
        if rows:
            initial = sum(r.initial_cost for r in rows) / len(rows)
            enhanced = sum(r.enhanced_cost for r in rows) / len(rows)
            improvement = sum(r.improvement for r in rows) / len(rows)
            table.add_row(strategy, str(len(cells)), str(failed), f"{initial:.1f}", f"{enhanced:.1f}", f"{improvement:.2f}")
        else:
            table.add_row(strategy, str(len(cells)), str(failed), "-", "-", "-")
    return table


def rank_table(ranks: RankTable) -> Table:
    table = Table(title=f"mean enhanced {ranks.metric}")
    table.add_column("rank", justify="right")
    table.add_column("strategy")
    table.add_column("mean", justify="right")
    table.add_column("runs", justify="right")
    for rank in ranks.ranks:
        table.add_row(str(rank.rank), rank.strategy, f"{rank.mean:.1f}", str(rank.replications))
    return table


def ordering_table(ranks: RankTable) -> Table:
    table = Table(title="expected ordering")
    for column in ("better", "worse", "holds", "p-value", "significant", "required"):
        table.add_column(column)
    for check in ranks.ordering:
        table.add_row(
            check.better,
            check.worse,
            str(check.holds),
            f"{check.p_value:.3g}",
            str(check.significant),
            str(check.required),
        )
    return table


@app.command()
def run(
    scenario: Path = typer.Option(..., "--scenario"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Override the workload seed."),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory."),
    format: Optional[str] = typer.Option(None, "--format", help="csv or jsonl"),
    replications: Optional[int] = typer.Option(None, "--replications", min=1),
    workers: Optional[int] = typer.Option(None, "--workers", min=1),
):
    """Run a scenario and write its report."""
    loaded = _load(scenario, seed, replications)
    report_format = format or loaded.outputs.format
    if report_format not in ("csv", "jsonl"):
        raise _fail(f"unknown format '{report_format}'")
    report = run_scenario(loaded, workers)
    try:
        paths = write_outputs(report, loaded, out or Path(loaded.outputs.directory), report_format)
    except OSError as error:
        raise _fail(str(error))
    console.print(summary_table(report))
    for path in paths:
        console.print(f"wrote {path}")
    failed = [c for c in report.cells if c.error is not None]
    if failed:
        raise _fail(f"{len(failed)} cell(s) failed", EXIT_CHECK)


@app.command()
def compare(
    reports: List[Path] = typer.Argument(..., help="Report files to pool."),
    scenario: Optional[Path] = typer.Option(None, "--scenario", help="Take expected order and significance from a scenario."),
    expected: Optional[str] = typer.Option(None, "--expected", help="Comma-separated strategies, best first."),
    significant: Optional[str] = typer.Option(
        None, "--significant", help="Comma-separated better>worse links that must be significant; all by default."
    ),
    metric: str = typer.Option("cost", "--metric", help="cost, penalty or time"),
    significance: float = typer.Option(0.05, "--significance"),
):
    """Rank strategies across replications and check an expected ordering."""
    if metric not in ("cost", "penalty", "time"):
        raise _fail(f"unknown metric '{metric}'")
    order: List[str] = []
    links: Optional[List[Tuple[str, str]]] = None
    if scenario is not None:
        loaded = _load(scenario, None, None)
        order, significance = loaded.expected_order, loaded.significance
        links = loaded.significant_links
    if expected:
        order = [s.strip() for s in expected.split(",") if s.strip()]
    if significant:
        links = [_link(text) for text in significant.split(",") if text.strip()]
    try:
        parsed = [parse_report(path) for path in reports]
    except (OSError, ValueError) as error:
        raise _fail(f"cannot read report: {error}")
    pooled = Report(scenario=parsed[0].scenario, objective=parsed[0].objective, cells=[c for r in parsed for c in r.cells])
    try:
        ranks = compare_strategies(pooled, metric, order, significance, links)
    except SchedulingError as error:
        raise _fail(str(error))
    console.print(rank_table(ranks))
    if ranks.ordering:
        console.print(ordering_table(ranks))
        broken = [check for check in ranks.ordering if not check.holds]
        if broken:
            for check in broken:
                logger.error(
                    "%s <= %s does not hold (p=%.3g, significance required: %s)",
                    check.better, check.worse, check.p_value, check.required,
                )
            raise _fail("expected ordering does not hold", EXIT_CHECK)


@app.command()
def oracle(
    seed: int = typer.Option(0, "--seed", min=0),
    instances: int = typer.Option(100, "--instances", min=0, help="Brute-force instances."),
    runs: int = typer.Option(200, "--runs", min=0, help="Simulator replay runs."),
    generations: int = typer.Option(200, "--generations", min=1),
):
    """Check the search against enumeration and the simulator against replay."""
    summary = OracleSummary()
    oracle_ga(seed, instances, generations, summary=summary)
    oracle_replay(seed, runs, summary=summary)
    console.print(
        f"search: {summary.optimal}/{summary.instances} optimal, "
        f"{summary.within_tolerance}/{summary.instances} within 5%, worst gap {summary.worst_gap:.2%}"
    )
    console.print(f"replay: {summary.runs - len(summary.mismatches)}/{summary.runs} traces identical")
    for mismatch in summary.mismatches[:10]:
        console.print(f"  {mismatch}")
    if not summary.passed():
        raise _fail("oracle check failed", EXIT_CHECK)


if __name__ == "__main__":
    app()
