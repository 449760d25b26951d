"""Scenario runner, reports and strategy comparison.

A scenario is a TOML document::

    name = "single-tier-backlog"
    strategies = ["fcfs", "ga:tier:waiting"]
    replications = 30
    mode = "snapshot"
    backlog = 22

    [workload]
    n_tiers = 1
    n_resources = 3
    n_jobs = 25

    [ga]
    generations = 1000

Each (strategy, replication) cell records an initial and an enhanced
outcome for the system, every tier and every queue. In ``snapshot`` mode
the initial outcome is the dispatched backlog as queued and the enhanced
one is the strategy's reordering of it. In ``stream`` mode both are full
simulations, without and with reschedule epochs.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
import toml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.stats import binomtest

from vqsched.exceptions import InsufficientReplicationsError, OracleMismatchError, SchedulingError
from vqsched.ga import GAConfig, GenerationStat, brute_force_best, evolve, export_convergence
from vqsched.models import SystemSnapshot, Topology
from vqsched.penalty import (
    CostModel,
    Exposure,
    FitnessKind,
    ObjectiveValue,
    PenaltyParams,
    aggregate,
    clamps,
    realized_exposures,
)
from vqsched.simulator import EpochPolicy, Simulator, first_mismatch, oracle_recompute
from vqsched.strategies import DispatchOnly, GeneticScheduler, make_scheduler, parse_strategy
from vqsched.workload import JobStream, WorkloadConfig, generate_stream

logger = logging.getLogger(__name__)

REPORT_SCHEMA = "vqsched.report"
REPORT_VERSION = 1
MIN_COMPARE_REPLICATIONS = 10

Objective = Literal["waiting", "sla"]
Metric = Literal["cost", "penalty", "time"]
ReportFormat = Literal["csv", "jsonl"]

OBJECTIVE_KINDS: Dict[str, FitnessKind] = {"waiting": "waiting", "sla": "sla_allowance"}

VALUE_COLUMNS = [
    "initial_count",
    "initial_time",
    "initial_cost",
    "initial_penalty",
    "enhanced_count",
    "enhanced_time",
    "enhanced_cost",
    "enhanced_penalty",
    "improvement",
]
CSV_COLUMNS = ["strategy", "replication", "seed", "entity", *VALUE_COLUMNS, "error"]


class OutputsConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    directory: str = "out"
    format: ReportFormat = "csv"
    convergence: bool = False


class Scenario(BaseModel):
    """A validated experiment description."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = Field("scenario", pattern=r"^[A-Za-z0-9_.-]+$")
    workload: WorkloadConfig
    strategies: List[str] = Field(..., min_length=1)
    ga: GAConfig = GAConfig()
    penalty: PenaltyParams = PenaltyParams()
    replications: int = Field(30, ge=1)
    mode: Literal["snapshot", "stream"] = "snapshot"
    backlog: Optional[int] = Field(None, ge=1)
    epoch_period: Optional[int] = Field(None, gt=0)
    objective: Objective = "waiting"
    metric: Metric = "cost"
    expected_order: List[str] = Field(default_factory=list)
    significant_links: Optional[List[Tuple[str, str]]] = None
    significance: float = Field(0.05, gt=0, lt=1)
    workers: int = Field(1, ge=1)
    outputs: OutputsConfig = OutputsConfig()

    @field_validator("strategies")
    def strategies_must_parse(cls, v):
        for text in v:
            parse_strategy(text)
        return v

    @model_validator(mode="after")
    def check_references(self):
        unknown = [s for s in self.expected_order if s not in self.labels]
        if unknown:
            raise ValueError(f"expected_order names unknown strategies: {unknown}")
        rank = {label: i for i, label in enumerate(self.expected_order)}
        stray = [
            link for link in self.significant_links or []
            if link[0] not in rank or link[1] not in rank or rank[link[0]] >= rank[link[1]]
        ]
        if stray:
            raise ValueError(f"significant_links must follow expected_order, better first: {stray}")
        if self.backlog is not None and self.backlog > self.workload.n_jobs:
            raise ValueError("backlog cannot exceed the number of jobs")
        return self

    @property
    def topology(self) -> Topology:
        return self.workload.topology

    @property
    def labels(self) -> List[str]:
        """Strategy labels, with repeats made distinct by a ``#n`` suffix."""
        seen: Dict[str, int] = {}
        labels = []
        for text in self.strategies:
            seen[text] = seen.get(text, 0) + 1
            labels.append(text if seen[text] == 1 else f"{text}#{seen[text]}")
        return labels

    @property
    def target_backlog(self) -> int:
        if self.backlog is not None:
            return self.backlog
        return max(1, self.workload.n_jobs - self.workload.n_resources)


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read and validate a scenario file; unknown keys are errors."""
    return Scenario.model_validate(toml.load(Path(path)))


def improvement_pct(initial: float, enhanced: float) -> float:
    if initial == 0:
        return 0.0
    return (initial - enhanced) / initial * 100.0


class EntityRow(BaseModel):
    """Initial and enhanced totals of one entity: the system, a tier or a queue."""

    entity: str
    initial_count: int = 0
    initial_time: float = 0.0
    initial_cost: float = 0.0
    initial_penalty: float = 0.0
    enhanced_count: int = 0
    enhanced_time: float = 0.0
    enhanced_cost: float = 0.0
    enhanced_penalty: float = 0.0
    improvement: float = 0.0

    @classmethod
    def build(cls, entity: str, initial: ObjectiveValue, enhanced: ObjectiveValue) -> "EntityRow":
        return cls(
            entity=entity,
            initial_count=initial.count,
            initial_time=initial.time,
            initial_cost=initial.cost,
            initial_penalty=initial.penalty,
            enhanced_count=enhanced.count,
            enhanced_time=enhanced.time,
            enhanced_cost=enhanced.cost,
            enhanced_penalty=enhanced.penalty,
            improvement=improvement_pct(initial.cost, enhanced.cost),
        )

    def value(self, metric: Metric, which: str = "enhanced") -> float:
        return getattr(self, f"{which}_{metric}")


class ReportCell(BaseModel):
    strategy: str
    replication: int
    seed: int
    rows: List[EntityRow] = Field(default_factory=list)
    convergence: List[GenerationStat] = Field(default_factory=list)
    error: Optional[str] = None

    @property
    def system(self) -> Optional[EntityRow]:
        for row in self.rows:
            if row.entity == "system":
                return row
        return None


class Report(BaseModel):
    scenario: str = "scenario"
    objective: Objective = "waiting"
    cells: List[ReportCell] = Field(default_factory=list)

    @property
    def strategies(self) -> List[str]:
        return list(dict.fromkeys(cell.strategy for cell in self.cells))

    def system_values(self, strategy: str, metric: Metric = "cost") -> Dict[int, float]:
        """Enhanced system totals of a strategy keyed by replication; failed cells are skipped."""
        values = {}
        for cell in self.cells:
            if cell.strategy == strategy and cell.error is None and cell.system is not None:
                values[cell.replication] = cell.system.value(metric)
        return values


def entity_label(tier: Optional[int] = None, queue: Optional[int] = None) -> str:
    if tier is None:
        return "system"
    if queue is None:
        return f"tier-{tier + 1}"
    return f"tier-{tier + 1}/queue-{queue + 1}"


def _group(
    exposures: Iterable[Exposure], params: PenaltyParams, clamp: bool
) -> Dict[str, ObjectiveValue]:
    buckets: Dict[str, List[Exposure]] = {"system": []}
    for exposure in exposures:
        buckets["system"].append(exposure)
        buckets.setdefault(entity_label(exposure.tier), []).append(exposure)
        buckets.setdefault(entity_label(exposure.tier, exposure.queue), []).append(exposure)
    return {entity: aggregate(items, params, clamp) for entity, items in buckets.items()}


def entity_rows(
    initial: Dict[str, ObjectiveValue],
    enhanced: Dict[str, ObjectiveValue],
    topology: Topology,
) -> List[EntityRow]:
    """One row for the system, then per tier followed by that tier's queues."""
    entities = ["system"]
    for j in range(topology.n_tiers):
        entities.append(entity_label(j))
        entities.extend(entity_label(j, k) for k in range(topology.n_resources))
    empty = ObjectiveValue()
    return [
        EntityRow.build(entity, initial.get(entity, empty), enhanced.get(entity, empty))
        for entity in entities
    ]


def build_snapshot(
    stream: JobStream,
    topology: Topology,
    scheduler,
    backlog: int,
) -> SystemSnapshot:
    """Dispatch arrivals without reordering until ``backlog`` jobs are queued."""
    simulator = Simulator(stream, topology, DispatchOnly(scheduler), EpochPolicy(on_arrival=True))
    snapshot = simulator.run_until(lambda s: s.n_pending >= backlog)
    if snapshot is None:
        raise SchedulingError(f"the stream drained before {backlog} jobs were queued")
    return snapshot


def _replication_seeds(base: int, count: int) -> List[int]:
    children = np.random.SeedSequence(base).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint32)[0]) for child in children]


def _cell_ga_config(scenario: Scenario, replication: int) -> GAConfig:
    seed = int(np.random.SeedSequence([scenario.ga.seed, replication]).generate_state(1, dtype=np.uint32)[0])
    return scenario.ga.model_copy(update={"seed": seed})


def _snapshot_cell(scenario: Scenario, scheduler, stream: JobStream, kind: FitnessKind):
    params = scenario.penalty
    snapshot = build_snapshot(stream, scenario.topology, scheduler, scenario.target_backlog)
    enhanced = scheduler.reschedule(snapshot)
    if enhanced is None:
        enhanced = snapshot.schedule
    snapshot.validate_schedule(enhanced)
    model = CostModel(snapshot, kind, params)
    initial_values = _group(model.exposures(snapshot.schedule), params, model.clamp)
    enhanced_values = _group(model.exposures(enhanced), params, model.clamp)
    convergence = list(getattr(scheduler, "convergence", []))
    return initial_values, enhanced_values, convergence


def _stream_cell(scenario: Scenario, scheduler, stream: JobStream, kind: FitnessKind):
    params = scenario.penalty
    topology = scenario.topology
    jobs = stream.by_id()
    per_tier = kind == "waiting"
    clamp = clamps(kind, params)

    baseline = Simulator(stream, topology, DispatchOnly(scheduler), params=params).run()
    policy = EpochPolicy(on_arrival=True, period=scenario.epoch_period)
    enhanced = Simulator(stream, topology, scheduler, policy, params).run()
    enhanced.check_invariants(jobs)

    initial_values = _group(realized_exposures(baseline.trace, jobs, kind, params, per_tier), params, clamp)
    enhanced_values = _group(realized_exposures(enhanced.trace, jobs, kind, params, per_tier), params, clamp)
    return initial_values, enhanced_values, []


def run_cell(scenario: Scenario, label: str, strategy: str, replication: int, seed: int) -> ReportCell:
    """Run one (strategy, replication) cell; failures are recorded on the cell."""
    try:
        scheduler = make_scheduler(strategy, _cell_ga_config(scenario, replication), scenario.penalty)
        stream = generate_stream(scenario.workload.model_copy(update={"seed": seed}))
        kind = OBJECTIVE_KINDS[scenario.objective]
        if scenario.mode == "snapshot":
            initial, enhanced, convergence = _snapshot_cell(scenario, scheduler, stream, kind)
        else:
            initial, enhanced, convergence = _stream_cell(scenario, scheduler, stream, kind)
    except (SchedulingError, ValueError) as error:
        logger.warning("%s replication %d failed: %s", label, replication, error)
        return ReportCell(strategy=label, replication=replication, seed=seed, error=str(error))
    rows = entity_rows(initial, enhanced, scenario.topology)
    logger.info(
        "%s replication %d: %.1f -> %.1f (%.2f%%)",
        label, replication, rows[0].initial_cost, rows[0].enhanced_cost, rows[0].improvement,
    )
    return ReportCell(
        strategy=label,
        replication=replication,
        seed=seed,
        rows=rows,
        convergence=convergence,
    )


def _run_task(task: Tuple[Scenario, str, str, int, int]) -> ReportCell:
    return run_cell(*task)


def run_scenario(scenario: Scenario, workers: Optional[int] = None) -> Report:
    """Run every strategy on every replication.

    Replication r uses the same job stream for every strategy so the
    strategies can be compared pairwise. Cells are assembled in
    (strategy, replication) order whatever the number of workers.
    """
    seeds = _replication_seeds(scenario.workload.seed, scenario.replications)
    tasks = [
        (scenario, label, text, r, seed)
        for label, text in zip(scenario.labels, scenario.strategies)
        for r, seed in enumerate(seeds)
    ]
    workers = workers or scenario.workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_task, tasks))
    else:
        cells = [_run_task(task) for task in tasks]
    return Report(scenario=scenario.name, objective=scenario.objective, cells=cells)


class StrategyRank(BaseModel):
    strategy: str
    mean: float
    rank: int
    replications: int


class PairwiseTest(BaseModel):
    """Paired sign test over the replications both strategies completed."""

    first: str
    second: str
    first_better: int
    second_better: int
    ties: int
    p_value: float


class OrderingCheck(BaseModel):
    better: str
    worse: str
    holds: bool
    p_value: float
    significant: bool
    required: bool = True


class RankTable(BaseModel):
    metric: Metric = "cost"
    ranks: List[StrategyRank] = Field(default_factory=list)
    pairs: List[PairwiseTest] = Field(default_factory=list)
    ordering: List[OrderingCheck] = Field(default_factory=list)

    @property
    def ordering_holds(self) -> bool:
        return all(check.holds for check in self.ordering)

    def pair(self, a: str, b: str) -> PairwiseTest:
        for test in self.pairs:
            if (test.first, test.second) == (a, b):
                return test
            if (test.first, test.second) == (b, a):
                return PairwiseTest(
                    first=a,
                    second=b,
                    first_better=test.second_better,
                    second_better=test.first_better,
                    ties=test.ties,
                    p_value=test.p_value,
                )
        raise KeyError((a, b))


def sign_test(first: Dict[int, float], second: Dict[int, float]) -> Tuple[int, int, int, float]:
    """Two-sided sign test on paired totals; lower is better."""
    common = sorted(set(first) & set(second))
    wins = sum(1 for r in common if first[r] < second[r] and not math.isclose(first[r], second[r]))
    losses = sum(1 for r in common if second[r] < first[r] and not math.isclose(first[r], second[r]))
    ties = len(common) - wins - losses
    trials = wins + losses
    p_value = binomtest(wins, trials, 0.5).pvalue if trials else 1.0
    return wins, losses, ties, float(p_value)


def compare_strategies(
    report: Report,
    metric: Metric = "cost",
    expected_order: Optional[List[str]] = None,
    significance: float = 0.05,
    significant_links: Optional[Iterable[Tuple[str, str]]] = None,
) -> RankTable:
    """Rank strategies by mean enhanced total and test them pairwise.

    Ranks use competition ranking, so strategies with equal means share a
    rank. ``expected_order`` lists strategies best first and each adjacent
    pair is checked. A link named in ``significant_links`` (every adjacent
    one when it is None) holds when its means are in order and the sign
    test is significant, and is checked even when not adjacent. Any other
    link holds unless it is significantly reversed.
    """
    strategies = report.strategies
    if len(strategies) < 2:
        raise InsufficientReplicationsError("comparison needs at least two strategies")
    values = {s: report.system_values(s, metric) for s in strategies}
    short = [s for s in strategies if len(values[s]) < MIN_COMPARE_REPLICATIONS]
    if short:
        raise InsufficientReplicationsError(
            f"comparison needs {MIN_COMPARE_REPLICATIONS} completed replications per strategy: {short}"
        )
    means = {s: float(np.mean(list(values[s].values()))) for s in strategies}
    ordered = sorted(strategies, key=lambda s: means[s])
    ranks = []
    for position, s in enumerate(ordered):
        if position and math.isclose(means[s], means[ordered[position - 1]], rel_tol=1e-12, abs_tol=1e-9):
            rank = ranks[-1].rank
        else:
            rank = position + 1
        ranks.append(StrategyRank(strategy=s, mean=means[s], rank=rank, replications=len(values[s])))

    pairs = []
    for a, b in combinations(strategies, 2):
        wins, losses, ties, p_value = sign_test(values[a], values[b])
        pairs.append(
            PairwiseTest(first=a, second=b, first_better=wins, second_better=losses, ties=ties, p_value=p_value)
        )
    table = RankTable(metric=metric, ranks=ranks, pairs=pairs)

    order = expected_order or []
    links = list(zip(order, order[1:]))
    required = set(links) if significant_links is None else {tuple(link) for link in significant_links}
    loose = [link for link in required if link[0] not in order or link[1] not in order]
    if loose:
        raise SchedulingError(f"significant links name strategies outside the expected order: {sorted(loose)}")
    links += sorted(required - set(links), key=lambda link: (order.index(link[0]), order.index(link[1])))
    for better, worse in links:
        if better not in values or worse not in values:
            raise SchedulingError(f"expected order names a strategy missing from the report: {better}, {worse}")
        test = table.pair(better, worse)
        in_order = means[better] <= means[worse] or math.isclose(means[better], means[worse])
        significant = test.p_value < significance
        must = (better, worse) in required
        table.ordering.append(
            OrderingCheck(
                better=better,
                worse=worse,
                holds=(in_order and significant) if must else (in_order or not significant),
                p_value=test.p_value,
                significant=in_order and significant,
                required=must,
            )
        )
    return table


def _report_header(report: Report) -> str:
    return f"# schema={REPORT_SCHEMA} version={REPORT_VERSION} scenario={report.scenario} objective={report.objective}"


def _parse_header(line: str) -> Dict[str, str]:
    if not line.startswith("#"):
        raise SchedulingError("report file is missing its schema line")
    fields = dict(part.split("=", 1) for part in line.lstrip("# ").split() if "=" in part)
    if fields.get("schema") != REPORT_SCHEMA or fields.get("version") != str(REPORT_VERSION):
        raise SchedulingError(f"unsupported report schema: {line.strip()}")
    return fields


class ReportHeader(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_: str = Field(REPORT_SCHEMA, alias="schema")
    version: int = REPORT_VERSION
    scenario: str
    objective: Objective


def _frame(report: Report) -> pd.DataFrame:
    records = []
    for cell in report.cells:
        base = {"strategy": cell.strategy, "replication": cell.replication, "seed": cell.seed}
        if not cell.rows:
            records.append({**base, "entity": None, "error": cell.error})
        for row in cell.rows:
            records.append({**base, **row.model_dump(), "error": cell.error})
    return pd.DataFrame(records, columns=CSV_COLUMNS)


def emit(
    report: Report,
    path: Union[str, Path],
    format: ReportFormat = "csv",
) -> Path:
    """Write a report as CSV or JSON lines.

    CSV holds one row per (cell, entity) under a schema comment line;
    convergence series are only kept by the JSON-lines form.
    """
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as handle:
            if format == "csv":
                handle.write(_report_header(report) + "\n")
                _frame(report).to_csv(handle, index=False)
            elif format == "jsonl":
                header = ReportHeader(scenario=report.scenario, objective=report.objective)
                handle.write(header.model_dump_json(by_alias=True) + "\n")
                for cell in report.cells:
                    handle.write(cell.model_dump_json() + "\n")
            else:
                raise SchedulingError(f"unknown report format '{format}'")
    except OSError as error:
        raise OSError(f"cannot write report to {path}: {error}") from error
    return path


def _optional(value):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None
    return value


def parse_report(path: Union[str, Path]) -> Report:
    """Read a report written by ``emit``; the format is taken from the first line."""
    path = Path(path)
    with path.open(encoding="utf-8") as handle:
        first = handle.readline()
        if first.startswith("{"):
            header = ReportHeader.model_validate_json(first)
            cells = [ReportCell.model_validate_json(line) for line in handle if line.strip()]
            return Report(scenario=header.scenario, objective=header.objective, cells=cells)
        fields = _parse_header(first)
        frame = pd.read_csv(
            handle,
            dtype={"strategy": str, "entity": str, "error": str},
            float_precision="round_trip",
        )

    cells: List[ReportCell] = []
    index: Dict[Tuple[str, int, int], ReportCell] = {}
    for record in frame.to_dict(orient="records"):
        key = (record["strategy"], int(record["replication"]), int(record["seed"]))
        cell = index.get(key)
        if cell is None:
            cell = ReportCell(
                strategy=key[0], replication=key[1], seed=key[2], error=_optional(record["error"])
            )
            index[key] = cell
            cells.append(cell)
        if _optional(record["entity"]) is None:
            continue
        cell.rows.append(
            EntityRow(
                entity=record["entity"],
                **{
                    column: int(record[column]) if column.endswith("_count") else float(record[column])
                    for column in VALUE_COLUMNS
                },
            )
        )
    return Report(scenario=fields.get("scenario", "scenario"), objective=fields.get("objective", "waiting"), cells=cells)


def write_outputs(report: Report, scenario: Scenario, directory: Union[str, Path], format: ReportFormat) -> List[Path]:
    """Emit the report and, when enabled, one convergence CSV per cell."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    suffix = "csv" if format == "csv" else "jsonl"
    written = [emit(report, directory / f"{scenario.name}.{suffix}", format)]
    if scenario.outputs.convergence:
        for cell in report.cells:
            if cell.convergence:
                name = f"{scenario.name}.{_slug(cell.strategy)}.r{cell.replication}.convergence.csv"
                written.append(export_convergence(cell.convergence, directory / name))
    return written


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in text)


class OracleSummary(BaseModel):
    instances: int = 0
    optimal: int = 0
    within_tolerance: int = 0
    worst_gap: float = 0.0
    runs: int = 0
    mismatches: List[str] = Field(default_factory=list)

    def passed(self, optimal_share: float = 0.9) -> bool:
        return (
            not self.mismatches
            and self.within_tolerance == self.instances
            and self.optimal >= math.ceil(optimal_share * self.instances)
        )


def oracle_ga(
    seed: int,
    instances: int = 100,
    generations: int = 200,
    tolerance: float = 0.05,
    summary: Optional[OracleSummary] = None,
) -> OracleSummary:
    """Compare the tier search with exhaustive enumeration on small backlogs.

    Each instance is one tier of two resources with at most eight queued jobs.
    """
    summary = summary or OracleSummary()
    rng = np.random.default_rng(seed)
    params = PenaltyParams()
    for index in range(instances):
        config = WorkloadConfig(
            n_tiers=1,
            n_resources=2,
            n_jobs=int(rng.integers(5, 11)),
            seed=int(rng.integers(0, 2**32)),
        )
        stream = generate_stream(config)
        snapshot = build_snapshot(stream, config.topology, make_scheduler("fcfs"), config.n_jobs - 2)
        exact = brute_force_best(snapshot, "tier", "waiting", params)
        ga = GAConfig(generations=generations, seed=index)
        found = evolve(snapshot, "tier", ga, params).best_fitness
        gap = 0.0 if exact.cost == 0 else (found - exact.cost) / exact.cost
        summary.instances += 1
        summary.optimal += int(math.isclose(found, exact.cost, rel_tol=1e-9, abs_tol=1e-9))
        summary.within_tolerance += int(gap <= tolerance)
        summary.worst_gap = max(summary.worst_gap, gap)
    return summary


def oracle_replay(
    seed: int,
    runs: int = 200,
    max_jobs: int = 500,
    generations: int = 20,
    summary: Optional[OracleSummary] = None,
) -> OracleSummary:
    """Replay simulated decision histories independently and compare traces."""
    summary = summary or OracleSummary()
    rng = np.random.default_rng(seed)
    strategies = ["fcfs", "wlc", "wrr", "ga:tier:waiting", "ga:system:sla_allowance", "ga:segmented:waiting"]
    for index in range(runs):
        config = WorkloadConfig(
            n_tiers=int(rng.integers(1, 4)),
            n_resources=int(rng.integers(1, 5)),
            n_jobs=int(rng.integers(1, max_jobs + 1)),
            seed=int(rng.integers(0, 2**32)),
            arrival_process="poisson",
            arrival_rate=float(rng.uniform(0.002, 0.02)),
        )
        strategy = strategies[index % len(strategies)]
        scheduler = make_scheduler(strategy, GAConfig(generations=generations, seed=index, local_search=0))
        if isinstance(scheduler, GeneticScheduler) and index % 2:
            policy = EpochPolicy(on_arrival=True, period=int(rng.integers(50, 400)))
        else:
            policy = EpochPolicy()
        stream = generate_stream(config)
        report = Simulator(stream, config.topology, scheduler, policy).run()
        try:
            replayed = oracle_recompute(report.history, stream, config.topology)
        except OracleMismatchError as error:
            mismatch = error.mismatch
        else:
            mismatch = first_mismatch(replayed, report.trace)
        summary.runs += 1
        if mismatch is not None:
            summary.mismatches.append(f"run {index} ({strategy}, seed {config.seed}): {mismatch}")
    return summary
