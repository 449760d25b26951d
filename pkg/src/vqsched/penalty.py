"""Penalty curves and scheduling objectives.

Two families of objectives are supported:

* ``waiting``: differentiated waiting cost, psi_i times the waiting time.
* ``sla_allowance`` / ``sla_tier_allowance``: differentiated SLA violation
  cost, zeta_i times the time by which the expected wait exceeds the
  multi-tier allowance or the per-tier share of it.

The linear forms are what the schedulers minimize. The saturating
exponential curve is reported alongside as the payable penalty.
"""

import math
from typing import Dict, Iterable, List, Literal, Mapping, NamedTuple, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from vqsched.exceptions import SchedulingError, UnknownJobError
from vqsched.models import (
    Job,
    Schedule,
    SystemSnapshot,
    TimingTrace,
    tier_allowance,
)

FitnessKind = Literal["waiting", "sla_allowance", "sla_tier_allowance"]
FITNESS_KINDS: Tuple[str, ...] = ("waiting", "sla_allowance", "sla_tier_allowance")


class PenaltyParams(BaseModel):
    """Parameters of the penalty curves.

    Attributes:
        chi (float): Monetary cost factor, the curve's asymptote.
        nu (float): Scaling factor of the exponent.
        differentiated (bool): When off, every job's psi and zeta count as 1.
        include_residual (bool): Count the in-service job's residual time in
            the remaining wait of queued jobs.
        clamp_early (bool): Early jobs contribute zero instead of a negative
            violation.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    chi: float = Field(1.0, gt=0)
    nu: float = Field(0.01 / 1000, gt=0)
    differentiated: bool = True
    include_residual: bool = True
    clamp_early: bool = True

    def flat(self) -> "PenaltyParams":
        """The same parameters with differentiation switched off."""
        return self.model_copy(update={"differentiated": False})


class ObjectiveValue(BaseModel):
    """Aggregate of an objective over a set of jobs.

    ``time`` is the total waiting (or violation) time, ``cost`` the linear
    weighted sum and ``penalty`` the sum of the exponential per-job penalties.
    """

    count: int = 0
    time: float = 0.0
    cost: float = 0.0
    penalty: float = 0.0

    def __add__(self, other: "ObjectiveValue") -> "ObjectiveValue":
        return ObjectiveValue(
            count=self.count + other.count,
            time=self.time + other.time,
            cost=self.cost + other.cost,
            penalty=self.penalty + other.penalty,
        )


class JobViolation(BaseModel):
    job_id: int
    alpha: float
    eta: float
    satisfied: bool


class ViolationReport(BaseModel):
    kind: FitnessKind
    jobs: List[JobViolation] = Field(default_factory=list)

    @property
    def total_penalty(self) -> float:
        return sum(v.eta for v in self.jobs)


class Exposure(NamedTuple):
    """One job's contribution: ``weight * value`` (value clamped if enabled)."""

    tier: int
    queue: int
    job_id: int
    weight: float
    value: float


def _saturate(params: PenaltyParams, weight: float, amount: float) -> float:
    return -params.chi * math.expm1(-params.nu * weight * amount)


def _service_weight(job: Job, params: PenaltyParams) -> float:
    return job.service_cost if params.differentiated else 1.0


def _violation_weight(job: Job, params: PenaltyParams) -> float:
    return job.violation_cost if params.differentiated else 1.0


def waiting_penalty(job: Job, total_wait: float, params: PenaltyParams) -> float:
    """Exponential differentiated waiting penalty of one job."""
    if total_wait < 0:
        raise SchedulingError(f"job {job.id}: negative waiting time {total_wait}")
    return _saturate(params, _service_weight(job, params), total_wait)


def sla_penalty(job: Job, alpha: float, params: PenaltyParams) -> float:
    """Exponential SLA violation penalty; early completion costs nothing."""
    return _saturate(params, _violation_weight(job, params), max(alpha, 0))


def aggregate(
    exposures: Iterable[Exposure], params: PenaltyParams, clamp: bool
) -> ObjectiveValue:
    count = 0
    time = cost = penalty = 0.0
    for exposure in exposures:
        value = max(exposure.value, 0) if clamp else exposure.value
        count += 1
        time += value
        cost += exposure.weight * value
        penalty += _saturate(params, exposure.weight, max(exposure.value, 0))
    return ObjectiveValue(count=count, time=time, cost=cost, penalty=penalty)


def clamps(kind: FitnessKind, params: PenaltyParams) -> bool:
    return kind != "waiting" and params.clamp_early


class CostModel:
    """Position-dependent cost of the queued jobs of a snapshot.

    Every queued job contributes ``weight * (offset + remaining)`` where the
    remaining wait is the execution time of its queue predecessors (plus the
    in-service residual). Weights and offsets depend only on the job, so any
    ordering can be scored with one pass over its queues.
    """

    def __init__(self, snapshot: SystemSnapshot, kind: FitnessKind, params: PenaltyParams):
        if kind not in FITNESS_KINDS:
            raise SchedulingError(f"unknown fitness kind '{kind}'")
        self.snapshot = snapshot
        self.kind = kind
        self.params = params
        self.clamp = clamps(kind, params)
        self.exec_time: Dict[int, int] = {}
        self.weight: Dict[int, float] = {}
        self.offset: Dict[int, float] = {}
        self.residual: Dict[Tuple[int, int], int] = {}
        for tier in snapshot.tiers:
            p = tier.tier_index
            for k in range(len(tier.queues)):
                self.residual[(p, k)] = snapshot.residual(p, k, params.include_residual)
            for job_id in tier.pending:
                self._prepare(job_id, p)

    def _prepare(self, job_id: int, p: int) -> None:
        snapshot = self.snapshot
        job = snapshot.jobs[job_id]
        arrivals = snapshot.arrivals_of(job_id)
        if len(arrivals) <= p:
            raise UnknownJobError(job_id, f"arrivals at tier {p}")
        elapsed = snapshot.now - arrivals[p]
        done = snapshot.completed_waits(job_id)[:p]
        if len(done) < p:
            raise UnknownJobError(job_id, f"completed waits before tier {p}")
        self.exec_time[job_id] = job.exec_times[p]
        if self.kind == "waiting":
            self.weight[job_id] = _service_weight(job, self.params)
            self.offset[job_id] = elapsed
        elif self.kind == "sla_allowance":
            self.weight[job_id] = _violation_weight(job, self.params)
            self.offset[job_id] = sum(done) + elapsed - job.multitier_allowance
        else:
            self.weight[job_id] = _violation_weight(job, self.params)
            consumed = sum(w - tier_allowance(job, j) for j, w in enumerate(done))
            self.offset[job_id] = consumed + elapsed - tier_allowance(job, p)

    def queue_cost(self, tier: int, queue: int, order: Iterable[int]) -> float:
        running = self.residual[(tier, queue)]
        total = 0.0
        clamp = self.clamp
        for job_id in order:
            value = self.offset[job_id] + running
            if clamp and value < 0:
                value = 0
            total += self.weight[job_id] * value
            running += self.exec_time[job_id]
        return total

    def cost(self, schedule: Schedule) -> float:
        total = 0.0
        for p, queues in enumerate(schedule.per_tier):
            for k, order in enumerate(queues):
                total += self.queue_cost(p, k, order)
        return total

    def exposures(self, schedule: Schedule) -> List[Exposure]:
        result = []
        for p, queues in enumerate(schedule.per_tier):
            for k, order in enumerate(queues):
                running = self.residual[(p, k)]
                for job_id in order:
                    if job_id not in self.exec_time:
                        raise UnknownJobError(job_id, f"tier {p} queue {k}")
                    result.append(
                        Exposure(p, k, job_id, self.weight[job_id], self.offset[job_id] + running)
                    )
                    running += self.exec_time[job_id]
        return result


def evaluate_schedule(
    snapshot: SystemSnapshot,
    schedule: Optional[Schedule],
    kind: FitnessKind,
    params: PenaltyParams,
) -> ObjectiveValue:
    if schedule is None:
        schedule = snapshot.schedule
    else:
        snapshot.validate_schedule(schedule)
    model = CostModel(snapshot, kind, params)
    return aggregate(model.exposures(schedule), params, model.clamp)


def objective_waiting(
    schedule: Optional[Schedule], snapshot: SystemSnapshot, params: PenaltyParams
) -> ObjectiveValue:
    """Total differentiated waiting cost of the queued jobs under a schedule."""
    return evaluate_schedule(snapshot, schedule, "waiting", params)


def objective_multitier_allowance(
    schedule: Optional[Schedule], snapshot: SystemSnapshot, params: PenaltyParams
) -> ObjectiveValue:
    """Total zeta-weighted excess of the expected multi-tier wait over the allowance."""
    return evaluate_schedule(snapshot, schedule, "sla_allowance", params)


def objective_tier_allowance(
    schedule: Optional[Schedule], snapshot: SystemSnapshot, params: PenaltyParams
) -> ObjectiveValue:
    """Like ``objective_multitier_allowance`` against the per-tier allowance shares."""
    return evaluate_schedule(snapshot, schedule, "sla_tier_allowance", params)


def violation_report(
    snapshot: SystemSnapshot,
    schedule: Optional[Schedule],
    params: PenaltyParams,
    kind: FitnessKind = "sla_allowance",
) -> ViolationReport:
    if kind == "waiting":
        raise SchedulingError("violation reports need an SLA objective kind")
    if schedule is None:
        schedule = snapshot.schedule
    snapshot.validate_schedule(schedule)
    model = CostModel(snapshot, kind, params)
    report = ViolationReport(kind=kind)
    for exposure in model.exposures(schedule):
        job = snapshot.jobs[exposure.job_id]
        report.jobs.append(
            JobViolation(
                job_id=exposure.job_id,
                alpha=exposure.value,
                eta=sla_penalty(job, exposure.value, params),
                satisfied=exposure.value <= 0,
            )
        )
    return report


def realized_exposures(
    trace: TimingTrace,
    jobs: Mapping[int, Job],
    kind: FitnessKind,
    params: PenaltyParams,
    per_tier: bool = False,
) -> List[Exposure]:
    """Exposures of the completed jobs of a finished run.

    With ``per_tier`` each job contributes one exposure per tier (its wait,
    or its wait minus the tier's allowance share); otherwise one exposure for
    the whole job, attributed to the last tier's resource.
    """
    result = []
    for job_id in sorted(trace.jobs):
        timing = trace.jobs[job_id]
        if not timing.complete:
            continue
        job = jobs[job_id]
        if kind == "waiting":
            weight = _service_weight(job, params)
        else:
            weight = _violation_weight(job, params)
        waited = timing.waited
        if per_tier:
            for j, wait in enumerate(waited):
                value = wait if kind == "waiting" else wait - tier_allowance(job, j)
                result.append(Exposure(j, timing.resources[j], job_id, weight, value))
        else:
            total = sum(waited)
            value = total if kind == "waiting" else total - job.multitier_allowance
            last = len(waited) - 1
            result.append(Exposure(last, timing.resources[last], job_id, weight, value))
    return result


def realized_waiting(
    trace: TimingTrace, jobs: Mapping[int, Job], params: PenaltyParams
) -> ObjectiveValue:
    """Differentiated waiting cost of every completed job of a run."""
    return aggregate(realized_exposures(trace, jobs, "waiting", params), params, False)


def realized_violation(
    trace: TimingTrace, jobs: Mapping[int, Job], params: PenaltyParams
) -> ObjectiveValue:
    """SLA violation cost of every completed job: response time beyond the deadline."""
    exposures = realized_exposures(trace, jobs, "sla_allowance", params)
    return aggregate(exposures, params, params.clamp_early)
