"""Domain types and the closed-form timing arithmetic of the multi-tier model.

Time is measured in non-negative integer time units. Tiers, queues and
positions are 0-based; job ids are positive and follow arrival order.
"""

from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from vqsched.exceptions import (
    IncompleteJobError,
    NotResidentError,
    ScheduleInvariantError,
    SchedulingError,
    UnknownJobError,
)

QueueOrder = Tuple[int, ...]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


class Topology(_Frozen):
    """Shape of the serial environment: N tiers of M identical resources."""

    n_tiers: int = Field(1, ge=1)
    n_resources: int = Field(1, ge=1)


class Job(_Frozen):
    """A client job.

    Attributes:
        id (int): Arrival-order index, starting at 1.
        arrival (int): Arrival time at the first tier.
        exec_times (tuple[int, ...]): Execution time in each tier.
        target_completion (int): Absolute time by which the client expects
            the job to leave the last tier.
        service_cost (float): Waiting cost per time unit (psi).
        violation_cost (float): SLA violation cost per time unit (zeta).
    """

    id: int = Field(..., ge=1)
    arrival: int = Field(0, ge=0)
    exec_times: Tuple[int, ...]
    target_completion: int
    service_cost: float = Field(1.0, gt=0)
    violation_cost: float = Field(1.0, gt=0)

    @field_validator("exec_times")
    def exec_times_must_be_positive(cls, v):
        if len(v) == 0:
            raise ValueError("exec_times must have one entry per tier")
        if any(e <= 0 for e in v):
            raise ValueError("exec_times must all be > 0")
        return v

    @model_validator(mode="after")
    def deadline_must_exceed_execution(self):
        if self.deadline <= self.total_exec:
            raise ValueError(
                f"job {self.id}: deadline {self.deadline} must exceed total "
                f"execution time {self.total_exec}"
            )
        return self

    @property
    def n_tiers(self) -> int:
        return len(self.exec_times)

    @property
    def total_exec(self) -> int:
        """ET: execution time summed over all tiers."""
        return sum(self.exec_times)

    @property
    def deadline(self) -> int:
        """DL: relative deadline measured from the first arrival."""
        return self.target_completion - self.arrival

    @property
    def multitier_allowance(self) -> int:
        """The total waiting time the job may incur without violating its SLA."""
        return self.deadline - self.total_exec


class InService(_Frozen):
    job_id: int
    start: int = Field(..., ge=0)


class TierState(_Frozen):
    """Resource queues of one tier.

    Attributes:
        tier_index (int): 0-based tier position.
        queues (tuple[tuple[int, ...], ...]): One ordering per resource,
            head first. Only jobs that have not started service are listed.
        executing (tuple[InService | None, ...]): Job in service per resource.
    """

    tier_index: int = Field(0, ge=0)
    queues: Tuple[QueueOrder, ...]
    executing: Tuple[Optional[InService], ...] = ()

    @model_validator(mode="before")
    @classmethod
    def fill_idle_resources(cls, values):
        if isinstance(values, dict) and not values.get("executing"):
            values = dict(values)
            values["executing"] = tuple(None for _ in values.get("queues", ()))
        return values

    @model_validator(mode="after")
    def check_unique_membership(self):
        if len(self.executing) != len(self.queues):
            raise ValueError("executing must have one slot per queue")
        if len(self.queues) == 0:
            raise ValueError("a tier needs at least one resource queue")
        seen = set()
        ids = [job_id for queue in self.queues for job_id in queue]
        ids += [slot.job_id for slot in self.executing if slot is not None]
        for job_id in ids:
            if job_id in seen:
                raise ValueError(
                    f"job {job_id} appears more than once in tier {self.tier_index}"
                )
            seen.add(job_id)
        return self

    @property
    def pending(self) -> Tuple[int, ...]:
        return tuple(job_id for queue in self.queues for job_id in queue)

    def load(self, queue_index: int) -> int:
        """Queued plus in-service jobs at a resource."""
        busy = 1 if self.executing[queue_index] is not None else 0
        return len(self.queues[queue_index]) + busy


class Schedule(_Frozen):
    """Assignment and ordering of all pending jobs: one ordering per tier."""

    per_tier: Tuple[Tuple[QueueOrder, ...], ...]

    def queues(self, tier: int) -> Tuple[QueueOrder, ...]:
        return self.per_tier[tier]

    def pending(self, tier: int) -> List[int]:
        return [job_id for queue in self.per_tier[tier] for job_id in queue]


class JobTiming(BaseModel):
    """Realized timings of one job, filled as it moves through the tiers."""

    job_id: int
    n_tiers: int = Field(..., ge=1)
    arrivals: List[int] = Field(default_factory=list)
    resources: List[int] = Field(default_factory=list)
    starts: List[int] = Field(default_factory=list)
    departures: List[int] = Field(default_factory=list)

    @property
    def waited(self) -> List[int]:
        return [start - arrival for arrival, start in zip(self.arrivals, self.starts)]

    @property
    def total_wait(self) -> int:
        return sum(self.waited)

    @property
    def complete(self) -> bool:
        return len(self.departures) == self.n_tiers

    @property
    def response(self) -> int:
        if not self.complete:
            raise IncompleteJobError(self.job_id)
        return self.departures[-1] - self.arrivals[0]


class TimingTrace(BaseModel):
    """Per-job realized timings of a run."""

    n_tiers: int = Field(..., ge=1)
    jobs: Dict[int, JobTiming] = Field(default_factory=dict)

    def timing(self, job_id: int) -> JobTiming:
        try:
            return self.jobs[job_id]
        except KeyError:
            raise UnknownJobError(job_id, "trace") from None


class Allowances(_Frozen):
    job_id: int
    deadline: int
    multitier_allowance: int = Field(..., gt=0)
    tier_allowances: Tuple[float, ...]


class WaitEstimate(_Frozen):
    """Estimated waiting components of a queued job at a decision epoch.

    ``completed`` is the realized wait in the tiers before the current one,
    ``expected_tier`` is elapsed + remaining, and ``expected_multitier`` is
    completed + expected_tier.
    """

    job_id: int
    tier: int
    completed: int
    elapsed: int
    remaining: int

    @property
    def expected_tier(self) -> int:
        return self.elapsed + self.remaining

    @property
    def expected_multitier(self) -> int:
        return self.completed + self.elapsed + self.remaining


class SystemSnapshot(_Frozen):
    """Frozen state of the environment at a decision epoch.

    Attributes:
        now (int): Epoch time.
        jobs (dict[int, Job]): Jobs currently in the system.
        tiers (tuple[TierState, ...]): Queue state of every tier.
        tier_arrivals (dict[int, tuple[int, ...]]): Arrival time of each job
            at every tier it has reached so far.
        waited (dict[int, tuple[int, ...]]): Realized waits in the tiers a
            job has already started service in.
    """

    now: int = Field(0, ge=0)
    jobs: Dict[int, Job]
    tiers: Tuple[TierState, ...]
    tier_arrivals: Dict[int, Tuple[int, ...]] = Field(default_factory=dict)
    waited: Dict[int, Tuple[int, ...]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_jobs_known(self):
        for tier in self.tiers:
            for job_id in tier.pending:
                if job_id not in self.jobs:
                    raise ValueError(f"queued job {job_id} is missing from jobs")
        return self

    @property
    def schedule(self) -> Schedule:
        return Schedule(per_tier=tuple(tier.queues for tier in self.tiers))

    @property
    def n_pending(self) -> int:
        return sum(len(tier.pending) for tier in self.tiers)

    def arrivals_of(self, job_id: int) -> Tuple[int, ...]:
        if job_id in self.tier_arrivals:
            return self.tier_arrivals[job_id]
        return (self.jobs[job_id].arrival,)

    def completed_waits(self, job_id: int) -> Tuple[int, ...]:
        return self.waited.get(job_id, ())

    def locate(self, job_id: int) -> Tuple[int, int, int]:
        """Return (tier, queue, position) of a queued job."""
        for tier in self.tiers:
            for k, queue in enumerate(tier.queues):
                if job_id in queue:
                    return tier.tier_index, k, queue.index(job_id)
        raise UnknownJobError(job_id, "snapshot queues")

    def residual(self, tier: int, queue: int, include_residual: bool = True) -> int:
        """Remaining service time of the job executing at a resource."""
        slot = self.tiers[tier].executing[queue]
        if slot is None or not include_residual:
            return 0
        exec_time = self.jobs[slot.job_id].exec_times[tier]
        return max(0, slot.start + exec_time - self.now)

    def validate_schedule(self, schedule: Schedule) -> None:
        """Check that a schedule reassigns exactly this snapshot's queued jobs."""
        if len(schedule.per_tier) != len(self.tiers):
            raise ScheduleInvariantError(
                f"schedule has {len(schedule.per_tier)} tiers, expected {len(self.tiers)}"
            )
        for tier, queues in zip(self.tiers, schedule.per_tier):
            if len(queues) != len(tier.queues):
                raise ScheduleInvariantError(
                    f"tier {tier.tier_index}: schedule has {len(queues)} queues, "
                    f"expected {len(tier.queues)}"
                )
            proposed = [job_id for queue in queues for job_id in queue]
            if sorted(proposed) != sorted(tier.pending):
                missing = set(tier.pending) - set(proposed)
                extra = set(proposed) - set(tier.pending)
                raise ScheduleInvariantError(
                    f"tier {tier.tier_index}: schedule does not cover the pending "
                    f"jobs (missing {sorted(missing)}, unexpected {sorted(extra)}, "
                    f"duplicates {len(proposed) != len(set(proposed))})"
                )

    def with_schedule(self, schedule: Schedule) -> "SystemSnapshot":
        self.validate_schedule(schedule)
        tiers = tuple(
            TierState(
                tier_index=tier.tier_index,
                queues=queues,
                executing=tier.executing,
            )
            for tier, queues in zip(self.tiers, schedule.per_tier)
        )
        return self.model_copy(update={"tiers": tiers})


def queue_waiting_times(
    queue_order: Sequence[int],
    exec_times: Mapping[int, int],
    in_service: Optional[int] = None,
    elapsed_head: int = 0,
) -> Dict[int, int]:
    """Remaining wait of each queued job given its predecessors.

    Args:
        queue_order: Job ids, head first.
        exec_times: Execution time of every job at this resource, including
            the in-service job if one is given.
        in_service: Id of the job currently executing, if any.
        elapsed_head: Time the in-service job has already been executing.

    Returns:
        dict: job id -> remaining wait.
    """
    if elapsed_head < 0:
        raise SchedulingError("elapsed_head must be >= 0")
    running = 0
    if in_service is not None:
        if in_service not in exec_times:
            raise UnknownJobError(in_service, "exec_times")
        running = max(0, exec_times[in_service] - elapsed_head)
    remaining = {}
    for job_id in queue_order:
        if job_id not in exec_times:
            raise UnknownJobError(job_id, "exec_times")
        remaining[job_id] = running
        running += exec_times[job_id]
    return remaining


def response_time(trace: TimingTrace, job: Job) -> int:
    """End-to-end response time: last departure minus first arrival."""
    return trace.timing(job.id).response


def tier_allowance(job: Job, tier_index: int) -> float:
    """The share of the waiting allowance granted to one tier.

    The allowance is split in proportion to the job's execution time in
    each tier, so the shares sum to the multi-tier allowance.
    """
    if not 0 <= tier_index < job.n_tiers:
        raise SchedulingError(f"tier {tier_index} out of range for job {job.id}")
    if job.total_exec <= 0:
        raise SchedulingError(f"job {job.id} has no execution time")
    return job.multitier_allowance * job.exec_times[tier_index] / job.total_exec


def allowances(job: Job) -> Allowances:
    return Allowances(
        job_id=job.id,
        deadline=job.deadline,
        multitier_allowance=job.multitier_allowance,
        tier_allowances=tuple(tier_allowance(job, j) for j in range(job.n_tiers)),
    )


def estimate_wait(
    snapshot: SystemSnapshot,
    job_id: int,
    tier: Optional[int] = None,
    schedule: Optional[Schedule] = None,
    include_residual: bool = True,
) -> WaitEstimate:
    """Estimate the waiting components of a queued job.

    Args:
        snapshot: Epoch state.
        job_id: The queued job.
        tier: Tier the job is expected to wait in; checked when given.
        schedule: Ordering to evaluate; defaults to the snapshot's own.
        include_residual: Count the in-service job's residual time.

    Raises:
        NotResidentError: The job is not waiting in ``tier``.
    """
    if job_id not in snapshot.jobs:
        raise UnknownJobError(job_id, "snapshot")
    if schedule is None:
        schedule = snapshot.schedule
    for p, queues in enumerate(schedule.per_tier):
        for k, queue in enumerate(queues):
            if job_id in queue:
                break
        else:
            continue
        break
    else:
        raise NotResidentError(job_id, -1 if tier is None else tier)
    if tier is not None and tier != p:
        raise NotResidentError(job_id, tier)

    exec_times = {other: snapshot.jobs[other].exec_times[p] for other in queue}
    remaining = queue_waiting_times(queue, exec_times)[job_id]
    remaining += snapshot.residual(p, k, include_residual)
    arrivals = snapshot.arrivals_of(job_id)
    if len(arrivals) <= p:
        raise NotResidentError(job_id, p)
    completed = sum(snapshot.completed_waits(job_id)[:p])
    return WaitEstimate(
        job_id=job_id,
        tier=p,
        completed=completed,
        elapsed=snapshot.now - arrivals[p],
        remaining=remaining,
    )


def expected_multitier_wait(
    snapshot: SystemSnapshot,
    job_id: int,
    tier: int,
    schedule: Optional[Schedule] = None,
    include_residual: bool = True,
) -> int:
    """Completed waits of earlier tiers plus elapsed and remaining wait in ``tier``."""
    return estimate_wait(
        snapshot, job_id, tier, schedule, include_residual
    ).expected_multitier
