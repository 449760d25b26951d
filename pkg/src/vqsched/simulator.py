"""Discrete-event simulation of the serial multi-tier environment.

Jobs enter tier 0, are routed by the active scheduler's dispatch rule to a
resource queue, are served non-preemptively and are forwarded to the next
tier the instant they depart (zero dispatcher latency). At every arrival
(and optionally every ``period`` time units) the scheduler may reorder and
migrate the jobs that have not started service.

Simultaneous events are processed departures first, then arrivals, then
service starts, then reschedule epochs; remaining ties go by job id.
"""

import heapq
import logging
from enum import IntEnum
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional, Protocol, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from vqsched.exceptions import (
    OracleMismatchError,
    ScheduleInvariantError,
    SchedulingError,
)
from vqsched.models import (
    InService,
    Job,
    JobTiming,
    Schedule,
    SystemSnapshot,
    TierState,
    TimingTrace,
    Topology,
)
from vqsched.penalty import (
    ObjectiveValue,
    PenaltyParams,
    realized_violation,
    realized_waiting,
    sla_penalty,
    waiting_penalty,
)
from vqsched.workload import JobStream

logger = logging.getLogger(__name__)

TRACE_SCHEMA = "# vqsched.trace v1"


class EventKind(IntEnum):
    DEPARTURE = 0
    ARRIVAL = 1
    SERVICE_START = 2
    RESCHEDULE = 3


class Event(NamedTuple):
    time: int
    kind: EventKind
    job_id: int = 0
    tier: int = 0
    queue: int = 0


class EpochPolicy(BaseModel):
    """When the scheduler is asked to reorder: on arrivals and/or periodically."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    on_arrival: bool = True
    period: Optional[int] = Field(None, gt=0)


class Scheduler(Protocol):
    name: str

    def start(self, topology: Topology) -> None: ...

    def dispatch(self, job: Job, tier_state: TierState) -> int: ...

    def reschedule(self, snapshot: SystemSnapshot) -> Optional[Schedule]: ...


class DispatchRecord(BaseModel):
    time: int
    job_id: int
    tier: int
    queue: int


class ReorderRecord(BaseModel):
    time: int
    schedule: Schedule


class DecisionHistory(BaseModel):
    """Every queue-changing decision of a run, in the order it was applied."""

    dispatches: List[DispatchRecord] = Field(default_factory=list)
    reorders: List[ReorderRecord] = Field(default_factory=list)


class SimReport(BaseModel):
    scheduler: str
    topology: Topology
    trace: TimingTrace
    history: DecisionHistory
    epochs: int = 0
    objectives: Dict[str, ObjectiveValue] = Field(default_factory=dict)

    def check_invariants(self, jobs: Dict[int, Job]) -> None:
        """Raise when a completed job breaks forwarding, service or conservation rules."""
        for job_id, timing in self.trace.jobs.items():
            job = jobs[job_id]
            if not timing.complete:
                raise SchedulingError(f"job {job_id} did not complete")
            for j in range(job.n_tiers):
                if timing.departures[j] - timing.starts[j] != job.exec_times[j]:
                    raise SchedulingError(f"job {job_id} was preempted in tier {j}")
                if j + 1 < job.n_tiers and timing.arrivals[j + 1] != timing.departures[j]:
                    raise SchedulingError(f"job {job_id} was not forwarded from tier {j}")
            if timing.total_wait + job.total_exec != timing.response:
                raise SchedulingError(f"job {job_id} breaks time conservation")


class Simulator:
    """Event loop over one job stream.

    Args:
        stream: Jobs to admit.
        topology: Number of tiers and resources per tier.
        scheduler: Dispatch and reschedule policy.
        epoch_policy: When reschedule epochs fire.
        params: Penalty parameters used to score the finished run.
    """

    def __init__(
        self,
        stream: JobStream,
        topology: Topology,
        scheduler: Scheduler,
        epoch_policy: Optional[EpochPolicy] = None,
        params: Optional[PenaltyParams] = None,
    ):
        if stream.n_tiers != topology.n_tiers:
            raise SchedulingError(
                f"stream has {stream.n_tiers} tiers, topology has {topology.n_tiers}"
            )
        self.stream = stream
        self.topology = topology
        self.scheduler = scheduler
        self.epoch_policy = epoch_policy or EpochPolicy()
        self.params = params or PenaltyParams()
        self.jobs = stream.by_id()

    def _reset(self) -> None:
        n, m = self.topology.n_tiers, self.topology.n_resources
        self.now = 0
        self._events: List[Event] = []
        self._queues: List[List[List[int]]] = [[[] for _ in range(m)] for _ in range(n)]
        self._executing: List[List[Optional[InService]]] = [[None] * m for _ in range(n)]
        self._timings: Dict[int, JobTiming] = {}
        self._in_system: Dict[int, Job] = {}
        self._last_epoch: Optional[int] = None
        self._epochs = 0
        self.history = DecisionHistory()
        self.scheduler.start(self.topology)
        for job in self.stream.jobs:
            self._push(Event(job.arrival, EventKind.ARRIVAL, job.id, 0, 0))
        self._next_periodic = self.epoch_policy.period or 0
        if self.epoch_policy.period:
            self._push(Event(self._next_periodic, EventKind.RESCHEDULE))

    def _push(self, event: Event) -> None:
        heapq.heappush(self._events, event)

    def tier_state(self, tier: int) -> TierState:
        return TierState(
            tier_index=tier,
            queues=tuple(tuple(q) for q in self._queues[tier]),
            executing=tuple(self._executing[tier]),
        )

    def snapshot(self) -> SystemSnapshot:
        timings = {job_id: self._timings[job_id] for job_id in self._in_system}
        return SystemSnapshot(
            now=self.now,
            jobs=dict(self._in_system),
            tiers=tuple(self.tier_state(j) for j in range(self.topology.n_tiers)),
            tier_arrivals={i: tuple(t.arrivals) for i, t in timings.items()},
            waited={i: tuple(t.waited) for i, t in timings.items()},
        )

    def run(self) -> SimReport:
        """Simulate the whole stream to completion."""
        self._reset()
        self._loop(None)
        for job_id, timing in self._timings.items():
            if not timing.complete:
                raise SchedulingError(f"job {job_id} never left the system")
        return self._report()

    def run_until(self, stop: Callable[[SystemSnapshot], bool]) -> Optional[SystemSnapshot]:
        """Simulate until ``stop`` accepts the snapshot of a reschedule epoch.

        The scheduler is not asked to reschedule at the accepted epoch.
        Returns None if the stream drains first.
        """
        self._reset()
        return self._loop(stop)

    def _loop(self, stop) -> Optional[SystemSnapshot]:
        while self._events:
            event = heapq.heappop(self._events)
            self.now = event.time
            if event.kind == EventKind.DEPARTURE:
                self._depart(event)
            elif event.kind == EventKind.ARRIVAL:
                self._arrive(event)
            elif event.kind == EventKind.SERVICE_START:
                self._start_service(event.tier, event.queue)
            else:
                snapshot = self._epoch(stop)
                if snapshot is not None:
                    return snapshot
        return None

    def _arrive(self, event: Event) -> None:
        job = self.jobs[event.job_id]
        timing = self._timings.get(job.id)
        if timing is None:
            timing = JobTiming(job_id=job.id, n_tiers=self.topology.n_tiers)
            self._timings[job.id] = timing
            self._in_system[job.id] = job
        timing.arrivals.append(self.now)
        queue = self.scheduler.dispatch(job, self.tier_state(event.tier))
        if not 0 <= queue < self.topology.n_resources:
            raise ScheduleInvariantError(
                f"{self.scheduler.name} dispatched job {job.id} to missing queue {queue}"
            )
        self._queues[event.tier][queue].append(job.id)
        self.history.dispatches.append(
            DispatchRecord(time=self.now, job_id=job.id, tier=event.tier, queue=queue)
        )
        self._push(Event(self.now, EventKind.SERVICE_START, 0, event.tier, queue))
        if self.epoch_policy.on_arrival:
            self._push(Event(self.now, EventKind.RESCHEDULE))

    def _start_service(self, tier: int, queue: int) -> None:
        if self._executing[tier][queue] is not None or not self._queues[tier][queue]:
            return
        job_id = self._queues[tier][queue].pop(0)
        self._executing[tier][queue] = InService(job_id=job_id, start=self.now)
        timing = self._timings[job_id]
        timing.resources.append(queue)
        timing.starts.append(self.now)
        end = self.now + self.jobs[job_id].exec_times[tier]
        self._push(Event(end, EventKind.DEPARTURE, job_id, tier, queue))

    def _depart(self, event: Event) -> None:
        self._executing[event.tier][event.queue] = None
        self._timings[event.job_id].departures.append(self.now)
        self._push(Event(self.now, EventKind.SERVICE_START, 0, event.tier, event.queue))
        if event.tier + 1 < self.topology.n_tiers:
            self._push(Event(self.now, EventKind.ARRIVAL, event.job_id, event.tier + 1, 0))
        else:
            del self._in_system[event.job_id]

    def _epoch(self, stop) -> Optional[SystemSnapshot]:
        period = self.epoch_policy.period
        if period and self.now == self._next_periodic:
            self._next_periodic += period
            if self._events:
                self._push(Event(self._next_periodic, EventKind.RESCHEDULE))
        if self._last_epoch == self.now:
            return None
        self._last_epoch = self.now
        snapshot = self.snapshot()
        if stop is not None and stop(snapshot):
            return snapshot
        if snapshot.n_pending == 0:
            return None
        self._epochs += 1
        schedule = self.scheduler.reschedule(snapshot)
        if schedule is None or schedule == snapshot.schedule:
            return None
        try:
            snapshot.validate_schedule(schedule)
        except ScheduleInvariantError as error:
            raise ScheduleInvariantError(
                f"{self.scheduler.name} at t={self.now}: {error}"
            ) from error
        logger.debug("t=%d: %s reordered %d jobs", self.now, self.scheduler.name, snapshot.n_pending)
        for j, queues in enumerate(schedule.per_tier):
            self._queues[j] = [list(q) for q in queues]
            for k, queue in enumerate(queues):
                if queue and self._executing[j][k] is None:
                    self._push(Event(self.now, EventKind.SERVICE_START, 0, j, k))
        self.history.reorders.append(ReorderRecord(time=self.now, schedule=schedule))
        return None

    def _report(self) -> SimReport:
        trace = TimingTrace(n_tiers=self.topology.n_tiers, jobs=dict(sorted(self._timings.items())))
        return SimReport(
            scheduler=self.scheduler.name,
            topology=self.topology,
            trace=trace,
            history=self.history,
            epochs=self._epochs,
            objectives={
                "waiting": realized_waiting(trace, self.jobs, self.params),
                "sla": realized_violation(trace, self.jobs, self.params),
            },
        )


def run(
    stream: JobStream,
    topology: Topology,
    scheduler: Scheduler,
    epoch_policy: Optional[EpochPolicy] = None,
    params: Optional[PenaltyParams] = None,
) -> SimReport:
    return Simulator(stream, topology, scheduler, epoch_policy, params).run()


class TraceMismatch(BaseModel):
    """The earliest point where two traces disagree."""

    time: int
    job_id: int
    tier: int
    field: str
    expected: Optional[int] = None
    actual: Optional[int] = None

    def __str__(self) -> str:
        return (
            f"job {self.job_id} tier {self.tier} {self.field}: expected {self.expected}, "
            f"got {self.actual} (diverges at t={self.time})"
        )


def first_mismatch(expected: TimingTrace, actual: TimingTrace) -> Optional[TraceMismatch]:
    """Find the earliest divergence between two traces, or None if they agree."""
    found: List[TraceMismatch] = []
    for job_id in sorted(set(expected.jobs) | set(actual.jobs)):
        left = expected.jobs.get(job_id)
        right = actual.jobs.get(job_id)
        if left is None or right is None:
            present = left or right
            time = present.arrivals[0] if present.arrivals else 0
            found.append(TraceMismatch(time=time, job_id=job_id, tier=0, field="presence"))
            continue
        for field in ("arrivals", "starts", "resources", "departures"):
            a, b = getattr(left, field), getattr(right, field)
            for j in range(max(len(a), len(b))):
                x = a[j] if j < len(a) else None
                y = b[j] if j < len(b) else None
                if x == y:
                    continue
                if field == "resources":
                    times = [t for t in (_get(left.starts, j), _get(right.starts, j)) if t is not None]
                else:
                    times = [t for t in (x, y) if t is not None]
                found.append(
                    TraceMismatch(
                        time=min(times) if times else 0,
                        job_id=job_id,
                        tier=j,
                        field=field,
                        expected=x,
                        actual=y,
                    )
                )
                break
    if not found:
        return None
    return min(found, key=lambda m: (m.time, m.job_id, m.tier))


def _get(values: List[int], index: int) -> Optional[int]:
    return values[index] if index < len(values) else None


def verify_trace(expected: TimingTrace, actual: TimingTrace) -> None:
    mismatch = first_mismatch(expected, actual)
    if mismatch is not None:
        raise OracleMismatchError(mismatch)


def oracle_recompute(
    history: DecisionHistory, stream: JobStream, topology: Topology
) -> TimingTrace:
    """Replay recorded decisions from first principles, without an event heap.

    Time advances to the next instant at which something happens; at each
    instant departures, arrivals (by job id), service starts and recorded
    reorders are applied in that order.
    """
    jobs = stream.by_id()
    n, m = topology.n_tiers, topology.n_resources
    routing = {(d.job_id, d.tier): d for d in history.dispatches}
    reorders: Dict[int, List[Schedule]] = {}
    for record in history.reorders:
        reorders.setdefault(record.time, []).append(record.schedule)
    reorder_times = sorted(reorders)

    queues = [[[] for _ in range(m)] for _ in range(n)]
    busy: List[List[Optional[tuple]]] = [[None] * m for _ in range(n)]
    timings: Dict[int, JobTiming] = {}
    upcoming = sorted(stream.jobs, key=lambda job: (job.arrival, job.id))
    next_job = 0
    next_reorder = 0

    def start_idle(t: int) -> None:
        for j in range(n):
            for k in range(m):
                if busy[j][k] is None and queues[j][k]:
                    job_id = queues[j][k].pop(0)
                    busy[j][k] = (job_id, t + jobs[job_id].exec_times[j])
                    timings[job_id].resources.append(k)
                    timings[job_id].starts.append(t)

    while True:
        candidates = [slot[1] for tier in busy for slot in tier if slot is not None]
        if next_job < len(upcoming):
            candidates.append(upcoming[next_job].arrival)
        if next_reorder < len(reorder_times):
            candidates.append(reorder_times[next_reorder])
        if not candidates:
            break
        t = min(candidates)

        arriving = []
        for j in range(n):
            for k in range(m):
                slot = busy[j][k]
                if slot is not None and slot[1] == t:
                    busy[j][k] = None
                    timings[slot[0]].departures.append(t)
                    if j + 1 < n:
                        arriving.append((slot[0], j + 1))
        while next_job < len(upcoming) and upcoming[next_job].arrival == t:
            job = upcoming[next_job]
            timings[job.id] = JobTiming(job_id=job.id, n_tiers=n)
            arriving.append((job.id, 0))
            next_job += 1

        for job_id, tier in sorted(arriving):
            decision = routing.get((job_id, tier))
            if decision is None:
                raise OracleMismatchError(
                    TraceMismatch(time=t, job_id=job_id, tier=tier, field="dispatch")
                )
            timings[job_id].arrivals.append(t)
            queues[tier][decision.queue].append(job_id)
        start_idle(t)

        if next_reorder < len(reorder_times) and reorder_times[next_reorder] == t:
            for schedule in reorders[t]:
                for j, tier_queues in enumerate(schedule.per_tier):
                    current = sorted(job_id for q in queues[j] for job_id in q)
                    proposed = sorted(job_id for q in tier_queues for job_id in q)
                    if current != proposed:
                        odd = sorted(set(current) ^ set(proposed))
                        raise OracleMismatchError(
                            TraceMismatch(
                                time=t,
                                job_id=odd[0] if odd else 0,
                                tier=j,
                                field="reorder",
                            )
                        )
                    queues[j] = [list(q) for q in tier_queues]
                start_idle(t)
            next_reorder += 1

    return TimingTrace(n_tiers=n, jobs=dict(sorted(timings.items())))


def export_trace(
    report: SimReport,
    jobs: Dict[int, Job],
    params: PenaltyParams,
    path: Union[str, Path],
) -> Path:
    """Write one CSV row per job: per-tier A/D/wait, response, alpha and both penalties."""
    rows = []
    n = report.topology.n_tiers
    for job_id, timing in report.trace.jobs.items():
        job = jobs[job_id]
        row = {"id": job_id}
        waited = timing.waited
        for j in range(n):
            row[f"arrival_{j + 1}"] = _get(timing.arrivals, j)
            row[f"departure_{j + 1}"] = _get(timing.departures, j)
            row[f"wait_{j + 1}"] = _get(waited, j)
            row[f"resource_{j + 1}"] = None if j >= len(timing.resources) else timing.resources[j] + 1
        if timing.complete:
            alpha = timing.response - job.deadline
            row["response"] = timing.response
            row["alpha"] = alpha
            row["eta_waiting"] = waiting_penalty(job, timing.total_wait, params)
            row["eta_sla"] = sla_penalty(job, alpha, params)
        rows.append(row)
    path = Path(path)
    frame = pd.DataFrame(rows)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(TRACE_SCHEMA + "\n")
        frame.to_csv(handle, index=False)
    return path
