"""Scheduler handles selected by strategy strings.

Accepted forms::

    fcfs | wlc | wrr
    ga:<tier|system|segmented>:<waiting|sla_allowance|sla_tier_allowance>[:uniform]

Genetic strategies dispatch arrivals FCFS and then reorder the waiting jobs
at every epoch. ``uniform`` searches with every psi and zeta set to 1.
"""

import logging
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from vqsched.baselines import BaselineKind, BaselineName, Dispatcher, make_dispatcher
from vqsched.exceptions import SchedulingError
from vqsched.ga import GAConfig, GenerationStat, decode, evolve
from vqsched.models import Job, Schedule, SystemSnapshot, TierState, Topology
from vqsched.penalty import FITNESS_KINDS, FitnessKind, PenaltyParams

logger = logging.getLogger(__name__)

StrategyScope = Literal["tier", "system", "segmented"]
BASELINES = ("fcfs", "wlc", "wrr")
SCOPES = ("tier", "system", "segmented")


class StrategySpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    dispatch: BaselineName = "fcfs"
    scope: Optional[StrategyScope] = None
    fitness_kind: Optional[FitnessKind] = None
    differentiated: bool = True

    @property
    def is_genetic(self) -> bool:
        return self.scope is not None


def parse_strategy(text: str) -> StrategySpec:
    """Parse a strategy string, raising ``SchedulingError`` on unknown parts."""
    parts = text.strip().lower().split(":")
    if len(parts) == 1 and parts[0] in BASELINES:
        return StrategySpec(label=text.strip(), dispatch=parts[0])
    if parts[0] != "ga" or len(parts) not in (3, 4):
        raise SchedulingError(f"unknown strategy '{text}'")
    _, scope, kind, *rest = parts
    if scope not in SCOPES:
        raise SchedulingError(f"strategy '{text}': scope must be one of {', '.join(SCOPES)}")
    if kind not in FITNESS_KINDS:
        raise SchedulingError(f"strategy '{text}': fitness must be one of {', '.join(FITNESS_KINDS)}")
    if rest and rest[0] != "uniform":
        raise SchedulingError(f"strategy '{text}': unknown option '{rest[0]}'")
    return StrategySpec(
        label=text.strip(),
        scope=scope,
        fitness_kind=kind,
        differentiated=not rest,
    )


class BaselineScheduler:
    """Dispatch only: one dispatcher per tier, queues are never reordered."""

    def __init__(self, kind: BaselineKind, name: Optional[str] = None):
        self.kind = kind
        self.name = name or kind.kind
        self._dispatchers: List[Dispatcher] = []

    def start(self, topology: Topology) -> None:
        self._dispatchers = [
            make_dispatcher(self.kind, topology.n_resources) for _ in range(topology.n_tiers)
        ]

    def dispatch(self, job: Job, tier_state: TierState) -> int:
        return self._dispatchers[tier_state.tier_index].assign(job, tier_state)

    def reschedule(self, snapshot: SystemSnapshot) -> Optional[Schedule]:
        return None


class GeneticScheduler(BaselineScheduler):
    """Dispatches like its baseline, then reorders through genetic search.

    Each reschedule call draws a fresh generator from a ``SeedSequence``
    rooted at the GA seed, so a run is reproducible end to end.
    """

    def __init__(
        self,
        spec: StrategySpec,
        config: GAConfig,
        params: PenaltyParams,
    ):
        if not spec.is_genetic:
            raise SchedulingError(f"strategy '{spec.label}' is not a genetic strategy")
        super().__init__(BaselineKind(kind=spec.dispatch), spec.label)
        self.spec = spec
        self.config = config.model_copy(
            update={"fitness_kind": spec.fitness_kind, "differentiated": spec.differentiated}
        )
        self.params = params
        self.convergence: List[GenerationStat] = []

    def start(self, topology: Topology) -> None:
        super().start(topology)
        self._seeds = np.random.SeedSequence(self.config.seed)
        self.convergence = []

    def _rng(self) -> np.random.Generator:
        return np.random.default_rng(self._seeds.spawn(1)[0])

    def reschedule(self, snapshot: SystemSnapshot) -> Optional[Schedule]:
        rng = self._rng()
        schedule = snapshot.schedule
        traces = []
        if self.spec.scope == "system":
            parts = [("system", 0, 0)]
        elif self.spec.scope == "tier":
            parts = [("tier", t.tier_index, 0) for t in snapshot.tiers if len(t.pending) > 1]
        else:
            parts = [
                ("single_queue", t.tier_index, k)
                for t in snapshot.tiers
                for k, queue in enumerate(t.queues)
                if len(queue) > 1
            ]
        for scope, tier, queue in parts:
            result = evolve(snapshot, scope, self.config, self.params, tier=tier, queue=queue, rng=rng)
            schedule = decode(result.best, schedule)
            traces.append(result.trace)
        self.convergence = merge_traces(traces)
        return schedule


def merge_traces(traces: List[List[GenerationStat]]) -> List[GenerationStat]:
    """Add up independent searches generation by generation.

    The searches cover disjoint queues and costs are additive, so the sum of
    their best values is the best total at that generation.
    """
    if not traces:
        return []
    length = min(len(trace) for trace in traces)
    return [
        GenerationStat(
            generation=g,
            best_fitness=sum(trace[g].best_fitness for trace in traces),
            mean_fitness=sum(trace[g].mean_fitness for trace in traces),
        )
        for g in range(length)
    ]


class DispatchOnly:
    """Wrap a scheduler so that it dispatches but never reorders."""

    def __init__(self, inner):
        self.inner = inner
        self.name = inner.name

    def start(self, topology: Topology) -> None:
        self.inner.start(topology)

    def dispatch(self, job: Job, tier_state: TierState) -> int:
        return self.inner.dispatch(job, tier_state)

    def reschedule(self, snapshot: SystemSnapshot) -> Optional[Schedule]:
        return None


def make_scheduler(
    strategy,
    config: Optional[GAConfig] = None,
    params: Optional[PenaltyParams] = None,
):
    """Build a scheduler from a strategy string or a parsed ``StrategySpec``."""
    spec = parse_strategy(strategy) if isinstance(strategy, str) else strategy
    if spec.is_genetic:
        return GeneticScheduler(spec, config or GAConfig(), params or PenaltyParams())
    return BaselineScheduler(BaselineKind(kind=spec.dispatch), spec.label)
