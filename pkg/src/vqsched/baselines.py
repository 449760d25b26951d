"""Reference dispatch policies: FCFS, weighted least connection and weighted round robin.

A dispatcher routes an arriving job to one resource queue of a tier and
appends it at the tail. Baselines never reorder queues afterwards.
"""

from typing import List, Literal, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, field_validator

from vqsched.models import Job, TierState

BaselineName = Literal["fcfs", "wlc", "wrr"]


class BaselineKind(BaseModel):
    """Dispatch policy and per-resource weights (all 1 by default)."""

    model_config = ConfigDict(frozen=True)

    kind: BaselineName = "fcfs"
    weights: Optional[Tuple[float, ...]] = None

    @field_validator("weights")
    def weights_must_be_positive(cls, v):
        if v is not None and any(w <= 0 for w in v):
            raise ValueError("weights must all be > 0")
        return v


class Dispatcher:
    """Base class for dispatch policies of one tier."""

    name = "dispatcher"

    def __init__(self, n_queues: int, weights: Optional[Sequence[float]] = None):
        if n_queues < 1:
            raise ValueError("a tier needs at least one queue")
        if weights is None:
            weights = [1.0] * n_queues
        if len(weights) != n_queues:
            raise ValueError(f"expected {n_queues} weights, got {len(weights)}")
        self.n_queues = n_queues
        self.weights: List[float] = [float(w) for w in weights]

    def assign(self, job: Job, tier_state: TierState) -> int:
        raise NotImplementedError


class FcfsDispatcher(Dispatcher):
    """Least loaded queue by job count; ties are broken round-robin."""

    name = "fcfs"

    def __init__(self, n_queues: int, weights: Optional[Sequence[float]] = None):
        super().__init__(n_queues, weights)
        self._next = 0

    def assign(self, job: Job, tier_state: TierState) -> int:
        loads = [tier_state.load(k) for k in range(self.n_queues)]
        least = min(loads)
        for offset in range(self.n_queues):
            k = (self._next + offset) % self.n_queues
            if loads[k] == least:
                self._next = (k + 1) % self.n_queues
                return k
        return 0  # unreachable


class WlcDispatcher(Dispatcher):
    """Weighted least connection.

    Connections are the jobs queued at a resource plus the one in service.
    """

    name = "wlc"

    def assign(self, job: Job, tier_state: TierState) -> int:
        scores = [tier_state.load(k) / self.weights[k] for k in range(self.n_queues)]
        return scores.index(min(scores))


class WrrDispatcher(Dispatcher):
    """Smooth weighted round robin, blind to the queue state."""

    name = "wrr"

    def __init__(self, n_queues: int, weights: Optional[Sequence[float]] = None):
        super().__init__(n_queues, weights)
        self._current = [0.0] * n_queues

    def assign(self, job: Job, tier_state: TierState) -> int:
        total = sum(self.weights)
        for k, weight in enumerate(self.weights):
            self._current[k] += weight
        best = max(self._current)
        chosen = self._current.index(best)
        self._current[chosen] -= total
        return chosen


_DISPATCHERS = {
    "fcfs": FcfsDispatcher,
    "wlc": WlcDispatcher,
    "wrr": WrrDispatcher,
}


def make_dispatcher(kind: BaselineKind, n_queues: int) -> Dispatcher:
    return _DISPATCHERS[kind.kind](n_queues, kind.weights)


def assign(job: Job, tier_state: TierState, dispatcher: Dispatcher) -> int:
    """Queue index the dispatcher picks for ``job``."""
    return dispatcher.assign(job, tier_state)
