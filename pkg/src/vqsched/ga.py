"""Permutation genetic search over virtual queues.

A virtual queue is the cascade of several resource queues into one
permutation chromosome. Each contiguous segment of the chromosome maps to a
physical queue, so moving a gene within its segment reorders that queue and
moving it across a segment boundary migrates the job to another resource.
Segment lengths stay fixed for the duration of one search.

Genes may only move inside their domain: the tier they wait in for the
``tier`` and ``system`` scopes, their own queue for ``single_queue``.
"""

import itertools
import logging
import math
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from vqsched.exceptions import ChromosomeError, EnumerationBoundError, SchedulingError
from vqsched.models import Schedule, SystemSnapshot
from vqsched.penalty import CostModel, FitnessKind, PenaltyParams

logger = logging.getLogger(__name__)

Scope = Literal["tier", "system", "single_queue"]

BRUTE_FORCE_BOUND = 9


class Segment(BaseModel):
    model_config = ConfigDict(frozen=True)

    tier: int = Field(..., ge=0)
    queue: int = Field(..., ge=0)
    start: int = Field(..., ge=0)
    length: int = Field(..., ge=0)

    @property
    def end(self) -> int:
        return self.start + self.length


class Chromosome(BaseModel):
    """A virtual queue: a permutation of job ids cut into queue segments."""

    model_config = ConfigDict(frozen=True)

    genes: Tuple[int, ...]
    segments: Tuple[Segment, ...]
    scope: Scope = "tier"

    @model_validator(mode="after")
    def check_permutation(self):
        if len(set(self.genes)) != len(self.genes):
            raise ValueError("genes must not repeat a job id")
        offset = 0
        for segment in self.segments:
            if segment.start != offset:
                raise ValueError(f"segment for queue {segment.queue} starts at {segment.start}, expected {offset}")
            offset = segment.end
        if offset != len(self.genes):
            raise ValueError(f"segments cover {offset} genes, chromosome has {len(self.genes)}")
        return self

    @property
    def domains(self) -> List[Tuple[int, int]]:
        """Half-open position ranges within which genes may move."""
        if self.scope == "single_queue":
            return [(0, len(self.genes))]
        spans: Dict[int, List[int]] = {}
        for segment in self.segments:
            span = spans.setdefault(segment.tier, [segment.start, segment.end])
            span[1] = segment.end
        return [tuple(span) for _, span in sorted(spans.items())]

    def domain_of(self, position: int) -> Tuple[int, int]:
        for lo, hi in self.domains:
            if lo <= position < hi:
                return lo, hi
        raise ChromosomeError(f"position {position} outside chromosome of length {len(self.genes)}")

    def with_genes(self, genes: Sequence[int]) -> "Chromosome":
        return Chromosome(genes=tuple(genes), segments=self.segments, scope=self.scope)


class GAConfig(BaseModel):
    """Genetic search parameters.

    Crossover and mutation rates are fractions of the population size; each
    generation applies ``ceil(rate * population_size)`` of each operator.
    Every crossover pair yields two children and the mutations act on those
    children. ``local_search`` bounds the evaluations spent polishing the
    list-scheduled seed individual.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    population_size: int = Field(10, ge=2)
    generations: int = Field(1000, ge=0)
    crossover_rate: float = Field(0.1, gt=0, le=1)
    mutation_rate: float = Field(0.1, gt=0, le=1)
    seed: int = Field(0, ge=0)
    fitness_kind: FitnessKind = "waiting"
    differentiated: bool = True
    local_search: int = Field(300, ge=0)

    @property
    def crossovers(self) -> int:
        return max(1, math.ceil(self.crossover_rate * self.population_size - 1e-9))

    @property
    def mutations(self) -> int:
        return max(1, math.ceil(self.mutation_rate * self.population_size - 1e-9))


class GenerationStat(BaseModel):
    generation: int
    best_fitness: float
    mean_fitness: float


class EvolutionResult(BaseModel):
    best: Chromosome
    best_fitness: float
    initial_fitness: float
    trace: List[GenerationStat] = Field(default_factory=list)


class BruteForceResult(BaseModel):
    best: Schedule
    cost: float
    optimal: List[Schedule] = Field(default_factory=list)
    evaluated: int = 0


def encode(
    snapshot: SystemSnapshot,
    scope: Scope = "tier",
    tier: int = 0,
    queue: int = 0,
) -> Chromosome:
    """Cascade the queues covered by ``scope`` into one chromosome.

    Queues are concatenated in (tier, queue) order; empty queues get no
    segment and stay empty on decode.
    """
    if scope == "system":
        covered = [(t.tier_index, k) for t in snapshot.tiers for k in range(len(t.queues))]
    elif scope == "tier":
        covered = [(tier, k) for k in range(len(snapshot.tiers[tier].queues))]
    else:
        covered = [(tier, queue)]
    genes: List[int] = []
    segments = []
    for j, k in covered:
        state = snapshot.tiers[j]
        order = state.queues[k]
        running = {slot.job_id for slot in state.executing if slot is not None}
        started = running.intersection(order)
        if started:
            raise ChromosomeError(f"job {min(started)} is in service and cannot be encoded")
        if order:
            segments.append(Segment(tier=j, queue=k, start=len(genes), length=len(order)))
        genes.extend(order)
    return Chromosome(genes=tuple(genes), segments=tuple(segments), scope=scope)


def decode(chromosome: Chromosome, base: Union[Schedule, SystemSnapshot]) -> Schedule:
    """Write each segment back as its queue's ordering.

    Queues not covered by the chromosome keep their ordering from ``base``.
    """
    if isinstance(base, SystemSnapshot):
        base = base.schedule
    per_tier = [list(queues) for queues in base.per_tier]
    for segment in chromosome.segments:
        if segment.tier >= len(per_tier) or segment.queue >= len(per_tier[segment.tier]):
            raise ChromosomeError(f"segment maps to missing queue {segment.tier}/{segment.queue}")
        per_tier[segment.tier][segment.queue] = chromosome.genes[segment.start:segment.end]
    return Schedule(per_tier=tuple(tuple(queues) for queues in per_tier))


class FitnessFunction:
    """Scores gene sequences laid over fixed segments."""

    def __init__(
        self,
        snapshot: SystemSnapshot,
        segments: Sequence[Segment],
        kind: FitnessKind,
        params: PenaltyParams,
    ):
        self.model = CostModel(snapshot, kind, params)
        self.segments = [(s.tier, s.queue, s.start, s.end) for s in segments]
        self.evaluations = 0

    def __call__(self, genes: Sequence[int]) -> float:
        self.evaluations += 1
        total = 0.0
        for tier, queue, start, end in self.segments:
            total += self.model.queue_cost(tier, queue, genes[start:end])
        return total


def fitness(
    chromosome: Chromosome,
    snapshot: SystemSnapshot,
    params: PenaltyParams,
    kind: FitnessKind = "waiting",
) -> float:
    """Linear cost of the schedule a chromosome encodes."""
    snapshot.validate_schedule(decode(chromosome, snapshot))
    return FitnessFunction(snapshot, chromosome.segments, kind, params)(chromosome.genes)


def select(
    fitnesses: Sequence[float],
    rng: np.random.Generator,
    count: int = 1,
) -> List[int]:
    """Roulette-wheel selection for a cost to be minimized.

    The slice of individual r is proportional to ``max(f) - f_r + eps`` so
    cheaper schedules are drawn more often.
    """
    n = len(fitnesses)
    if n == 1:
        return [0] * count
    values = np.asarray(fitnesses, dtype=float)
    if not np.all(np.isfinite(values)):
        raise SchedulingError("fitness values must be finite")
    worst = float(values.max())
    weights = worst - values + 1e-9 * max(1.0, abs(worst))
    total = weights.sum()
    if total <= 0:
        return [int(i) for i in rng.integers(0, n, count)]
    return [int(i) for i in rng.choice(n, size=count, p=weights / total)]


def _crossover(a: Sequence[int], b: Sequence[int], cut: int) -> List[int]:
    head = list(a[:cut])
    taken = set(head)
    return head + [gene for gene in b if gene not in taken]


def _insert(genes: Sequence[int], src: int, dst: int) -> List[int]:
    child = list(genes)
    child.insert(dst, child.pop(src))
    return child


def crossover_single_point(parent_a: Chromosome, parent_b: Chromosome, cut: int) -> Chromosome:
    """One-point order crossover.

    The child keeps ``parent_a``'s genes before ``cut`` and fills the rest
    with the remaining ids in ``parent_b``'s relative order.
    """
    if set(parent_a.genes) != set(parent_b.genes) or len(parent_a.genes) != len(parent_b.genes):
        raise ChromosomeError("parents must be permutations of the same job ids")
    if parent_a.segments != parent_b.segments:
        raise ChromosomeError("parents must share segment boundaries")
    if not 0 <= cut <= len(parent_a.genes):
        raise ChromosomeError(f"cut {cut} out of range")
    return parent_a.with_genes(_crossover(parent_a.genes, parent_b.genes, cut))


def mutate_insert(chromosome: Chromosome, src: int, dst: int) -> Chromosome:
    """Remove the gene at ``src`` and reinsert it at ``dst``."""
    size = len(chromosome.genes)
    if not (0 <= src < size and 0 <= dst < size):
        raise ChromosomeError(f"positions {src}, {dst} out of range for length {size}")
    if chromosome.domain_of(src) != chromosome.domain_of(dst):
        raise ChromosomeError(f"positions {src} and {dst} lie in different tiers")
    return chromosome.with_genes(_insert(chromosome.genes, src, dst))


def _shuffled(genes: Sequence[int], domains: Sequence[Tuple[int, int]], rng: np.random.Generator) -> List[int]:
    result = list(genes)
    for lo, hi in domains:
        block = result[lo:hi]
        result[lo:hi] = [block[i] for i in rng.permutation(len(block))]
    return result


def _list_scheduled(genes: Sequence[int], segments: Sequence[Segment], model: CostModel, single: bool) -> List[int]:
    """Weighted shortest processing time dispatch into fixed-length segments.

    Jobs of each domain are taken by ``exec_time / weight`` and appended to
    the least loaded segment that still has room.
    """

    def ratio(job_id: int) -> Tuple[float, int]:
        weight = model.weight[job_id]
        return (model.exec_time[job_id] / weight if weight > 0 else math.inf, job_id)

    groups: Dict[int, List[Segment]] = {}
    for segment in segments:
        groups.setdefault(0 if single else segment.tier, []).append(segment)
    result = list(genes)
    for group in groups.values():
        lo, hi = group[0].start, group[-1].end
        loads = [model.residual[(s.tier, s.queue)] for s in group]
        filled: List[List[int]] = [[] for _ in group]
        for job_id in sorted(result[lo:hi], key=ratio):
            open_ = [i for i, s in enumerate(group) if len(filled[i]) < s.length]
            target = min(open_, key=lambda i: (loads[i], i))
            filled[target].append(job_id)
            loads[target] += model.exec_time[job_id]
        result[lo:hi] = [job_id for queue in filled for job_id in queue]
    return result


def _moves(domains: Sequence[Tuple[int, int]]):
    for lo, hi in domains:
        for i, j in itertools.combinations(range(lo, hi), 2):
            yield "swap", i, j
        for i, j in itertools.permutations(range(lo, hi), 2):
            yield "insert", i, j


def _descend(
    genes: List[int],
    cost: float,
    domains: Sequence[Tuple[int, int]],
    score: "FitnessFunction",
    budget: int,
) -> Tuple[List[int], float]:
    """First-improvement descent over swaps and single moves inside domains."""
    improved = True
    while improved and budget > 0:
        improved = False
        for move, i, j in _moves(domains):
            if budget <= 0:
                break
            budget -= 1
            if move == "swap":
                candidate = list(genes)
                candidate[i], candidate[j] = candidate[j], candidate[i]
            else:
                candidate = _insert(genes, i, j)
            value = score(candidate)
            if value < cost:
                genes, cost, improved = candidate, value, True
    return genes, cost


def _initial_population(
    incumbent: Chromosome,
    initial: float,
    score: "FitnessFunction",
    config: GAConfig,
    rng: np.random.Generator,
) -> Tuple[List[List[int]], List[float]]:
    """Incumbent, a polished heuristic seed, then distinct random shuffles."""
    domains = incumbent.domains
    population = [list(incumbent.genes)]
    costs = [initial]
    seen = {tuple(incumbent.genes)}

    seed = _list_scheduled(incumbent.genes, incumbent.segments, score.model, incumbent.scope == "single_queue")
    seed, seed_cost = _descend(seed, score(seed), domains, score, config.local_search)
    if tuple(seed) not in seen:
        population.append(seed)
        costs.append(seed_cost)
        seen.add(tuple(seed))

    while len(population) < config.population_size:
        for _ in range(3):
            genes = _shuffled(incumbent.genes, domains, rng)
            if tuple(genes) not in seen:
                break
        seen.add(tuple(genes))
        population.append(genes)
        costs.append(score(genes))
    return population, costs


def evolve(
    snapshot: SystemSnapshot,
    scope: Scope,
    config: GAConfig,
    params: PenaltyParams,
    tier: int = 0,
    queue: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> EvolutionResult:
    """Search for a cheaper ordering of the queues covered by ``scope``.

    The population starts from the current schedule, a list-scheduled seed
    polished by local descent, and random permutations. Each generation
    draws ``config.crossovers`` roulette pairs, each giving two order
    crossover children, and applies ``config.mutations`` insert mutations
    to those children. Offspring that duplicate a member of the population
    are discarded, the rest replace the worst individuals, and the best
    individual is never replaced.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if not config.differentiated:
        params = params.flat()
    incumbent = encode(snapshot, scope, tier, queue)
    score = FitnessFunction(snapshot, incumbent.segments, config.fitness_kind, params)
    initial = score(incumbent.genes)
    size = len(incumbent.genes)

    if size <= 1:
        trace = [GenerationStat(generation=g, best_fitness=initial, mean_fitness=initial)
                 for g in range(config.generations + 1)]
        return EvolutionResult(best=incumbent, best_fitness=initial, initial_fitness=initial, trace=trace)

    domains = incumbent.domains
    domain_at = [None] * size
    for lo, hi in domains:
        for position in range(lo, hi):
            domain_at[position] = (lo, hi)

    n = config.population_size
    population, costs = _initial_population(incumbent, initial, score, config, rng)

    elite = min(range(n), key=lambda i: (costs[i], i))
    best_genes, best_cost = list(population[elite]), costs[elite]
    trace = [GenerationStat(generation=0, best_fitness=best_cost, mean_fitness=float(np.mean(costs)))]

    for generation in range(1, config.generations + 1):
        children = []
        for _ in range(config.crossovers):
            i, k = select(costs, rng, 2)
            cut = int(rng.integers(0, size + 1))
            children.append(_crossover(population[i], population[k], cut))
            children.append(_crossover(population[k], population[i], cut))
        for m in range(config.mutations):
            src = int(rng.integers(0, size))
            lo, hi = domain_at[src]
            dst = int(rng.integers(lo, hi))
            children.append(_insert(children[m % (2 * config.crossovers)], src, dst))

        # offspring already present in the population are dropped
        seen = {tuple(genes) for genes in population}
        offspring = []
        for genes in children:
            key = tuple(genes)
            if key not in seen:
                seen.add(key)
                offspring.append(genes)
        offspring_costs = [score(genes) for genes in offspring]

        elite = min(range(n), key=lambda i: (costs[i], i))
        worst_first = sorted((i for i in range(n) if i != elite), key=lambda i: (-costs[i], i))
        for slot, genes, cost in zip(worst_first, offspring, offspring_costs):
            population[slot] = genes
            costs[slot] = cost

        leader = min(range(n), key=lambda i: (costs[i], i))
        if costs[leader] < best_cost:
            best_genes, best_cost = list(population[leader]), costs[leader]
        trace.append(
            GenerationStat(generation=generation, best_fitness=best_cost, mean_fitness=float(np.mean(costs)))
        )

    logger.debug(
        "%s search over %d jobs: %.1f -> %.1f after %d evaluations",
        scope, size, initial, best_cost, score.evaluations,
    )
    return EvolutionResult(
        best=incumbent.with_genes(best_genes),
        best_fitness=best_cost,
        initial_fitness=initial,
        trace=trace,
    )


def _permutations(genes: Sequence[int], domains: Sequence[Tuple[int, int]]):
    blocks = [itertools.permutations(genes[lo:hi]) for lo, hi in domains]
    for parts in itertools.product(*[list(block) for block in blocks]):
        yield [gene for part in parts for gene in part]


def brute_force_best(
    snapshot: SystemSnapshot,
    scope: Scope,
    kind: FitnessKind,
    params: PenaltyParams,
    tier: int = 0,
    queue: int = 0,
    bound: int = BRUTE_FORCE_BOUND,
    rel_tol: float = 1e-9,
) -> BruteForceResult:
    """Exhaustively score every ordering and queue assignment of the covered jobs.

    Queue lengths are held at the snapshot's lengths, as in the genetic
    search. All orderings within ``rel_tol`` of the optimum are returned.
    """
    chromosome = encode(snapshot, scope, tier, queue)
    size = len(chromosome.genes)
    if size > bound:
        raise EnumerationBoundError(size, bound)
    score = FitnessFunction(snapshot, chromosome.segments, kind, params)
    best_cost = math.inf
    ties: List[List[int]] = []
    for genes in _permutations(chromosome.genes, chromosome.domains):
        cost = score(genes)
        if cost < best_cost and not math.isclose(cost, best_cost, rel_tol=rel_tol, abs_tol=1e-9):
            best_cost, ties = cost, [genes]
        elif math.isclose(cost, best_cost, rel_tol=rel_tol, abs_tol=1e-9):
            ties.append(genes)
    optimal = [decode(chromosome.with_genes(genes), snapshot) for genes in ties]
    return BruteForceResult(best=optimal[0], cost=best_cost, optimal=optimal, evaluated=score.evaluations)


def export_convergence(trace: Sequence[GenerationStat], path: Union[str, Path]) -> Path:
    frame = pd.DataFrame([stat.model_dump() for stat in trace], columns=["generation", "best_fitness", "mean_fitness"])
    path = Path(path)
    frame.to_csv(path, index=False)
    return path
