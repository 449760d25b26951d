import pytest

from vqsched.exceptions import SchedulingError
from vqsched.ga import GAConfig, GenerationStat
from vqsched.models import Job, SystemSnapshot, TierState, Topology
from vqsched.penalty import CostModel, PenaltyParams
from vqsched.strategies import (
    BaselineScheduler,
    DispatchOnly,
    GeneticScheduler,
    make_scheduler,
    merge_traces,
    parse_strategy,
)

EXEC = {1: (9, 4), 2: (3, 7), 3: (6, 2), 4: (8, 8), 5: (1, 5), 6: (4, 9), 7: (2, 3), 8: (7, 1), 9: (5, 6), 10: (3, 2)}
PSI = {1: 800.0, 2: 1200.0, 3: 1000.0, 4: 950.0, 5: 1300.0, 6: 700.0, 7: 1100.0, 8: 1000.0, 9: 900.0, 10: 1250.0}


def two_tier_snapshot():
    """Five jobs waiting at each tier of two resources."""
    jobs = {
        i: Job(id=i, exec_times=e, target_completion=3 * sum(e), service_cost=PSI[i], violation_cost=PSI[i])
        for i, e in EXEC.items()
    }
    first = TierState(tier_index=0, queues=((1, 2, 3), (4, 5)))
    second = TierState(tier_index=1, queues=((6, 7), (8, 9, 10)))
    arrivals = {i: (0,) for i in range(1, 6)}
    arrivals.update({i: (0, 0) for i in range(6, 11)})
    waited = {i: (0,) for i in range(6, 11)}
    return SystemSnapshot(jobs=jobs, tiers=(first, second), tier_arrivals=arrivals, waited=waited)


def started(strategy, generations=60, seed=0):
    scheduler = make_scheduler(strategy, GAConfig(generations=generations, seed=seed))
    scheduler.start(Topology(n_tiers=2, n_resources=2))
    return scheduler


class TestParseStrategy:
    """Strategy strings."""

    @pytest.mark.parametrize("text", ["fcfs", "wlc", "wrr"])
    def test_baselines(self, text):
        spec = parse_strategy(text)
        assert spec.dispatch == text
        assert not spec.is_genetic

    def test_genetic(self):
        spec = parse_strategy("ga:segmented:sla_tier_allowance")
        assert (spec.scope, spec.fitness_kind, spec.differentiated) == ("segmented", "sla_tier_allowance", True)
        assert spec.dispatch == "fcfs"
        assert spec.label == "ga:segmented:sla_tier_allowance"

    def test_uniform_costs(self):
        assert not parse_strategy("ga:system:waiting:uniform").differentiated

    @pytest.mark.parametrize(
        "text",
        ["", "random", "ga", "ga:tier", "ga:queue:waiting", "ga:tier:makespan", "ga:tier:waiting:flat", "ga:tier:waiting:uniform:x"],
    )
    def test_rejected(self, text):
        with pytest.raises(SchedulingError):
            parse_strategy(text)


class TestMakeScheduler:
    """Scheduler handles."""

    def test_baseline(self):
        scheduler = make_scheduler("wrr")
        assert isinstance(scheduler, BaselineScheduler)
        assert scheduler.name == "wrr"
        assert scheduler.reschedule(two_tier_snapshot()) is None

    def test_start_restarts_the_dispatch_cycle(self):
        scheduler = make_scheduler("wrr")
        scheduler.start(Topology(n_resources=3))
        job = Job(id=1, exec_times=(5,), target_completion=20)
        idle = TierState(queues=((), (), ()))
        assert [scheduler.dispatch(job, idle) for _ in range(2)] == [0, 1]
        scheduler.start(Topology(n_resources=3))
        assert scheduler.dispatch(job, idle) == 0

    def test_genetic_takes_fitness_from_the_strategy(self):
        scheduler = make_scheduler("ga:tier:sla_allowance:uniform", GAConfig(fitness_kind="waiting"))
        assert isinstance(scheduler, GeneticScheduler)
        assert scheduler.config.fitness_kind == "sla_allowance"
        assert not scheduler.config.differentiated

    def test_genetic_requires_a_genetic_spec(self):
        with pytest.raises(SchedulingError):
            GeneticScheduler(parse_strategy("wlc"), GAConfig(), PenaltyParams())


class TestGeneticScheduler:
    """Reordering at an epoch."""

    @pytest.mark.parametrize("scope", ["tier", "system", "segmented"])
    @pytest.mark.parametrize("kind", ["waiting", "sla_allowance", "sla_tier_allowance"])
    def test_never_worse_than_the_incumbent(self, scope, kind):
        snapshot = two_tier_snapshot()
        schedule = started(f"ga:{scope}:{kind}").reschedule(snapshot)
        snapshot.validate_schedule(schedule)
        model = CostModel(snapshot, kind, PenaltyParams())
        assert model.cost(schedule) <= model.cost(snapshot.schedule) + 1e-9

    @pytest.mark.parametrize("scope", ["tier", "system", "segmented"])
    def test_jobs_stay_in_their_tier(self, scope):
        snapshot = two_tier_snapshot()
        schedule = started(f"ga:{scope}:waiting").reschedule(snapshot)
        for tier, queues in zip(snapshot.tiers, schedule.per_tier):
            assert sorted(i for q in queues for i in q) == sorted(tier.pending)

    def test_segmented_never_migrates(self):
        snapshot = two_tier_snapshot()
        schedule = started("ga:segmented:waiting").reschedule(snapshot)
        for tier, queues in zip(snapshot.tiers, schedule.per_tier):
            assert [sorted(q) for q in queues] == [sorted(q) for q in tier.queues]

    def test_same_seed_same_schedule(self):
        snapshot = two_tier_snapshot()
        first = started("ga:system:waiting", seed=4).reschedule(snapshot)
        second = started("ga:system:waiting", seed=4).reschedule(snapshot)
        assert first == second

    def test_convergence_covers_every_generation(self):
        scheduler = started("ga:tier:waiting", generations=30)
        scheduler.reschedule(two_tier_snapshot())
        assert [stat.generation for stat in scheduler.convergence] == list(range(31))
        best = [stat.best_fitness for stat in scheduler.convergence]
        assert best == sorted(best, reverse=True)

    def test_start_clears_convergence(self):
        scheduler = started("ga:tier:waiting", generations=5)
        scheduler.reschedule(two_tier_snapshot())
        scheduler.start(Topology(n_tiers=2, n_resources=2))
        assert scheduler.convergence == []


class TestMergeTraces:
    """Summing independent searches."""

    def test_sums_by_generation(self):
        a = [GenerationStat(generation=g, best_fitness=10 - g, mean_fitness=12 - g) for g in range(3)]
        b = [GenerationStat(generation=g, best_fitness=5.0, mean_fitness=6.0) for g in range(3)]
        merged = merge_traces([a, b])
        assert [s.best_fitness for s in merged] == [15, 14, 13]
        assert [s.mean_fitness for s in merged] == [18, 17, 16]

    def test_empty(self):
        assert merge_traces([]) == []


class TestDispatchOnly:
    """Dispatch without reordering."""

    def test_forwards_dispatch(self, mocker):
        inner = make_scheduler("ga:tier:waiting")
        spy = mocker.spy(inner, "dispatch")
        wrapped = DispatchOnly(inner)
        wrapped.start(Topology(n_resources=2))
        job = Job(id=1, exec_times=(5,), target_completion=20)
        assert wrapped.dispatch(job, TierState(queues=((), ()))) == 0
        spy.assert_called_once()
        assert wrapped.name == inner.name

    def test_never_reschedules(self, mocker):
        inner = make_scheduler("ga:system:waiting")
        spy = mocker.spy(inner, "reschedule")
        assert DispatchOnly(inner).reschedule(two_tier_snapshot()) is None
        spy.assert_not_called()
