import numpy as np
import pytest
from pydantic import ValidationError

from vqsched.exceptions import (
    IncompleteJobError,
    NotResidentError,
    ScheduleInvariantError,
    UnknownJobError,
)
from vqsched.models import (
    InService,
    Job,
    JobTiming,
    Schedule,
    SystemSnapshot,
    TierState,
    TimingTrace,
    allowances,
    estimate_wait,
    expected_multitier_wait,
    queue_waiting_times,
    response_time,
    tier_allowance,
)


def job(job_id, exec_times, deadline=None, arrival=0, psi=1.0, zeta=1.0):
    total = sum(exec_times)
    deadline = deadline if deadline is not None else 2 * total
    return Job(
        id=job_id,
        arrival=arrival,
        exec_times=tuple(exec_times),
        target_completion=arrival + deadline,
        service_cost=psi,
        violation_cost=zeta,
    )


class TestJob:
    """Job construction and derived quantities."""

    def test_derived_properties(self):
        j = job(1, (2, 3), deadline=105, arrival=10)
        assert j.n_tiers == 2
        assert j.total_exec == 5
        assert j.deadline == 105
        assert j.multitier_allowance == 100

    def test_deadline_must_exceed_execution(self):
        with pytest.raises(ValidationError):
            job(1, (2, 3), deadline=5)

    def test_exec_times_must_be_positive(self):
        with pytest.raises(ValidationError):
            job(1, (2, 0))

    def test_costs_must_be_positive(self):
        with pytest.raises(ValidationError):
            job(1, (2,), psi=0)

    def test_job_is_frozen(self):
        j = job(1, (2,))
        with pytest.raises(ValidationError):
            j.arrival = 4


class TestTierState:
    """Queue membership rules of a tier."""

    def test_idle_resources_are_filled_in(self):
        state = TierState(tier_index=0, queues=((1, 2), ()))
        assert state.executing == (None, None)
        assert state.load(0) == 2
        assert state.load(1) == 0

    def test_in_service_job_counts_towards_load(self):
        state = TierState(queues=((2,), ()), executing=(InService(job_id=1, start=0), None))
        assert state.load(0) == 2
        assert state.pending == (2,)

    def test_job_in_two_queues_is_rejected(self):
        with pytest.raises(ValidationError):
            TierState(queues=((1, 2), (2,)))

    def test_queued_job_cannot_also_execute(self):
        with pytest.raises(ValidationError):
            TierState(queues=((1,),), executing=(InService(job_id=1, start=0),))


class TestQueueWaitingTimes:
    """Remaining wait from queue predecessors."""

    def test_hand_summation(self):
        assert queue_waiting_times([3, 5, 2], {3: 4, 5: 1, 2: 6}) == {3: 0, 5: 4, 2: 5}

    def test_single_job_on_idle_resource(self):
        assert queue_waiting_times([7], {7: 9}) == {7: 0}

    def test_in_service_residual(self):
        # the head job has executed 4 of its 6 units, leaving 2
        waits = queue_waiting_times([1, 2], {1: 5, 2: 3, 9: 6}, in_service=9, elapsed_head=4)
        assert waits == {1: 2, 2: 7}

    def test_unknown_job_is_named(self):
        with pytest.raises(UnknownJobError) as error:
            queue_waiting_times([1, 4], {1: 5})
        assert error.value.job_id == 4


class TestResponseTime:
    """End-to-end response time from a trace."""

    def test_uncontended_two_tier_job(self):
        timing = JobTiming(
            job_id=1, n_tiers=2, arrivals=[0, 2], resources=[0, 0], starts=[0, 2], departures=[2, 5]
        )
        trace = TimingTrace(n_tiers=2, jobs={1: timing})
        assert response_time(trace, job(1, (2, 3))) == 5
        assert timing.total_wait == 0

    def test_incomplete_job_is_signalled(self):
        timing = JobTiming(job_id=1, n_tiers=2, arrivals=[0], resources=[0], starts=[0], departures=[2])
        trace = TimingTrace(n_tiers=2, jobs={1: timing})
        with pytest.raises(IncompleteJobError):
            response_time(trace, job(1, (2, 3)))

    def test_missing_job_is_unknown(self):
        with pytest.raises(UnknownJobError):
            TimingTrace(n_tiers=1).timing(3)


class TestAllowances:
    """Splitting the waiting allowance across tiers."""

    def test_proportional_split(self):
        j = job(1, (2, 3), deadline=105)
        assert tier_allowance(j, 0) == pytest.approx(40)
        assert tier_allowance(j, 1) == pytest.approx(60)

    def test_equal_exec_times_share_equally(self):
        j = job(1, (5, 5, 5, 5), deadline=100)
        assert [tier_allowance(j, t) for t in range(4)] == pytest.approx([20] * 4)

    @pytest.mark.parametrize("exec_times", [(1,), (3, 9), (50, 120, 7), (400, 1, 1, 80)])
    def test_shares_sum_to_the_allowance(self, exec_times):
        j = job(1, exec_times, deadline=sum(exec_times) + 137)
        summary = allowances(j)
        assert sum(summary.tier_allowances) == pytest.approx(summary.multitier_allowance)

    @pytest.mark.slow
    def test_shares_partition_random_jobs(self):
        rng = np.random.default_rng(11)
        for i in range(1000):
            exec_times = tuple(int(e) for e in rng.integers(1, 1000, int(rng.integers(1, 5))))
            j = job(i + 1, exec_times, deadline=sum(exec_times) + int(rng.integers(1, 5000)))
            summary = allowances(j)
            assert all(share >= 0 for share in summary.tier_allowances)
            assert sum(summary.tier_allowances) == pytest.approx(summary.multitier_allowance)

    def test_tier_out_of_range(self):
        with pytest.raises(ValueError):
            tier_allowance(job(1, (2, 3)), 2)


def two_tier_snapshot(now=10):
    """Job 1 waits in tier 1 behind job 3 (in service); job 2 waits in tier 0."""
    jobs = {
        1: job(1, (4, 6), deadline=60),
        2: job(2, (5, 2), deadline=40, arrival=7),
        3: job(3, (3, 8), deadline=50),
    }
    return SystemSnapshot(
        now=now,
        jobs=jobs,
        tiers=(
            TierState(tier_index=0, queues=((2,),)),
            TierState(tier_index=1, queues=((1,),), executing=(InService(job_id=3, start=5),)),
        ),
        tier_arrivals={1: (0, 8), 2: (7,), 3: (0, 5)},
        waited={1: (4,), 3: (2,)},
    )


class TestWaitEstimates:
    """Expected waiting components at a decision epoch."""

    def test_just_arrived_with_empty_queue(self):
        snapshot = SystemSnapshot(
            now=3,
            jobs={1: job(1, (4,), arrival=3)},
            tiers=(TierState(queues=((1,),)),),
        )
        assert expected_multitier_wait(snapshot, 1, 0) == 0

    def test_components_in_second_tier(self):
        snapshot = two_tier_snapshot()
        estimate = estimate_wait(snapshot, 1, 1)
        # job 3 started at 5 with 8 units, so 3 remain at t=10
        assert (estimate.completed, estimate.elapsed, estimate.remaining) == (4, 2, 3)
        assert estimate.expected_tier == 5
        assert estimate.expected_multitier == 9

    def test_residual_can_be_left_out(self):
        snapshot = two_tier_snapshot()
        assert expected_multitier_wait(snapshot, 1, 1, include_residual=False) == 6

    def test_first_tier_with_predecessor(self):
        snapshot = SystemSnapshot(
            now=3,
            jobs={1: job(1, (6,)), 2: job(2, (2,))},
            tiers=(TierState(queues=((1, 2),)),),
        )
        assert expected_multitier_wait(snapshot, 2, 0) == 9

    def test_wrong_tier_is_rejected(self):
        with pytest.raises(NotResidentError) as error:
            expected_multitier_wait(two_tier_snapshot(), 2, 1)
        assert (error.value.job_id, error.value.tier) == (2, 1)

    def test_alternative_schedule_is_evaluated(self):
        snapshot = SystemSnapshot(
            now=0,
            jobs={1: job(1, (6,)), 2: job(2, (2,))},
            tiers=(TierState(queues=((1, 2),)),),
        )
        swapped = Schedule(per_tier=(((2, 1),),))
        assert expected_multitier_wait(snapshot, 1, 0, schedule=swapped) == 2


class TestSnapshotSchedules:
    """Schedules must reassign exactly the pending jobs."""

    def test_migration_is_accepted(self):
        snapshot = SystemSnapshot(
            jobs={1: job(1, (6,)), 2: job(2, (2,))},
            tiers=(TierState(queues=((1, 2), ())),),
        )
        moved = snapshot.with_schedule(Schedule(per_tier=(((2,), (1,)),)))
        assert moved.locate(1) == (0, 1, 0)

    def test_dropped_job_is_rejected(self):
        snapshot = SystemSnapshot(
            jobs={1: job(1, (6,)), 2: job(2, (2,))},
            tiers=(TierState(queues=((1, 2),)),),
        )
        with pytest.raises(ScheduleInvariantError):
            snapshot.validate_schedule(Schedule(per_tier=(((1,),),)))

    def test_cross_tier_move_is_rejected(self):
        snapshot = two_tier_snapshot()
        with pytest.raises(ScheduleInvariantError):
            snapshot.validate_schedule(Schedule(per_tier=(((),), ((1, 2),))))

    def test_unknown_queued_job(self):
        with pytest.raises(ValidationError):
            SystemSnapshot(jobs={}, tiers=(TierState(queues=((1,),)),))
