import math

import numpy as np
import pytest
from pydantic import ValidationError

from vqsched.models import InService, Job, JobTiming, Schedule, SystemSnapshot, TierState, TimingTrace
from vqsched.penalty import (
    CostModel,
    PenaltyParams,
    objective_multitier_allowance,
    objective_tier_allowance,
    objective_waiting,
    realized_violation,
    realized_waiting,
    sla_penalty,
    violation_report,
    waiting_penalty,
)


def job(job_id, exec_times, deadline=None, arrival=0, psi=1000.0, zeta=1000.0):
    deadline = deadline if deadline is not None else 2 * sum(exec_times)
    return Job(
        id=job_id,
        arrival=arrival,
        exec_times=tuple(exec_times),
        target_completion=arrival + deadline,
        service_cost=psi,
        violation_cost=zeta,
    )


def single_queue(jobs, order, now=0):
    return SystemSnapshot(
        now=now,
        jobs={j.id: j for j in jobs},
        tiers=(TierState(queues=(tuple(order),)),),
    )


class TestPenaltyCurves:
    """Exponential per-job penalties."""

    def test_no_wait_costs_nothing(self):
        assert waiting_penalty(job(1, (5,)), 0, PenaltyParams()) == 0

    def test_waiting_closed_form(self):
        params = PenaltyParams(chi=1, nu=1e-5)
        assert waiting_penalty(job(1, (5,), psi=1000), 100, params) == pytest.approx(
            1 - math.exp(-1), abs=1e-12
        )

    def test_waiting_saturates_at_chi(self):
        params = PenaltyParams(chi=1, nu=1e-5)
        eta = waiting_penalty(job(1, (5,), psi=1000), 5_000_000, params)
        assert abs(eta - 1.0) < 1e-15

    def test_negative_wait_is_rejected(self):
        with pytest.raises(ValueError):
            waiting_penalty(job(1, (5,)), -1, PenaltyParams())

    @pytest.mark.parametrize("alpha", [-10, 0])
    def test_satisfied_sla_costs_nothing(self, alpha):
        assert sla_penalty(job(1, (5,)), alpha, PenaltyParams()) == 0

    def test_sla_closed_form(self):
        params = PenaltyParams(chi=1, nu=1e-5)
        assert sla_penalty(job(1, (5,), zeta=1000), 100, params) == pytest.approx(0.6321206, abs=1e-7)

    @pytest.mark.parametrize("seed", range(20))
    def test_penalty_bounds(self, seed):
        rng = np.random.default_rng(seed)
        params = PenaltyParams(chi=float(rng.uniform(0.1, 10)), nu=float(rng.uniform(1e-7, 1e-3)))
        for _ in range(50):
            j = job(1, (5,), psi=float(rng.uniform(1, 2000)), zeta=float(rng.uniform(1, 2000)))
            amount = float(rng.uniform(-500, 10_000))
            eta = sla_penalty(j, amount, params)
            assert 0 <= eta < params.chi or math.isclose(eta, params.chi)
            assert 0 <= waiting_penalty(j, abs(amount), params) <= params.chi

    def test_invalid_parameters(self):
        with pytest.raises(ValidationError):
            PenaltyParams(chi=0)
        with pytest.raises(ValidationError):
            PenaltyParams(nu=-1)
        with pytest.raises(ValidationError):
            PenaltyParams(gamma=1)


class TestObjectiveWaiting:
    """Differentiated waiting cost of a schedule."""

    def test_empty_system(self):
        snapshot = SystemSnapshot(jobs={}, tiers=(TierState(queues=((),)),))
        assert objective_waiting(None, snapshot, PenaltyParams()).cost == 0

    def test_order_dependence(self):
        jobs = [job(1, (5,), psi=1000), job(2, (3,), psi=2000)]
        snapshot = single_queue(jobs, (1, 2))
        params = PenaltyParams()
        assert objective_waiting(None, snapshot, params).cost == 10000
        swapped = Schedule(per_tier=(((2, 1),),))
        assert objective_waiting(swapped, snapshot, params).cost == 3000

    def test_single_job_alone(self):
        snapshot = single_queue([job(1, (5,), psi=1234)], (1,))
        assert objective_waiting(None, snapshot, PenaltyParams()).cost == 0

    def test_uniform_costs(self):
        jobs = [job(1, (5,), psi=1000), job(2, (3,), psi=2000)]
        value = objective_waiting(None, single_queue(jobs, (1, 2)), PenaltyParams(differentiated=False))
        assert value.cost == 5
        assert value.time == 5

    def test_elapsed_wait_counts(self):
        jobs = [job(1, (5,), psi=10), job(2, (3,), psi=20)]
        value = objective_waiting(None, single_queue(jobs, (1, 2), now=4), PenaltyParams())
        assert value.time == 4 + 9
        assert value.cost == 10 * 4 + 20 * 9

    def test_incomplete_schedule_is_rejected(self):
        jobs = [job(1, (5,)), job(2, (3,))]
        with pytest.raises(ValueError):
            objective_waiting(Schedule(per_tier=(((1,),),)), single_queue(jobs, (1, 2)), PenaltyParams())


class TestObjectiveAllowance:
    """SLA violation cost against the multi-tier and per-tier allowances."""

    def test_job_at_its_allowance_contributes_nothing(self):
        # job 2 waits exactly 5 = allowance 13 - 8
        jobs = [job(1, (5,)), job(2, (8,), deadline=13)]
        value = objective_multitier_allowance(None, single_queue(jobs, (1, 2)), PenaltyParams())
        assert value.cost == 0

    def test_violation_is_weighted(self):
        # wait 150 against an allowance of 100
        jobs = [job(1, (150,), deadline=300), job(2, (10,), deadline=110, zeta=1000)]
        value = objective_multitier_allowance(None, single_queue(jobs, (1, 2)), PenaltyParams())
        assert value.cost == 50000

    def test_signed_sum_without_clamping(self):
        # job 1 is 10 early, job 2 is 10 late
        jobs = [job(1, (20,), deadline=30, zeta=7), job(2, (5,), deadline=15, zeta=7)]
        snapshot = single_queue(jobs, (1, 2))
        assert objective_multitier_allowance(None, snapshot, PenaltyParams(clamp_early=False)).cost == 0
        assert objective_multitier_allowance(None, snapshot, PenaltyParams()).cost == 70

    def test_tier_allowance_at_share(self):
        # allowance 10 split 5/5; job 2 waits 5 in tier 0
        jobs = [job(1, (5, 1)), job(2, (5, 5), deadline=20)]
        snapshot = SystemSnapshot(
            jobs={j.id: j for j in jobs},
            tiers=(TierState(tier_index=0, queues=((1, 2),)), TierState(tier_index=1, queues=((),))),
        )
        assert objective_tier_allowance(None, snapshot, PenaltyParams()).cost == 0

    def test_tier_terms_accumulate(self):
        # tier shares 40/60; tier 0 waited 70 (+30), tier 1 expects 50 (-10)
        j = job(1, (20, 30), deadline=150, zeta=1000)
        blocker = job(2, (50, 50), deadline=1000)
        snapshot = SystemSnapshot(
            now=100,
            jobs={1: j, 2: blocker},
            tiers=(
                TierState(tier_index=0, queues=((),)),
                TierState(tier_index=1, queues=((1,),), executing=(InService(job_id=2, start=90),)),
            ),
            tier_arrivals={1: (0, 90), 2: (0, 90)},
            waited={1: (70,), 2: (40,)},
        )
        value = objective_tier_allowance(None, snapshot, PenaltyParams(clamp_early=False))
        assert value.cost == pytest.approx(20000)

    def test_violation_report(self):
        jobs = [job(1, (150,), deadline=300), job(2, (10,), deadline=110)]
        report = violation_report(single_queue(jobs, (1, 2)), None, PenaltyParams())
        by_id = {v.job_id: v for v in report.jobs}
        assert by_id[1].satisfied and by_id[1].eta == 0
        assert not by_id[2].satisfied
        assert by_id[2].alpha == 50
        assert report.total_penalty == pytest.approx(by_id[2].eta)


class TestCostModel:
    """Positional scoring shared by objectives and the search."""

    def test_cost_matches_exposures(self):
        rng = np.random.default_rng(3)
        jobs = [job(i, (int(rng.integers(1, 50)),), psi=float(rng.uniform(1, 100))) for i in range(1, 8)]
        snapshot = SystemSnapshot(
            now=0,
            jobs={j.id: j for j in jobs},
            tiers=(TierState(queues=((1, 2, 3), (4, 5, 6, 7))),),
        )
        model = CostModel(snapshot, "waiting", PenaltyParams())
        exposures = model.exposures(snapshot.schedule)
        assert model.cost(snapshot.schedule) == pytest.approx(sum(e.weight * e.value for e in exposures))

    def test_unknown_kind(self):
        snapshot = single_queue([job(1, (5,))], (1,))
        with pytest.raises(ValueError):
            CostModel(snapshot, "makespan", PenaltyParams())


class TestRealizedObjectives:
    """Scoring a finished run."""

    def trace(self):
        return TimingTrace(
            n_tiers=1,
            jobs={
                1: JobTiming(job_id=1, n_tiers=1, arrivals=[0], resources=[0], starts=[0], departures=[5]),
                2: JobTiming(job_id=2, n_tiers=1, arrivals=[0], resources=[0], starts=[5], departures=[8]),
            },
        )

    def test_realized_waiting(self):
        jobs = {1: job(1, (5,), psi=1000), 2: job(2, (3,), psi=2000)}
        value = realized_waiting(self.trace(), jobs, PenaltyParams())
        assert (value.count, value.time, value.cost) == (2, 5, 10000)

    def test_realized_violation_is_response_beyond_deadline(self):
        jobs = {1: job(1, (5,), deadline=10), 2: job(2, (3,), deadline=6, zeta=100)}
        value = realized_violation(self.trace(), jobs, PenaltyParams())
        assert value.time == 2
        assert value.cost == 200
