from .baselines import BaselineKind, FcfsDispatcher, WlcDispatcher, WrrDispatcher, assign
from .bench import Report, Scenario, compare_strategies, emit, load_scenario, parse_report, run_scenario
from .ga import (
    Chromosome,
    GAConfig,
    brute_force_best,
    crossover_single_point,
    decode,
    encode,
    evolve,
    fitness,
    mutate_insert,
    select,
)
from .models import Job, Schedule, SystemSnapshot, TierState, Topology
from .penalty import (
    CostModel,
    PenaltyParams,
    objective_multitier_allowance,
    objective_tier_allowance,
    objective_waiting,
    sla_penalty,
    waiting_penalty,
)
from .simulator import EpochPolicy, Simulator, oracle_recompute, verify_trace
from .strategies import make_scheduler, parse_strategy
from .workload import JobStream, WorkloadConfig, generate_stream, load_stream, save_stream

__all__ = [
    "BaselineKind",
    "FcfsDispatcher",
    "WlcDispatcher",
    "WrrDispatcher",
    "assign",
    "Report",
    "Scenario",
    "compare_strategies",
    "emit",
    "load_scenario",
    "parse_report",
    "run_scenario",
    "Chromosome",
    "GAConfig",
    "brute_force_best",
    "crossover_single_point",
    "decode",
    "encode",
    "evolve",
    "fitness",
    "mutate_insert",
    "select",
    "Job",
    "Schedule",
    "SystemSnapshot",
    "TierState",
    "Topology",
    "CostModel",
    "PenaltyParams",
    "objective_multitier_allowance",
    "objective_tier_allowance",
    "objective_waiting",
    "sla_penalty",
    "waiting_penalty",
    "EpochPolicy",
    "Simulator",
    "oracle_recompute",
    "verify_trace",
    "make_scheduler",
    "parse_strategy",
    "JobStream",
    "WorkloadConfig",
    "generate_stream",
    "load_stream",
    "save_stream",
]
