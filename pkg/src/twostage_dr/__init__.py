"""Two-stage demand-response market: day-ahead stochastic dispatch over
reported type distributions, real-time curtailment, VCG-style payments
with empirical-deviation penalties, and a posted-price benchmark."""

from .agents import Strategy, make_strategy
from .benchmark import analytic_rebate, best_response, default_grid, run_posted_day, sweep
from .dispatch import DayAheadSolver, expected_social_cost, solve_day_ahead, solve_real_time
from .engine import audit_compliance, run, summarize
from .mechanism import DeviationTracker, first_stage_payment, second_stage_settlement
from .model import (
    ConfigError,
    CostModel,
    ExperimentConfig,
    LoadType,
    PenaltySchedule,
    StrategySpec,
    TypeDistribution,
    TypeSpace,
    validate_config,
)
from .oracle import brute_force_real_time, enumerate_deviations, exact_expectation

__all__ = [
    "ConfigError", "CostModel", "DayAheadSolver", "DeviationTracker", "ExperimentConfig", "LoadType",
    "PenaltySchedule", "Strategy", "StrategySpec", "TypeDistribution", "TypeSpace", "analytic_rebate",
    "audit_compliance", "best_response", "brute_force_real_time", "default_grid", "enumerate_deviations",
    "exact_expectation", "expected_social_cost", "first_stage_payment", "make_strategy", "run",
    "run_posted_day", "second_stage_settlement", "solve_day_ahead", "solve_real_time", "summarize",
    "sweep", "validate_config",
]
__version__ = "0.1.0"
