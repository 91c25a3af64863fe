"""Cooperative UAV-UGV routing with a mobile recharging ground vehicle."""

from .evrp import SearchConfig, build_instance, construct_initial, solve
from .pipeline import CooperativePlan, compare, plan, ugv_only_baseline
from .scenario import (
    ParseError,
    Scenario,
    ValidationError,
    compute_coverage,
    generate_random_scenario,
    load_scenario,
    shortest_path,
)
from .setcover import exact_cover_all_optimal, greedy_cover
from .simulator import simulate
from .task_alloc import allocate
from .ugv_router import route_ugv

__all__ = [
    "CooperativePlan",
    "ParseError",
    "Scenario",
    "SearchConfig",
    "ValidationError",
    "allocate",
    "build_instance",
    "compare",
    "compute_coverage",
    "construct_initial",
    "exact_cover_all_optimal",
    "generate_random_scenario",
    "greedy_cover",
    "load_scenario",
    "plan",
    "route_ugv",
    "shortest_path",
    "simulate",
    "solve",
    "ugv_only_baseline",
]
