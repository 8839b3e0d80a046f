"""Exact batch slot assignment and its brute-force oracle."""

from .assign import (
    Assignment,
    AssignmentInstance,
    EvDemand,
    InfeasibleInstance,
    OracleTooLarge,
    brute_force_oracle,
    check_assignment,
    dumps_instance,
    loads_instance,
    refine_peak_valley,
    slot_capacities,
    solve_max_value,
)

__all__ = [
    "Assignment",
    "AssignmentInstance",
    "EvDemand",
    "InfeasibleInstance",
    "OracleTooLarge",
    "brute_force_oracle",
    "check_assignment",
    "dumps_instance",
    "loads_instance",
    "refine_peak_valley",
    "slot_capacities",
    "solve_max_value",
]
