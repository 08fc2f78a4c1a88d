"""Day-ahead electricity market clearing with vehicle-to-grid fleets.

Two settlement mechanisms over the same unit-commitment feasible set:
offer cost minimization (one mixed-integer program) and payment cost
minimization (a Benders-style price decomposition).  A slow exhaustive
oracle, an independent schedule verifier, and a reporting CLI round out
the package.
"""

from .lp_mip import (BaselineSolver, HighsSolver, LinearProgramBuilder,
                     Solution, SolveStatus, default_solver, make_solver)
from .ocm import (ClearingResult, IterationLimitReached, MarketInfeasible,
                  Schedule, build_ocm, clear_ocm, compute_payments,
                  settle_mcp, verify_schedule)
from .oracle import BudgetExceeded, OracleBudget, oracle_ocm, oracle_pcm
from .pcm_gbd import (FeasibilityCut, GbdOptions, GbdTrace, NoPriceExists,
                      OptimalityCut, run_pcm_gbd)
from .scenario import (CapacityError, GeneratorOffer, PevFleet, Scenario,
                       ScenarioError, load_scenario, parse_demand_csv,
                       serialize_scenario, strip_fleets, validate_scenario)
from .cli_report import ComparisonReport, cmd_clear, cmd_compare, cmd_validate, main

__version__ = "0.1.0"

__all__ = [
    "BaselineSolver", "BudgetExceeded", "CapacityError", "ClearingResult",
    "ComparisonReport", "FeasibilityCut", "GbdOptions", "GbdTrace",
    "GeneratorOffer", "HighsSolver", "IterationLimitReached",
    "LinearProgramBuilder", "MarketInfeasible", "NoPriceExists",
    "OptimalityCut", "OracleBudget", "PevFleet", "Scenario", "ScenarioError",
    "Schedule", "Solution", "SolveStatus", "build_ocm", "clear_ocm",
    "cmd_clear", "cmd_compare", "cmd_validate", "compute_payments",
    "default_solver", "load_scenario", "main", "make_solver", "oracle_ocm",
    "oracle_pcm", "parse_demand_csv", "run_pcm_gbd", "serialize_scenario",
    "settle_mcp", "strip_fleets", "validate_scenario", "verify_schedule",
]
