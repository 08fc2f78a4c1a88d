"""Payment-cost-minimizing auction via generalized Benders decomposition.

The payment objective prices every dispatched megawatt at the period's
clearing price while the price itself must sit at or above every
committed offer, which makes the problem self-referring.  The price
series is treated as the complicating variable set: fixing it yields a
commitment subproblem (upper bounds and optimality cuts), an infeasible
fix yields a slack subproblem (feasibility cuts), and a small master LP
over the cut pool proposes the next price series (lower bounds).

Cut orientation note: the optimality-cut coefficient on MCP(t) is
sum_i(p_i(t) - lambda_i(t)), the derivative of the subproblem Lagrangian
with the price-cap rows written B_i*u_i - MCP(t) <= 0 and nonnegative
multipliers; the feasibility cut pushes MCP(t) upward by w_t/sum(lambda)
because raising the price is the only way to relieve those rows.  Both
orientations are enforced empirically by oracle-backed cut-soundness
tests.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from .lp_mip import (GE, LE, LinearProgram, LinearProgramBuilder, SolveStatus,
                     resolve_duals_with_fixed_integers, solve_lp, solve_mip)
from .ocm import (ClearingResult, IterationLimitReached, MarketInfeasible,
                  Schedule, _add_schedule_constraints, _declare_schedule_vars,
                  clear_ocm, compute_payments, extract_schedule, settle_mcp)
from .scenario import Scenario, effective_fleet_limits

_WTOL = 1e-9


class NoPriceExists(Exception):
    """Master became infeasible: feasibility cuts demand a price above
    the highest offer, so no admissible price series exists."""


@dataclass
class GbdOptions:
    epsilon: float = 1e-4          # absolute UBD-LBD convergence gap
    max_iterations: int = 50
    seed_from_ocm: bool = False    # start from the OCM settlement instead
    solver: object = None          # lp_mip solver adapter, default baseline


@dataclass(frozen=True)
class OptimalityCut:
    """eta >= base_ubd + sum_t grad(t) * (MCP(t) - mcp_ref(t))"""

    base_ubd: float
    mcp_ref: tuple
    grad: tuple


@dataclass(frozen=True)
class FeasibilityCut:
    """w_hat - lambda_sum * (MCP(period) - mcp_ref_t) <= 0, i.e. a lower
    bound MCP(period) >= mcp_ref_t + w_hat / lambda_sum."""

    period: int
    w_hat: float
    lambda_sum: float
    mcp_ref_t: float


@dataclass
class GbdState:
    mcp_hat: tuple
    cuts: list = field(default_factory=list)
    ubd: float = math.inf
    lbd: float = -math.inf
    incumbent: object = None       # (Schedule, mcp_hat at acceptance)
    iteration: int = 0


@dataclass(frozen=True)
class GbdTraceRow:
    iteration: int
    cut_type: str                  # "optimality" | "feasibility"
    ubd: float                     # best upper bound after this iteration
    lbd: float                     # best lower bound after this iteration
    wall_ms: float


@dataclass
class GbdTrace:
    rows: list = field(default_factory=list)
    cuts: list = field(default_factory=list)  # final cut pool, creation order


@dataclass(frozen=True)
class OptimalitySubResult:
    status: SolveStatus
    schedule: Schedule = None
    objective: float = None
    lambda_duals: dict = None      # (unit id, t) -> price-cap row dual
    duals: dict = None             # every row dual of the fixed re-solve


@dataclass(frozen=True)
class FeasibilitySubResult:
    status: SolveStatus
    w_total: float = None
    w_by_period: tuple = None      # per-period slack sums
    lambda_sum_by_period: tuple = None
    schedule: Schedule = None
    duals: dict = None


def _check_mcp_hat(s: Scenario, mcp_hat) -> tuple:
    mcp_hat = tuple(float(v) for v in mcp_hat)
    if len(mcp_hat) != s.periods:
        raise ValueError(f"price series has length {len(mcp_hat)}, expected {s.periods}")
    if not all(math.isfinite(v) for v in mcp_hat):
        raise ValueError("price series must be finite")
    return mcp_hat


def build_optimality_subproblem(s: Scenario, mcp_hat) -> LinearProgram:
    """Commitment problem at a fixed price series: energy is priced at
    mcp_hat instead of the offers, and every committed offer must sit at
    or below the period price (rows mcpcap[i,t])."""
    mcp_hat = _check_mcp_hat(s, mcp_hat)
    b = LinearProgramBuilder()
    _declare_schedule_vars(b, s)
    for u in s.units:
        for t in range(1, s.periods + 1):
            b.add_objective_term(f"p[{u.id},{t}]", mcp_hat[t - 1])
            b.add_objective_term(f"scu[{u.id},{t}]", 1.0)
            b.add_objective_term(f"scd[{u.id},{t}]", 1.0)
            b.add_objective_term(f"u[{u.id},{t}]", u.no_load_cost)
    _add_schedule_constraints(b, s)
    for u in s.units:
        for t in range(1, s.periods + 1):
            b.add_constr(f"mcpcap[{u.id},{t}]",
                         {f"u[{u.id},{t}]": u.bid[t - 1]}, LE, mcp_hat[t - 1])
    return b.build()


def solve_optimality_subproblem(s: Scenario, mcp_hat, solver=None) -> OptimalitySubResult:
    lp = build_optimality_subproblem(s, mcp_hat)
    sol = solve_mip(lp, solver=solver)
    if sol.status is SolveStatus.INFEASIBLE:
        return OptimalitySubResult(status=SolveStatus.INFEASIBLE)
    if sol.status is not SolveStatus.OPTIMAL:
        raise IterationLimitReached(f"optimality subproblem ended with {sol.status.value}")
    fixed = resolve_duals_with_fixed_integers(lp, sol, solver=solver)
    lam = {}
    for u in s.units:
        for t in range(1, s.periods + 1):
            lam[(u.id, t)] = fixed.duals[f"mcpcap[{u.id},{t}]"]
    return OptimalitySubResult(
        status=SolveStatus.OPTIMAL,
        schedule=extract_schedule(s, fixed.values),
        objective=fixed.objective_value,
        lambda_duals=lam,
        duals=dict(fixed.duals),
    )


def build_feasibility_subproblem(s: Scenario, mcp_hat) -> LinearProgram:
    """Minimum total slack needed to reconcile committed offers with the
    fixed price series (rows mcpslack[i,t]); schedule constraints are
    kept unchanged."""
    mcp_hat = _check_mcp_hat(s, mcp_hat)
    b = LinearProgramBuilder()
    _declare_schedule_vars(b, s)
    for u in s.units:
        for t in range(1, s.periods + 1):
            b.add_var(f"alpha[{u.id},{t}]", 0.0, math.inf)
            b.add_objective_term(f"alpha[{u.id},{t}]", 1.0)
    _add_schedule_constraints(b, s)
    for u in s.units:
        for t in range(1, s.periods + 1):
            b.add_constr(f"mcpslack[{u.id},{t}]",
                         {f"u[{u.id},{t}]": u.bid[t - 1], f"alpha[{u.id},{t}]": -1.0},
                         LE, mcp_hat[t - 1])
    return b.build()


def solve_feasibility_subproblem(s: Scenario, mcp_hat, solver=None) -> FeasibilitySubResult:
    lp = build_feasibility_subproblem(s, mcp_hat)
    sol = solve_mip(lp, solver=solver)
    if sol.status is SolveStatus.INFEASIBLE:
        return FeasibilitySubResult(status=SolveStatus.INFEASIBLE)
    if sol.status is not SolveStatus.OPTIMAL:
        raise IterationLimitReached(f"feasibility subproblem ended with {sol.status.value}")
    fixed = resolve_duals_with_fixed_integers(lp, sol, solver=solver)
    T = s.periods
    w_by_period = tuple(
        sum(fixed.values[f"alpha[{u.id},{t}]"] for u in s.units) for t in range(1, T + 1))
    lam_by_period = tuple(
        sum(fixed.duals[f"mcpslack[{u.id},{t}]"] for u in s.units) for t in range(1, T + 1))
    return FeasibilitySubResult(
        status=SolveStatus.OPTIMAL,
        w_total=fixed.objective_value,
        w_by_period=w_by_period,
        lambda_sum_by_period=lam_by_period,
        schedule=extract_schedule(s, fixed.values),
        duals=dict(fixed.duals),
    )


def make_optimality_cut(sub: OptimalitySubResult, mcp_hat) -> OptimalityCut:
    """eta >= Z_sub + sum_t (sum_i p_i(t) - sum_i lambda_i(t)) * (MCP(t) - mcp_hat(t))"""
    mcp_ref = tuple(float(v) for v in mcp_hat)
    T = len(mcp_ref)
    grad = []
    for t in range(1, T + 1):
        g = 0.0
        for uid, p_row in sub.schedule.p.items():
            g += p_row[t - 1] - sub.lambda_duals[(uid, t)]
        grad.append(g)
    return OptimalityCut(base_ubd=sub.objective, mcp_ref=mcp_ref, grad=tuple(grad))


def make_feasibility_cuts(sub: FeasibilitySubResult, mcp_hat) -> list[FeasibilityCut]:
    """One cut per period carrying positive slack; the cut floors that
    period's price at mcp_hat(t) + w_t / lambda_sum(t)."""
    cuts = []
    for t, (w_t, lam_t) in enumerate(zip(sub.w_by_period, sub.lambda_sum_by_period), start=1):
        if w_t <= _WTOL:
            continue
        if lam_t <= _WTOL:
            raise RuntimeError(
                f"degenerate feasibility cut in period {t}: slack {w_t} with zero dual mass")
        cuts.append(FeasibilityCut(period=t, w_hat=w_t, lambda_sum=lam_t,
                                   mcp_ref_t=float(mcp_hat[t - 1])))
    return cuts


def _max_bid_by_period(s: Scenario) -> tuple:
    return tuple(
        max((u.bid[t - 1] for u in s.units), default=0.0) for t in range(1, s.periods + 1))


def _payment_box_height(s: Scenario) -> float:
    """Provable payment upper bound: every megawatt of demand plus every
    megawatt of simultaneous fleet charging priced at the period's
    highest offer, plus all fixed charges."""
    maxbid = _max_bid_by_period(s)
    h = 0.0
    for t in range(1, s.periods + 1):
        ch_room = sum(effective_fleet_limits(f, t)[0] for f in s.fleets)
        h += maxbid[t - 1] * (s.demand[t - 1] + ch_room)
    for u in s.units:
        per_period = u.startup_stairs[-1][1] + u.shutdown_cost + u.no_load_cost
        h += s.periods * per_period
    return h


def solve_master(cuts, s: Scenario, solver=None) -> tuple[tuple, float]:
    """Relaxed price proposal: min eta over the cut pool with box bounds
    MCP(t) in [0, highest offer] and eta in [0, payment bound]."""
    T = s.periods
    maxbid = _max_bid_by_period(s)
    if not cuts:
        return tuple(0.0 for _ in range(T)), 0.0
    b = LinearProgramBuilder()
    b.add_var("eta", 0.0, _payment_box_height(s))
    for t in range(1, T + 1):
        b.add_var(f"mcp[{t}]", 0.0, maxbid[t - 1])
    b.add_objective_term("eta", 1.0)
    n_opt = n_feas = 0
    for cut in cuts:
        if isinstance(cut, OptimalityCut):
            n_opt += 1
            coeffs = {"eta": 1.0}
            rhs = cut.base_ubd
            for t in range(1, T + 1):
                g = cut.grad[t - 1]
                if g != 0.0:
                    coeffs[f"mcp[{t}]"] = -g
                rhs -= g * cut.mcp_ref[t - 1]
            b.add_constr(f"opt[{n_opt}]", coeffs, GE, rhs)
        else:
            n_feas += 1
            floor = cut.mcp_ref_t + cut.w_hat / cut.lambda_sum
            b.add_constr(f"feas[{n_feas}]", {f"mcp[{cut.period}]": 1.0}, GE, floor)
    sol = solve_lp(b.build(), solver=solver)
    if sol.status is SolveStatus.INFEASIBLE:
        raise NoPriceExists("feasibility cuts demand a price above the highest offer")
    if sol.status is not SolveStatus.OPTIMAL:
        raise IterationLimitReached(f"master ended with {sol.status.value}")
    mcp_next = tuple(sol.values[f"mcp[{t}]"] for t in range(1, T + 1))
    return mcp_next, sol.objective_value


def _tightened_payment(s: Scenario, sch: Schedule) -> tuple[float, tuple]:
    """Re-price a schedule at its own committed-offer envelope.

    The pair (schedule, envelope) always satisfies the price-support
    constraint, so every schedule the loop touches is a payment
    candidate once tightened.
    """
    mcp = settle_mcp(sch, s)
    payment, _, _ = compute_payments(sch, mcp, s)
    return payment, mcp


def _result_from_incumbent(s: Scenario, state: GbdState, status: str,
                           n_opt: int, n_feas: int) -> ClearingResult:
    sch, _ = state.incumbent
    mcp = settle_mcp(sch, s)  # tighten to the committed-offer envelope
    payment, unit_payments, offer = compute_payments(sch, mcp, s)
    stats = {
        "mechanism": "pcm",
        "status": status,
        "iterations": state.iteration,
        "ubd": state.ubd,
        "lbd": state.lbd,
        "gap": state.ubd - state.lbd,
        "optimality_cuts": n_opt,
        "feasibility_cuts": n_feas,
    }
    return ClearingResult(sch, mcp, offer, payment, unit_payments, stats)


def run_pcm_gbd(s: Scenario, opts: GbdOptions = None) -> tuple[ClearingResult, GbdTrace]:
    """Full decomposition loop: subproblem, cut, master, repeat until the
    bound gap closes or the iteration cap is reached."""
    opts = opts or GbdOptions()
    solver = opts.solver
    if opts.seed_from_ocm:
        mcp_hat = clear_ocm(s, solver=solver).mcp
    else:
        mcp_hat = _max_bid_by_period(s)
    state = GbdState(mcp_hat=tuple(mcp_hat))
    trace = GbdTrace(cuts=state.cuts)
    n_opt = n_feas = 0
    converged = False
    best_payment = math.inf  # tightened payments rank the incumbent

    for it in range(1, opts.max_iterations + 1):
        t0 = time.perf_counter()
        state.iteration = it
        sub = solve_optimality_subproblem(s, state.mcp_hat, solver=solver)
        if sub.status is SolveStatus.OPTIMAL:
            state.ubd = min(state.ubd, sub.objective)
            tight, _ = _tightened_payment(s, sub.schedule)
            if tight < best_payment:
                best_payment = tight
                state.incumbent = (sub.schedule, state.mcp_hat)
            new_cuts = [make_optimality_cut(sub, state.mcp_hat)]
            cut_type = "optimality"
            n_opt += 1
        else:
            feas = solve_feasibility_subproblem(s, state.mcp_hat, solver=solver)
            if feas.status is SolveStatus.INFEASIBLE:
                raise MarketInfeasible("no feasible commitment meets demand")
            tight, _ = _tightened_payment(s, feas.schedule)
            if tight < best_payment:
                best_payment = tight
                state.incumbent = (feas.schedule, state.mcp_hat)
            new_cuts = make_feasibility_cuts(feas, state.mcp_hat)
            if not new_cuts:
                raise RuntimeError(
                    "optimality subproblem infeasible but slack subproblem found no "
                    "violated period")
            cut_type = "feasibility"
            n_feas += len(new_cuts)
        state.cuts.extend(new_cuts)
        mcp_next, eta = solve_master(state.cuts, s, solver=solver)
        state.lbd = max(state.lbd, eta)
        trace.rows.append(GbdTraceRow(
            iteration=it, cut_type=cut_type, ubd=state.ubd, lbd=state.lbd,
            wall_ms=(time.perf_counter() - t0) * 1000.0))
        if state.ubd - state.lbd <= opts.epsilon:
            converged = True
            break
        state.mcp_hat = mcp_next

    if not converged:
        result = None
        if state.incumbent is not None:
            result = _result_from_incumbent(s, state, "IterationLimit", n_opt, n_feas)
        raise IterationLimitReached(
            f"no convergence within {opts.max_iterations} iterations "
            f"(gap {state.ubd - state.lbd})", result=result, trace=trace)
    result = _result_from_incumbent(s, state, "Optimal", n_opt, n_feas)
    return result, trace
