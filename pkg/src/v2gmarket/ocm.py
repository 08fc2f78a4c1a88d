"""Offer-cost-minimizing auction: model build, clearing, settlement.

The commitment problem minimizes total as-bid cost (energy at offer
prices plus startup, shutdown, and no-load charges) subject to balance,
output limits, ramping, stair-wise startup pricing, and the fleet
charge/discharge/energy dynamics.  Settlement prices each period at the
highest accepted offer.

A deliberate modeling note on fleet energy: the energy account applies
the cycle efficiency symmetrically to the net power in both directions,
E(t) = E(t-1) - eta * p(t).  Discharging therefore drains the battery by
eta*p rather than p/eta while the grid receives the full p.  Users who
need asymmetric charge/discharge efficiencies must approximate them
through eta and the power limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .lp_mip import (EQ, GE, LE, LinearProgram, LinearProgramBuilder, Solution,
                     SolveStatus, resolve_duals_with_fixed_integers, solve_mip)
from .scenario import GeneratorOffer, Scenario, effective_fleet_limits


class MarketInfeasible(Exception):
    """No commitment and dispatch can satisfy the scenario's constraints."""


class IterationLimitReached(Exception):
    """Solver budget ran out before proving an optimum."""

    def __init__(self, message: str, result=None, trace=None):
        super().__init__(message)
        self.result = result
        self.trace = trace


@dataclass(frozen=True)
class Schedule:
    """Commitment and dispatch of every unit and fleet over the horizon."""

    u: dict        # unit id -> tuple of 0/1 per period
    p: dict        # unit id -> MW per period
    sc_u: dict     # unit id -> startup cost incurred per period
    sc_d: dict     # unit id -> shutdown cost incurred per period
    p_fleet: dict  # fleet id -> net MW per period, positive when discharging
    u_ch: dict     # fleet id -> 0/1 charging status
    u_dsch: dict   # fleet id -> 0/1 discharging status
    e_fleet: dict  # fleet id -> MWh at end of each period


@dataclass(frozen=True)
class ClearingResult:
    schedule: Schedule
    mcp: tuple
    offer_cost: float
    payment_cost: float
    unit_payments: dict
    stats: dict

    def to_dict(self) -> dict:
        return {
            "mcp": list(self.mcp),
            "offer_cost": self.offer_cost,
            "payment_cost": self.payment_cost,
            "unit_payments": dict(self.unit_payments),
            "schedule": {
                "u": {k: list(v) for k, v in self.schedule.u.items()},
                "p": {k: list(v) for k, v in self.schedule.p.items()},
                "sc_u": {k: list(v) for k, v in self.schedule.sc_u.items()},
                "sc_d": {k: list(v) for k, v in self.schedule.sc_d.items()},
                "p_fleet": {k: list(v) for k, v in self.schedule.p_fleet.items()},
                "u_ch": {k: list(v) for k, v in self.schedule.u_ch.items()},
                "u_dsch": {k: list(v) for k, v in self.schedule.u_dsch.items()},
                "e_fleet": {k: list(v) for k, v in self.schedule.e_fleet.items()},
            },
            "stats": dict(self.stats),
        }


def _unit_history_u(unit: GeneratorOffer, idx: int) -> int:
    # idx <= 0; idx == 0 is the pre-horizon period
    if unit.initial_committed:
        return 1
    return 1 if -idx == unit.initial_offline_periods else 0


def build_ocm(s: Scenario) -> LinearProgram:
    """Commitment MILP over the whole horizon.

    Variable families: p/u/scu/scd per unit-period, pv/uch/udsch/e per
    fleet-period.  Startup rows are instantiated once per stair duration
    with pre-horizon commitments folded into the right-hand side.
    """
    b = LinearProgramBuilder()
    T = s.periods
    _declare_schedule_vars(b, s)
    for i, u in enumerate(s.units):
        for t in range(1, T + 1):
            b.add_objective_term(f"p[{u.id},{t}]", u.bid[t - 1])
            b.add_objective_term(f"scu[{u.id},{t}]", 1.0)
            b.add_objective_term(f"scd[{u.id},{t}]", 1.0)
            b.add_objective_term(f"u[{u.id},{t}]", u.no_load_cost)
    _add_schedule_constraints(b, s)
    return b.build()


def _declare_schedule_vars(b: LinearProgramBuilder, s: Scenario) -> None:
    T = s.periods
    for u in s.units:
        for t in range(1, T + 1):
            b.add_var(f"p[{u.id},{t}]", 0.0, u.p_max[t - 1])
            b.add_var(f"u[{u.id},{t}]", 0.0, 1.0, integer=True)
            b.add_var(f"scu[{u.id},{t}]", 0.0, math.inf)
            b.add_var(f"scd[{u.id},{t}]", 0.0, math.inf)
    for f in s.fleets:
        for t in range(1, T + 1):
            ch_max_t, _, dsch_max_t, _ = effective_fleet_limits(f, t)
            b.add_var(f"pv[{f.id},{t}]", -ch_max_t, dsch_max_t)
            b.add_var(f"uch[{f.id},{t}]", 0.0, 1.0, integer=True)
            b.add_var(f"udsch[{f.id},{t}]", 0.0, 1.0, integer=True)
            b.add_var(f"e[{f.id},{t}]", f.e_min, f.e_max)


def _add_schedule_constraints(b: LinearProgramBuilder, s: Scenario) -> None:
    """Every physical constraint of the commitment problem; shared by the
    offer-cost build and both payment-cost subproblem builds."""
    T = s.periods
    for t in range(1, T + 1):
        coeffs = {f"p[{u.id},{t}]": 1.0 for u in s.units}
        for f in s.fleets:
            coeffs[f"pv[{f.id},{t}]"] = 1.0
        b.add_constr(f"bal[{t}]", coeffs, EQ, s.demand[t - 1])

    for u in s.units:
        uid = u.id
        stairs = u.stair_durations()
        for t in range(1, T + 1):
            b.add_constr(f"pmax[{uid},{t}]",
                         {f"p[{uid},{t}]": 1.0, f"u[{uid},{t}]": -u.p_max[t - 1]}, LE, 0.0)
            b.add_constr(f"pmin[{uid},{t}]",
                         {f"p[{uid},{t}]": 1.0, f"u[{uid},{t}]": -u.p_min[t - 1]}, GE, 0.0)

            # startup pricing: one row per stair duration, history folded
            # into the right-hand side
            for d, cost in stairs:
                coeffs = {f"scu[{uid},{t}]": -1.0, f"u[{uid},{t}]": cost}
                rhs = 0.0
                for n in range(1, d + 1):
                    back = t - n
                    if back >= 1:
                        key = f"u[{uid},{back}]"
                        coeffs[key] = coeffs.get(key, 0.0) - cost
                    else:
                        rhs += cost * _unit_history_u(u, back)
                b.add_constr(f"su[{uid},{t},{d}]", coeffs, LE, rhs)

            if t >= 2:
                b.add_constr(f"sd[{uid},{t}]",
                             {f"scd[{uid},{t}]": -1.0, f"u[{uid},{t - 1}]": u.shutdown_cost,
                              f"u[{uid},{t}]": -u.shutdown_cost}, LE, 0.0)
            else:
                b.add_constr(f"sd[{uid},{t}]",
                             {f"scd[{uid},{t}]": -1.0, f"u[{uid},{t}]": -u.shutdown_cost},
                             LE, -u.shutdown_cost * (1 if u.initial_committed else 0))

            # ramping, with the prior period's cap as the relaxation term
            # when the unit was or will be offline
            pmax_t = u.p_max[t - 1]
            if t >= 2:
                b.add_constr(f"rampup[{uid},{t}]",
                             {f"p[{uid},{t}]": 1.0, f"p[{uid},{t - 1}]": -1.0,
                              f"u[{uid},{t - 1}]": pmax_t - u.ramp_up}, LE, pmax_t)
                m_down = u.p_max[t - 2]
                b.add_constr(f"rampdown[{uid},{t}]",
                             {f"p[{uid},{t - 1}]": 1.0, f"p[{uid},{t}]": -1.0,
                              f"u[{uid},{t}]": m_down - u.ramp_down}, LE, m_down)
            else:
                u0 = 1 if u.initial_committed else 0
                p0 = u.initial_output
                rhs = p0 + (u.ramp_up if u0 else pmax_t - p0)
                b.add_constr(f"rampup[{uid},{t}]", {f"p[{uid},{t}]": 1.0}, LE, rhs)
                m_down = max(pmax_t, p0)
                b.add_constr(f"rampdown[{uid},{t}]",
                             {f"p[{uid},{t}]": -1.0, f"u[{uid},{t}]": m_down - u.ramp_down},
                             LE, m_down - p0)

    for f in s.fleets:
        fid = f.id
        for t in range(1, T + 1):
            ch_max_t, ch_min_t, dsch_max_t, dsch_min_t = effective_fleet_limits(f, t)
            b.add_constr(f"fpub[{fid},{t}]",
                         {f"pv[{fid},{t}]": 1.0, f"udsch[{fid},{t}]": -dsch_max_t,
                          f"uch[{fid},{t}]": ch_min_t}, LE, 0.0)
            b.add_constr(f"fplb[{fid},{t}]",
                         {f"pv[{fid},{t}]": 1.0, f"udsch[{fid},{t}]": -dsch_min_t,
                          f"uch[{fid},{t}]": ch_max_t}, GE, 0.0)
            b.add_constr(f"fmux[{fid},{t}]",
                         {f"uch[{fid},{t}]": 1.0, f"udsch[{fid},{t}]": 1.0}, LE, 1.0)
            if t >= 2:
                b.add_constr(f"energy[{fid},{t}]",
                             {f"e[{fid},{t}]": 1.0, f"e[{fid},{t - 1}]": -1.0,
                              f"pv[{fid},{t}]": f.efficiency}, EQ, 0.0)
            else:
                b.add_constr(f"energy[{fid},{t}]",
                             {f"e[{fid},{t}]": 1.0, f"pv[{fid},{t}]": f.efficiency},
                             EQ, f.e_initial)
        b.add_constr(f"eterm[{fid}]", {f"e[{fid},{T}]": 1.0}, EQ, f.e_target)


def extract_schedule(s: Scenario, values: dict) -> Schedule:
    """Read a Schedule out of solver variable values."""
    T = s.periods

    def series(fmt: str, ident: str, cast=float):
        return tuple(cast(values[fmt.format(ident, t)]) for t in range(1, T + 1))

    def binary(fmt: str, ident: str):
        return tuple(int(round(values[fmt.format(ident, t)])) for t in range(1, T + 1))

    return Schedule(
        u={u.id: binary("u[{},{}]", u.id) for u in s.units},
        p={u.id: series("p[{},{}]", u.id) for u in s.units},
        sc_u={u.id: series("scu[{},{}]", u.id) for u in s.units},
        sc_d={u.id: series("scd[{},{}]", u.id) for u in s.units},
        p_fleet={f.id: series("pv[{},{}]", f.id) for f in s.fleets},
        u_ch={f.id: binary("uch[{},{}]", f.id) for f in s.fleets},
        u_dsch={f.id: binary("udsch[{},{}]", f.id) for f in s.fleets},
        e_fleet={f.id: series("e[{},{}]", f.id) for f in s.fleets},
    )


def settle_mcp(sch: Schedule, s: Scenario) -> tuple:
    """Uniform price per period: the highest committed offer, zero when
    nothing is committed."""
    out = []
    for t in range(1, s.periods + 1):
        committed = [u.bid[t - 1] for u in s.units if sch.u[u.id][t - 1] >= 1]
        out.append(max(committed) if committed else 0.0)
    return tuple(out)


def compute_payments(sch: Schedule, mcp, s: Scenario) -> tuple[float, dict, float]:
    """Total consumer payment, per-unit payments, and as-bid offer cost
    for a given schedule and price series."""
    unit_payments = {}
    offer_cost = 0.0
    for u in s.units:
        pay = 0.0
        for t in range(1, s.periods + 1):
            fixed = sch.sc_u[u.id][t - 1] + sch.sc_d[u.id][t - 1] \
                + u.no_load_cost * sch.u[u.id][t - 1]
            pay += mcp[t - 1] * sch.p[u.id][t - 1] + fixed
            offer_cost += u.bid[t - 1] * sch.p[u.id][t - 1] + fixed
        unit_payments[u.id] = pay
    return sum(unit_payments.values()), unit_payments, offer_cost


def clear_ocm(s: Scenario, solver=None) -> ClearingResult:
    """Solve the offer-cost auction and settle it at the uniform price."""
    lp = build_ocm(s)
    sol = solve_mip(lp, solver=solver)
    if sol.status is SolveStatus.INFEASIBLE:
        raise MarketInfeasible("no feasible commitment meets demand")
    if sol.status is not SolveStatus.OPTIMAL:
        raise IterationLimitReached(f"commitment solve ended with {sol.status.value}")
    # re-solve the dispatch with commitments pinned so continuous values
    # are exact for the integral schedule
    fixed = resolve_duals_with_fixed_integers(lp, sol, solver=solver)
    sch = extract_schedule(s, fixed.values)
    mcp = settle_mcp(sch, s)
    payment, unit_payments, offer = compute_payments(sch, mcp, s)
    stats = {
        "mechanism": "ocm",
        "status": sol.status.value,
        "nodes": sol.nodes,
        "lp_iterations": sol.iterations,
    }
    return ClearingResult(sch, mcp, offer, payment, unit_payments, stats)


def verify_schedule(sch: Schedule, s: Scenario, mcp=None, tol: float = 1e-6) -> list[str]:
    """Independent constraint check of a schedule, written directly
    against the constraint definitions rather than the model builder.

    Returns the list of violated constraint labels; empty means feasible.
    When an mcp series is given, the price-floor coupling (every
    committed offer at or below the period price) is checked as well.
    """
    bad: list[str] = []
    T = s.periods

    def u_at(unit: GeneratorOffer, t: int) -> int:
        if t >= 1:
            return sch.u[unit.id][t - 1]
        return _unit_history_u(unit, t)

    for unit in s.units:
        uid = unit.id
        for t in range(1, T + 1):
            uv = sch.u[uid][t - 1]
            pv = sch.p[uid][t - 1]
            scu = sch.sc_u[uid][t - 1]
            scd = sch.sc_d[uid][t - 1]
            if uv not in (0, 1):
                bad.append(f"binary[{uid},{t}]")
            if scu < -tol:
                bad.append(f"startup_nonneg[{uid},{t}]")
            if scd < -tol:
                bad.append(f"shutdown_nonneg[{uid},{t}]")
            for d, cost in unit.stair_durations():
                lhs = uv - sum(u_at(unit, t - n) for n in range(1, d + 1))
                if scu < cost * lhs - tol:
                    bad.append(f"startup[{uid},{t},{d}]")
            if scd < unit.shutdown_cost * (u_at(unit, t - 1) - uv) - tol:
                bad.append(f"shutdown[{uid},{t}]")
            if pv < unit.p_min[t - 1] * uv - tol or pv > unit.p_max[t - 1] * uv + tol:
                bad.append(f"output[{uid},{t}]")
            prev_p = sch.p[uid][t - 2] if t >= 2 else unit.initial_output
            prev_u = u_at(unit, t - 1)
            pmax_t = unit.p_max[t - 1]
            m_down = unit.p_max[t - 2] if t >= 2 else max(pmax_t, unit.initial_output)
            if pv - prev_p > prev_u * unit.ramp_up + (1 - prev_u) * pmax_t + tol:
                bad.append(f"rampup[{uid},{t}]")
            if prev_p - pv > uv * unit.ramp_down + (1 - uv) * m_down + tol:
                bad.append(f"rampdown[{uid},{t}]")

    for t in range(1, T + 1):
        total = sum(sch.p[u.id][t - 1] for u in s.units)
        total += sum(sch.p_fleet[f.id][t - 1] for f in s.fleets)
        if abs(total - s.demand[t - 1]) > tol:
            bad.append(f"balance[{t}]")

    for f in s.fleets:
        fid = f.id
        prev_e = f.e_initial
        for t in range(1, T + 1):
            ch = sch.u_ch[fid][t - 1]
            ds = sch.u_dsch[fid][t - 1]
            pv = sch.p_fleet[fid][t - 1]
            ev = sch.e_fleet[fid][t - 1]
            ch_max_t, ch_min_t, dsch_max_t, dsch_min_t = effective_fleet_limits(f, t)
            if ch not in (0, 1) or ds not in (0, 1):
                bad.append(f"fleet_binary[{fid},{t}]")
            if ch + ds > 1:
                bad.append(f"fleet_mutex[{fid},{t}]")
            if pv > ds * dsch_max_t - ch * ch_min_t + tol:
                bad.append(f"fleet_power_ub[{fid},{t}]")
            if pv < ds * dsch_min_t - ch * ch_max_t - tol:
                bad.append(f"fleet_power_lb[{fid},{t}]")
            if abs(ev - (prev_e - f.efficiency * pv)) > tol:
                bad.append(f"fleet_energy[{fid},{t}]")
            if ev < f.e_min - tol or ev > f.e_max + tol:
                bad.append(f"fleet_energy_bounds[{fid},{t}]")
            prev_e = ev
        if abs(sch.e_fleet[fid][T - 1] - f.e_target) > tol:
            bad.append(f"fleet_target[{fid}]")

    if mcp is not None:
        for unit in s.units:
            for t in range(1, T + 1):
                if unit.bid[t - 1] * sch.u[unit.id][t - 1] > mcp[t - 1] + tol:
                    bad.append(f"price_floor[{unit.id},{t}]")
    return bad
