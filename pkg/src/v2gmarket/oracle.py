"""Exhaustive ground-truth solver for tiny auction instances.

Enumerates every binary assignment (unit commitments plus fleet
charge/discharge statuses) in lexicographic order, discards assignments
that violate the charge/discharge exclusivity or the per-period supply
envelope, and solves the remaining continuous dispatch LP for each
survivor with scipy.  Startup and shutdown charges are evaluated
combinatorially from the commitment sequence, so the fixed-cost part of
each candidate objective is exact rather than a lower bound.

This path shares no model-building code with the main clearing engine;
agreement between the two is what the equivalence tests certify.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .ocm import ClearingResult, MarketInfeasible, Schedule, compute_payments
from .scenario import GeneratorOffer, Scenario, effective_fleet_limits

_EPS = 1e-9


@dataclass(frozen=True)
class OracleBudget:
    max_binary_count: int = 18
    max_enumerations: int = 2 ** 18


class BudgetExceeded(Exception):
    """Instance is too large for exhaustive enumeration."""


def _startup_shutdown_costs(unit: GeneratorOffer, u_row) -> tuple[tuple, tuple, float]:
    """Exact per-period startup and shutdown charges for a commitment
    sequence, from offline run lengths."""
    sc_u, sc_d = [], []
    offline = 0 if unit.initial_committed else unit.initial_offline_periods
    prev = 1 if unit.initial_committed else 0
    for uv in u_row:
        if uv:
            sc_u.append(unit.startup_cost_for(offline) if offline > 0 else 0.0)
            offline = 0
        else:
            sc_u.append(0.0)
            offline += 1
        sc_d.append(unit.shutdown_cost if prev == 1 and uv == 0 else 0.0)
        prev = uv
    return tuple(sc_u), tuple(sc_d), sum(sc_u) + sum(sc_d)


def _fleet_power_bounds(s: Scenario, states) -> tuple[np.ndarray, np.ndarray]:
    """Per fleet-period net power bounds implied by the charge/discharge
    statuses; states is a flat tuple of (ch, dsch) pairs, fleet-major."""
    F, T = len(s.fleets), s.periods
    lb = np.zeros((F, T))
    ub = np.zeros((F, T))
    for v, f in enumerate(s.fleets):
        for t in range(1, T + 1):
            ch, ds = states[v * T + (t - 1)]
            ch_max_t, ch_min_t, dsch_max_t, dsch_min_t = effective_fleet_limits(f, t)
            lb[v, t - 1] = ds * dsch_min_t - ch * ch_max_t
            ub[v, t - 1] = ds * dsch_max_t - ch * ch_min_t
    return lb, ub


def _greedy_dispatch_bound(bids_t, pmin_t, pmax_t, committed, fleet_room, need):
    """Exact optimum of the single-period dispatch relaxation: meet
    `need` MW above the mandatory minima using free fleet room first,
    then committed unit headroom in bid order."""
    cost = float(np.dot(bids_t * committed, pmin_t))
    need -= min(need, fleet_room)
    if need <= _EPS:
        return cost
    order = np.argsort(bids_t, kind="stable")
    for i in order:
        if not committed[i] or need <= _EPS:
            continue
        take = min(need, pmax_t[i] - pmin_t[i])
        cost += take * bids_t[i]
        need -= take
    return cost


class _Enumerator:
    """Shared machinery for both oracle objectives."""

    def __init__(self, s: Scenario, budget: OracleBudget):
        self.s = s
        U, F, T = len(s.units), len(s.fleets), s.periods
        bits = T * (U + 2 * F)
        planned = (2 ** (U * T)) * (3 ** (F * T))
        if bits > budget.max_binary_count:
            raise BudgetExceeded(
                f"{bits} binaries exceed the budget of {budget.max_binary_count}")
        if planned > budget.max_enumerations:
            raise BudgetExceeded(
                f"{planned} assignments exceed the budget of {budget.max_enumerations}")
        self.U, self.F, self.T = U, F, T
        self.demand = np.asarray(s.demand)
        self.bids = np.array([u.bid for u in s.units]) if U else np.zeros((0, T))
        self.pmin = np.array([u.p_min for u in s.units]) if U else np.zeros((0, T))
        self.pmax = np.array([u.p_max for u in s.units]) if U else np.zeros((0, T))
        self.assignments = 0
        self.lps = 0

    def fixed_cost(self, u_mat) -> tuple[list, list, float]:
        sc_u_rows, sc_d_rows, fixed = [], [], 0.0
        for i, unit in enumerate(self.s.units):
            su, sd, tot = _startup_shutdown_costs(unit, u_mat[i])
            sc_u_rows.append(su)
            sc_d_rows.append(sd)
            fixed += tot + unit.no_load_cost * sum(u_mat[i])
        return sc_u_rows, sc_d_rows, fixed

    def dispatch_lp(self, u_mat, fl_lb, fl_ub, c_unit_coeff):
        """Continuous dispatch LP for one assignment.

        c_unit_coeff[i, t] prices unit output; fleet power and energy
        carry zero cost.  Returns (objective, p, pv, e) or None when
        infeasible.
        """
        s, U, F, T = self.s, self.U, self.F, self.T
        n = U * T + 2 * F * T

        def ip(i, t):
            return i * T + (t - 1)

        def ipv(v, t):
            return U * T + v * T + (t - 1)

        def ie(v, t):
            return U * T + F * T + v * T + (t - 1)

        c = np.zeros(n)
        lo = np.zeros(n)
        hi = np.zeros(n)
        for i, unit in enumerate(s.units):
            for t in range(1, T + 1):
                j = ip(i, t)
                c[j] = c_unit_coeff[i, t - 1]
                uv = u_mat[i][t - 1]
                lo[j] = unit.p_min[t - 1] * uv
                hi[j] = unit.p_max[t - 1] * uv
        for v, f in enumerate(s.fleets):
            for t in range(1, T + 1):
                lo[ipv(v, t)] = fl_lb[v, t - 1]
                hi[ipv(v, t)] = fl_ub[v, t - 1]
                j = ie(v, t)
                lo[j], hi[j] = f.e_min, f.e_max
            lo[ie(v, T)] = hi[ie(v, T)] = f.e_target

        a_eq, b_eq = [], []
        for t in range(1, T + 1):
            row = np.zeros(n)
            for i in range(U):
                row[ip(i, t)] = 1.0
            for v in range(F):
                row[ipv(v, t)] = 1.0
            a_eq.append(row)
            b_eq.append(s.demand[t - 1])
        for v, f in enumerate(s.fleets):
            for t in range(1, T + 1):
                row = np.zeros(n)
                row[ie(v, t)] = 1.0
                row[ipv(v, t)] = f.efficiency
                if t >= 2:
                    row[ie(v, t - 1)] = -1.0
                    b_eq.append(0.0)
                else:
                    b_eq.append(f.e_initial)
                a_eq.append(row)

        a_ub, b_ub = [], []
        for i, unit in enumerate(s.units):
            u0 = 1 if unit.initial_committed else 0
            p0 = unit.initial_output
            for t in range(1, T + 1):
                prev_u = u_mat[i][t - 2] if t >= 2 else u0
                row = np.zeros(n)
                row[ip(i, t)] = 1.0
                rhs = unit.ramp_up if prev_u else unit.p_max[t - 1]
                if t >= 2:
                    row[ip(i, t - 1)] = -1.0
                else:
                    rhs += p0
                a_ub.append(row)
                b_ub.append(rhs)

                row = np.zeros(n)
                row[ip(i, t)] = -1.0
                m_down = unit.p_max[t - 2] if t >= 2 else max(unit.p_max[0], p0)
                rhs = unit.ramp_down if u_mat[i][t - 1] else m_down
                if t >= 2:
                    row[ip(i, t - 1)] = 1.0
                else:
                    rhs -= p0
                a_ub.append(row)
                b_ub.append(rhs)

        self.lps += 1
        res = linprog(c, A_ub=np.array(a_ub) if a_ub else None,
                      b_ub=np.array(b_ub) if b_ub else None,
                      A_eq=np.array(a_eq), b_eq=np.array(b_eq),
                      bounds=list(zip(lo, hi)), method="highs")
        if not res.success:
            return None
        p = [[res.x[ip(i, t)] for t in range(1, T + 1)] for i in range(U)]
        pv = [[res.x[ipv(v, t)] for t in range(1, T + 1)] for v in range(F)]
        e = [[res.x[ie(v, t)] for t in range(1, T + 1)] for v in range(F)]
        return res.fun, p, pv, e

    def iter_assignments(self):
        """Yield (u_mat, fleet_states, fl_lb, fl_ub) in lexicographic
        order of the flattened binary vector, exclusivity respected."""
        U, F, T = self.U, self.F, self.T
        fleet_state_space = [( (0, 0), (0, 1), (1, 0) )] * (F * T)
        for unit_bits in itertools.product((0, 1), repeat=U * T):
            u_mat = tuple(unit_bits[i * T:(i + 1) * T] for i in range(U))
            for states in itertools.product(*fleet_state_space):
                self.assignments += 1
                fl_lb, fl_ub = _fleet_power_bounds(self.s, states)
                yield u_mat, states, fl_lb, fl_ub

    def supply_envelope_ok(self, u_mat, fl_lb, fl_ub) -> bool:
        u_arr = np.array(u_mat, dtype=float) if self.U else np.zeros((0, self.T))
        max_supply = (self.pmax * u_arr).sum(axis=0) + fl_ub.sum(axis=0)
        min_supply = (self.pmin * u_arr).sum(axis=0) + fl_lb.sum(axis=0)
        return bool(np.all(max_supply >= self.demand - _EPS)
                    and np.all(min_supply <= self.demand + _EPS))


def _result_from(s: Scenario, u_mat, states, p, pv, e, sc_rows, objective,
                 mcp, mechanism, enum: _Enumerator) -> ClearingResult:
    T = s.periods
    sc_u_rows, sc_d_rows = sc_rows
    sch = Schedule(
        u={u.id: tuple(u_mat[i]) for i, u in enumerate(s.units)},
        p={u.id: tuple(p[i]) for i, u in enumerate(s.units)},
        sc_u={u.id: sc_u_rows[i] for i, u in enumerate(s.units)},
        sc_d={u.id: sc_d_rows[i] for i, u in enumerate(s.units)},
        p_fleet={f.id: tuple(pv[v]) for v, f in enumerate(s.fleets)},
        u_ch={f.id: tuple(states[v * T + k][0] for k in range(T))
              for v, f in enumerate(s.fleets)},
        u_dsch={f.id: tuple(states[v * T + k][1] for k in range(T))
                for v, f in enumerate(s.fleets)},
        e_fleet={f.id: tuple(e[v]) for v, f in enumerate(s.fleets)},
    )
    payment, unit_payments, offer = compute_payments(sch, mcp, s)
    stats = {
        "mechanism": mechanism,
        "status": "Optimal",
        "assignments": enum.assignments,
        "lps_solved": enum.lps,
    }
    if mechanism == "oracle_ocm":
        offer = objective
    else:
        payment = objective
    return ClearingResult(sch, tuple(mcp), offer, payment, unit_payments, stats)


def oracle_ocm(s: Scenario, b: OracleBudget = OracleBudget()) -> ClearingResult:
    """Global minimum of the as-bid cost by exhaustive enumeration."""
    enum = _Enumerator(s, b)
    best = None
    best_obj = math.inf
    for u_mat, states, fl_lb, fl_ub in enum.iter_assignments():
        if not enum.supply_envelope_ok(u_mat, fl_lb, fl_ub):
            continue
        sc_u_rows, sc_d_rows, fixed = enum.fixed_cost(u_mat)
        u_arr = np.array(u_mat, dtype=float) if enum.U else np.zeros((0, enum.T))
        bound = fixed
        for t in range(1, enum.T + 1):
            k = t - 1
            committed = u_arr[:, k].astype(bool)
            minsum = float((enum.pmin[:, k] * u_arr[:, k]).sum() + fl_lb[:, k].sum())
            room = float((fl_ub[:, k] - fl_lb[:, k]).sum())
            bound += _greedy_dispatch_bound(enum.bids[:, k], enum.pmin[:, k] * u_arr[:, k],
                                            enum.pmax[:, k] * u_arr[:, k], committed,
                                            room, s.demand[k] - minsum)
        if bound >= best_obj - _EPS:
            continue
        out = enum.dispatch_lp(u_mat, fl_lb, fl_ub, enum.bids)
        if out is None:
            continue
        lp_obj, p, pv, e = out
        obj = lp_obj + fixed
        if obj < best_obj - _EPS:
            best_obj = obj
            best = (u_mat, states, p, pv, e, (tuple(sc_u_rows), tuple(sc_d_rows)))
    if best is None:
        raise MarketInfeasible("oracle found no feasible assignment")
    u_mat, states, p, pv, e, sc_rows = best
    sch_u = {u.id: tuple(u_mat[i]) for i, u in enumerate(s.units)}
    mcp = tuple(
        max([u.bid[t - 1] for u in s.units if sch_u[u.id][t - 1]], default=0.0)
        for t in range(1, s.periods + 1))
    return _result_from(s, u_mat, states, p, pv, e, sc_rows, best_obj, mcp,
                        "oracle_ocm", enum)


def oracle_pcm(s: Scenario, b: OracleBudget = OracleBudget()) -> ClearingResult:
    """Global minimum of the consumer payment by exhaustive enumeration.

    For a fixed commitment the cheapest admissible price is the highest
    committed offer in each period (the price floor holds with equality
    there and zero elsewhere), so each assignment is priced at that
    envelope before the dispatch LP runs.
    """
    enum = _Enumerator(s, b)
    best = None
    best_obj = math.inf
    for u_mat, states, fl_lb, fl_ub in enum.iter_assignments():
        if not enum.supply_envelope_ok(u_mat, fl_lb, fl_ub):
            continue
        sc_u_rows, sc_d_rows, fixed = enum.fixed_cost(u_mat)
        mcp = [
            max([s.units[i].bid[t - 1] for i in range(enum.U) if u_mat[i][t - 1]],
                default=0.0)
            for t in range(1, s.periods + 1)]
        u_arr = np.array(u_mat, dtype=float) if enum.U else np.zeros((0, enum.T))
        bound = fixed
        for t in range(1, enum.T + 1):
            k = t - 1
            minsum_units = float((enum.pmin[:, k] * u_arr[:, k]).sum())
            floor = max(minsum_units, s.demand[k] - float(fl_ub[:, k].sum()))
            bound += mcp[k] * floor
        if bound >= best_obj - _EPS:
            continue
        price_coeff = np.tile(np.asarray(mcp), (enum.U, 1)) if enum.U \
            else np.zeros((0, enum.T))
        out = enum.dispatch_lp(u_mat, fl_lb, fl_ub, price_coeff)
        if out is None:
            continue
        lp_obj, p, pv, e = out
        obj = lp_obj + fixed
        if obj < best_obj - _EPS:
            best_obj = obj
            best = (u_mat, states, p, pv, e,
                    (tuple(sc_u_rows), tuple(sc_d_rows)), tuple(mcp))
    if best is None:
        raise MarketInfeasible("oracle found no feasible assignment")
    u_mat, states, p, pv, e, sc_rows, mcp = best
    return _result_from(s, u_mat, states, p, pv, e, sc_rows, best_obj, mcp,
                        "oracle_pcm", enum)
