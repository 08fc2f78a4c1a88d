"""Price decomposition: subproblem builds, cut algebra, master LP,
convergence loop, and failure modes."""

import math

import pytest

from v2gmarket.lp_mip import SolveStatus
from v2gmarket.ocm import (IterationLimitReached, Schedule, clear_ocm,
                           compute_payments, verify_schedule)
from v2gmarket.pcm_gbd import (FeasibilityCut, GbdOptions, NoPriceExists,
                               OptimalityCut, OptimalitySubResult,
                               build_optimality_subproblem,
                               make_feasibility_cuts, make_optimality_cut,
                               run_pcm_gbd, solve_feasibility_subproblem,
                               solve_master, solve_optimality_subproblem)

from test_ocm import market, single_unit_market, three_unit_market, unit


def two_unit_toy():
    # cheap small unit, dear big unit; demand needs the big one
    return market([60.0], [unit("U1", 10.0, 50), unit("U2", 30.0, 100)])


def test_build_subproblem_has_price_cap_rows():
    s = three_unit_market()
    lp = build_optimality_subproblem(s, [25.0])
    rows = {c.name for c in lp.constraints}
    assert {"mcpcap[U1,1]", "mcpcap[U2,1]", "mcpcap[U3,1]"} <= rows
    assert "bal[1]" in rows


def test_subproblem_single_unit_scales_with_price():
    s = market([50.0], [unit("U1", 10.0, 100)])
    at10 = solve_optimality_subproblem(s, [10.0])
    assert at10.status is SolveStatus.OPTIMAL
    assert at10.objective == pytest.approx(500.0, abs=1e-6)
    assert at10.schedule.p["U1"] == pytest.approx((50.0,), abs=1e-7)
    at20 = solve_optimality_subproblem(s, [20.0])
    assert at20.objective == pytest.approx(1000.0, abs=1e-6)


def test_subproblem_three_unit_at_eleven():
    sub = solve_optimality_subproblem(three_unit_market(), [11.0])
    assert sub.status is SolveStatus.OPTIMAL
    assert sub.objective == pytest.approx(3650.0, abs=1e-6)
    assert sub.schedule.u["U1"] == (1,)
    assert sub.schedule.u["U2"] == (1,)
    assert sub.schedule.u["U3"] == (0,)


def test_subproblem_infeasible_when_price_excludes_needed_unit():
    sub = solve_optimality_subproblem(two_unit_toy(), [10.0])
    assert sub.status is SolveStatus.INFEASIBLE


def test_feasibility_subproblem_absorbs_violation():
    sub = solve_feasibility_subproblem(two_unit_toy(), [10.0])
    assert sub.status is SolveStatus.OPTIMAL
    assert sub.w_total == pytest.approx(20.0, abs=1e-6)
    assert sub.w_by_period == pytest.approx((20.0,), abs=1e-6)
    assert sub.schedule.u["U2"] == (1,)


def test_feasibility_subproblem_zero_slack_at_high_price():
    sub = solve_feasibility_subproblem(two_unit_toy(), [30.0])
    assert sub.status is SolveStatus.OPTIMAL
    assert sub.w_total == pytest.approx(0.0, abs=1e-9)


def _bare_schedule(p_row):
    return Schedule(u={"U1": (1,) * len(p_row)}, p={"U1": tuple(p_row)},
                    sc_u={"U1": (0.0,) * len(p_row)},
                    sc_d={"U1": (0.0,) * len(p_row)},
                    p_fleet={}, u_ch={}, u_dsch={}, e_fleet={})


def test_optimality_cut_substitution():
    sub = OptimalitySubResult(
        status=SolveStatus.OPTIMAL, schedule=_bare_schedule([5.0]),
        objective=100.0, lambda_duals={("U1", 1): 0.0})
    cut = make_optimality_cut(sub, [20.0])
    assert cut.base_ubd == 100.0
    assert cut.mcp_ref == (20.0,)
    assert cut.grad == (5.0,)
    # eta >= 100 + 5*(MCP - 20): at MCP=12 the bound is 60
    assert cut.base_ubd + cut.grad[0] * (12.0 - 20.0) == pytest.approx(60.0)


def test_optimality_cut_subtracts_price_cap_duals():
    sub = OptimalitySubResult(
        status=SolveStatus.OPTIMAL, schedule=_bare_schedule([5.0]),
        objective=100.0, lambda_duals={("U1", 1): 2.0})
    cut = make_optimality_cut(sub, [20.0])
    assert cut.grad == (3.0,)


def test_optimality_cut_valid_at_true_optimum():
    # single unit at its own bid: the cut may never exceed the true
    # payment when evaluated at the optimal price
    s = market([50.0], [unit("U1", 10.0, 100)])
    sub = solve_optimality_subproblem(s, [10.0])
    cut = make_optimality_cut(sub, [10.0])
    value_at_opt = cut.base_ubd + cut.grad[0] * (10.0 - cut.mcp_ref[0])
    assert value_at_opt <= 500.0 + 1e-6


def test_feasibility_cut_substitution():
    from v2gmarket.pcm_gbd import FeasibilitySubResult
    sub = FeasibilitySubResult(
        status=SolveStatus.OPTIMAL, w_total=4.0, w_by_period=(4.0, 0.0),
        lambda_sum_by_period=(2.0, 0.0))
    cuts = make_feasibility_cuts(sub, [10.0, 10.0])
    assert len(cuts) == 1
    cut = cuts[0]
    assert cut.period == 1
    assert cut.mcp_ref_t + cut.w_hat / cut.lambda_sum == pytest.approx(12.0)


def test_feasibility_cut_zero_slack_yields_no_cuts():
    from v2gmarket.pcm_gbd import FeasibilitySubResult
    sub = FeasibilitySubResult(status=SolveStatus.OPTIMAL, w_total=0.0,
                               w_by_period=(0.0,), lambda_sum_by_period=(0.0,))
    assert make_feasibility_cuts(sub, [10.0]) == []


def test_feasibility_cut_degenerate_raises():
    from v2gmarket.pcm_gbd import FeasibilitySubResult
    sub = FeasibilitySubResult(status=SolveStatus.OPTIMAL, w_total=5.0,
                               w_by_period=(5.0,), lambda_sum_by_period=(0.0,))
    with pytest.raises(RuntimeError, match="degenerate"):
        make_feasibility_cuts(sub, [10.0])


def test_feasibility_cut_from_two_unit_toy():
    sub = solve_feasibility_subproblem(two_unit_toy(), [10.0])
    cuts = make_feasibility_cuts(sub, [10.0])
    assert len(cuts) == 1
    floor = cuts[0].mcp_ref_t + cuts[0].w_hat / cuts[0].lambda_sum
    assert floor == pytest.approx(30.0, abs=1e-6)  # unit 2's bid


def master_market():
    # single period, max bid 30, so the master box is MCP in [0, 30]
    return market([5.0], [unit("U1", 30.0, 100)])


def test_master_empty_pool_returns_box_minimum():
    mcp, lbd = solve_master([], master_market())
    assert mcp == (0.0,)
    assert lbd == 0.0


def test_master_hand_lp():
    s = master_market()
    opt = OptimalityCut(base_ubd=100.0, mcp_ref=(20.0,), grad=(5.0,))
    mcp, lbd = solve_master([opt], s)
    assert mcp == pytest.approx((0.0,), abs=1e-9)
    assert lbd == pytest.approx(0.0, abs=1e-9)
    feas = FeasibilityCut(period=1, w_hat=4.0, lambda_sum=2.0, mcp_ref_t=10.0)
    mcp, lbd = solve_master([opt, feas], s)
    assert mcp == pytest.approx((12.0,), abs=1e-9)
    assert lbd == pytest.approx(60.0, abs=1e-9)


def test_master_infeasible_floor_raises_no_price():
    # a floor above the highest bid cannot be met inside the box
    feas = FeasibilityCut(period=1, w_hat=100.0, lambda_sum=1.0, mcp_ref_t=30.0)
    with pytest.raises(NoPriceExists):
        solve_master([feas], master_market())


def test_run_single_unit_converges():
    result, trace = run_pcm_gbd(market([50.0], [unit("U1", 10.0, 100)]))
    assert result.payment_cost == pytest.approx(500.0, abs=1e-6)
    assert result.mcp == pytest.approx((10.0,), abs=1e-9)
    assert result.stats["status"] == "Optimal"
    assert trace.rows[-1].ubd - trace.rows[-1].lbd <= 1e-4 + 1e-9


def test_run_three_unit_full_trace():
    result, trace = run_pcm_gbd(three_unit_market())
    got = [(r.iteration, r.cut_type, r.ubd, r.lbd) for r in trace.rows]
    assert got == [
        (1, "optimality", pytest.approx(3750.0), pytest.approx(0.0)),
        (2, "feasibility", pytest.approx(3750.0), pytest.approx(1575.0)),
        (3, "feasibility", pytest.approx(3750.0), pytest.approx(1650.0)),
        (4, "optimality", pytest.approx(3650.0), pytest.approx(3650.0)),
    ]
    assert result.payment_cost == pytest.approx(3650.0, abs=1e-6)
    assert result.mcp == pytest.approx((11.0,), abs=1e-9)
    assert result.stats["optimality_cuts"] == 2
    assert result.stats["feasibility_cuts"] == 2
    assert len(trace.cuts) == 4
    assert all(row.wall_ms >= 0.0 for row in trace.rows)


def test_run_beats_ocm_settlement_on_three_unit():
    s = three_unit_market()
    ocm = clear_ocm(s)
    pcm, _ = run_pcm_gbd(s)
    assert pcm.payment_cost == pytest.approx(3650.0, abs=1e-6)
    assert ocm.payment_cost == pytest.approx(3750.0, abs=1e-6)
    assert pcm.payment_cost < ocm.payment_cost


def test_run_seeded_from_ocm():
    result, trace = run_pcm_gbd(three_unit_market(),
                                GbdOptions(seed_from_ocm=True))
    assert result.payment_cost == pytest.approx(3650.0, abs=1e-6)
    assert result.stats["status"] == "Optimal"


def test_run_iteration_limit_carries_incumbent():
    with pytest.raises(IterationLimitReached) as exc:
        run_pcm_gbd(three_unit_market(), GbdOptions(max_iterations=2))
    assert exc.value.result is not None
    # iteration 2's slack schedule, re-priced at its own envelope, is
    # already the payment optimum even though the loop has not converged
    assert exc.value.result.payment_cost == pytest.approx(3650.0, abs=1e-6)
    assert len(exc.value.trace.rows) == 2


def test_run_incumbent_verifies_and_prices_support():
    s = three_unit_market()
    result, _ = run_pcm_gbd(s)
    assert verify_schedule(result.schedule, s, mcp=result.mcp) == []
    payment, _, _ = compute_payments(result.schedule, result.mcp, s)
    assert payment == pytest.approx(result.payment_cost, abs=1e-6)
    # committed-bid envelope: price sits exactly on the dearest committed offer
    for t in range(s.periods):
        committed = [u.bid[t] for u in s.units if result.schedule.u[u.id][t]]
        assert result.mcp[t] == pytest.approx(max(committed), abs=1e-9)


def test_run_monotone_bounds_default_and_seeded(peaky):
    for opts in (None, GbdOptions(seed_from_ocm=True)):
        _, trace = run_pcm_gbd(peaky, opts)
        best_ubd = math.inf
        prev_lbd = -math.inf
        for row in trace.rows:
            assert row.ubd <= best_ubd + 1e-9
            assert row.lbd >= prev_lbd - 1e-9
            best_ubd = min(best_ubd, row.ubd)
            prev_lbd = max(prev_lbd, row.lbd)
        assert trace.rows[-1].ubd - trace.rows[-1].lbd <= 1e-4 + 1e-9
