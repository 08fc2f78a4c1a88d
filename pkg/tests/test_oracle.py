"""Exhaustive oracle: enumeration counts, frozen optima, budget limits,
agreement spot checks, and the envelope-pricing argument."""

import random

import pytest

from v2gmarket.ocm import clear_ocm, compute_payments, verify_schedule
from v2gmarket.oracle import (BudgetExceeded, OracleBudget, oracle_ocm,
                              oracle_pcm)
from v2gmarket.pcm_gbd import GbdOptions, run_pcm_gbd

from conftest import random_tiny_scenario
from test_ocm import fleet_doc, market, single_unit_market, three_unit_market, unit


def test_single_unit_enumeration_count():
    s = market([50.0], [unit("U1", 10.0, 100)])
    result = oracle_ocm(s)
    assert result.stats["assignments"] == 2
    assert result.offer_cost == pytest.approx(500.0, abs=1e-9)


def test_three_unit_enumeration():
    result = oracle_ocm(three_unit_market())
    assert result.stats["assignments"] == 8
    assert result.offer_cost == pytest.approx(2250.0, abs=1e-6)
    assert result.schedule.u["U1"] == (1,)
    assert result.schedule.u["U2"] == (0,)
    assert result.schedule.u["U3"] == (1,)
    assert result.mcp == (25.0,)
    assert result.payment_cost == pytest.approx(3750.0, abs=1e-6)


def test_oracle_pcm_single_unit():
    s = market([50.0], [unit("U1", 10.0, 100)])
    result = oracle_pcm(s)
    assert result.payment_cost == pytest.approx(500.0, abs=1e-6)
    assert result.mcp == (10.0,)


def test_oracle_pcm_three_unit_picks_cheaper_payment():
    result = oracle_pcm(three_unit_market())
    assert result.payment_cost == pytest.approx(3650.0, abs=1e-6)
    assert result.schedule.u["U1"] == (1,)
    assert result.schedule.u["U2"] == (1,)
    assert result.schedule.u["U3"] == (0,)
    assert result.mcp == (11.0,)


def test_budget_refusal():
    s = market([50.0] * 10, [unit(f"U{i}", 10.0 + i, 100, periods=10)
                             for i in range(2)])
    with pytest.raises(BudgetExceeded):
        oracle_ocm(s, OracleBudget(max_binary_count=19))
    with pytest.raises(BudgetExceeded):
        oracle_ocm(s, OracleBudget(max_enumerations=100))


def test_oracle_matches_clear_ocm_spot(random_suite):
    for s in random_suite[:20]:
        a = clear_ocm(s)
        o = oracle_ocm(s)
        assert a.offer_cost == pytest.approx(o.offer_cost, abs=1e-6)


def test_oracle_schedules_verify(random_suite):
    for s in random_suite[:10]:
        o = oracle_ocm(s)
        assert verify_schedule(o.schedule, s, mcp=o.mcp) == []
        p = oracle_pcm(s)
        assert verify_schedule(p.schedule, s, mcp=p.mcp) == []


def test_pcm_oracle_never_exceeds_repriced_ocm(random_suite):
    for s in random_suite[:20]:
        ocm = oracle_ocm(s)
        pcm = oracle_pcm(s)
        assert pcm.payment_cost <= ocm.payment_cost + 1e-6


def test_envelope_pricing_perturbation():
    # raising any period's MCP above the committed-bid envelope can only
    # increase the payment by delta * dispatched energy
    s = three_unit_market()
    pcm = oracle_pcm(s)
    base_payment = pcm.payment_cost
    delta = 0.5
    bumped = tuple(m + delta for m in pcm.mcp)
    payment, _, _ = compute_payments(pcm.schedule, bumped, s)
    dispatched = sum(sum(pcm.schedule.p[u.id]) for u in s.units)
    assert payment == pytest.approx(base_payment + delta * dispatched, abs=1e-9)


def test_oracle_deterministic_tie_break():
    # two identical units: either alone serves demand at equal cost; the
    # lexicographically smallest commitment vector must win every run
    twin = [unit("U1", 10.0, 100), unit("U2", 10.0, 100)]
    s = market([50.0], twin)
    first = oracle_ocm(s)
    for _ in range(3):
        again = oracle_ocm(s)
        assert again.schedule.u == first.schedule.u
    assert first.schedule.u["U1"] == (0,)
    assert first.schedule.u["U2"] == (1,)


def test_oracle_with_fleet_counts_three_states():
    s = market([50.0], [unit("U1", 10.0, 100)],
               [dict(fleet_doc(periods=1, power=10.0, e0=50.0),
                     e_target=50.0)])
    result = oracle_ocm(s)
    # 2 unit states x 3 admissible fleet states (idle, charge, discharge)
    assert result.stats["assignments"] == 6
