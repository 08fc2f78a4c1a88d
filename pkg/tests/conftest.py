"""Shared fixtures: bundled scenario files and a seeded generator of
tiny random scenarios small enough for the exhaustive oracle."""

import json
import pathlib
import random

import pytest

from v2gmarket.scenario import Scenario, load_scenario

SCENARIO_DIR = pathlib.Path(__file__).resolve().parent.parent / "scenarios"

# unit count, period count, fleet count; all stay inside OracleBudget
SHAPES = [(2, 2, 0), (3, 2, 0), (2, 3, 0), (3, 3, 0), (3, 4, 0),
          (2, 2, 1), (2, 3, 1), (3, 3, 1), (2, 4, 1)]

RANDOM_SUITE_SIZE = 200


def random_tiny_doc(rng: random.Random) -> dict:
    units_n, periods, fleets_n = rng.choice(SHAPES)
    units = []
    caps = []
    for i in range(units_n):
        cap = rng.choice([40, 60, 80, 100, 120, 160])
        caps.append(cap)
        pmin = rng.choice([0.0, 0.0, 0.1 * cap, 0.25 * cap])
        bid = round(rng.uniform(5, 60), 2)
        stairs = [[None, round(rng.choice([0, 0, 200, 500, 1500]) * rng.uniform(0.5, 1.5), 2)]]
        if rng.random() < 0.4:
            hot = round(rng.uniform(20, 300), 2)
            cold = round(hot + rng.uniform(0, 400), 2)
            stairs = [[rng.randint(1, 2), hot], [None, cold]]
        ramp = rng.choice([cap, cap, 0.6 * cap, 0.35 * cap])
        committed = rng.random() < 0.35
        unit = {
            "id": f"U{i + 1}",
            "bid": [round(bid * rng.uniform(0.9, 1.1), 2) for _ in range(periods)],
            "p_min": [pmin] * periods,
            "p_max": [float(cap)] * periods,
            "ramp_up": float(ramp),
            "ramp_down": float(rng.choice([ramp, cap])),
            "startup_stairs": stairs,
            "shutdown_cost": float(rng.choice([0, 0, 50, 120])),
            "no_load_cost": float(rng.choice([0, 0, 30, 90])),
            "initial_committed": committed,
        }
        if committed:
            unit["initial_output"] = round(rng.uniform(pmin, cap), 2)
        else:
            unit["initial_offline_periods"] = rng.randint(1, 3)
        units.append(unit)
    fleets = []
    for v in range(fleets_n):
        e_max = rng.choice([60.0, 100.0, 150.0])
        e_min = round(rng.uniform(0, 0.3) * e_max, 2)
        e_init = round(rng.uniform(e_min, e_max), 2)
        power = rng.choice([20.0, 40.0, 60.0])
        fleets.append({
            "id": f"F{v + 1}", "e_min": e_min, "e_max": e_max,
            "e_initial": e_init, "e_target": e_init,
            "ch_min": 0.0, "ch_max": power,
            "dsch_min": 0.0, "dsch_max": power,
            "efficiency": rng.choice([1.0, 0.9, 0.85]),
            "availability": [rng.choice([0.0, 0.5, 1.0, 1.0]) for _ in range(periods)],
        })
    total_cap = sum(caps)
    demand = [round(rng.uniform(0.25, 0.85) * total_cap, 1) for _ in range(periods)]
    return {"periods": periods, "demand": demand, "units": units, "fleets": fleets}


def random_tiny_scenario(rng: random.Random) -> Scenario:
    # rejection sampling: a draw can violate the capacity screen when
    # committed initial outputs and ramps make period 1 unreachable
    while True:
        doc = random_tiny_doc(rng)
        try:
            return load_scenario(json.dumps(doc))
        except ValueError:
            continue


@pytest.fixture(scope="session")
def uc10() -> Scenario:
    return load_scenario((SCENARIO_DIR / "uc10_24h.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def peaky() -> Scenario:
    return load_scenario((SCENARIO_DIR / "peaky_v2g.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def random_suite() -> list:
    rng = random.Random(20260816)
    return [random_tiny_scenario(rng) for _ in range(RANDOM_SUITE_SIZE)]
