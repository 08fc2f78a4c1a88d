"""Market scenario data model, JSON ingestion, and validation.

A scenario bundles the hourly demand series, the generating-unit offers,
and the aggregated electric-vehicle fleets taking part in a day-ahead
auction.  All values are immutable after construction so scenarios can be
shared freely between concurrent solves.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterable


class ScenarioError(ValueError):
    """Raised when a scenario document violates a structural invariant."""


class CapacityError(ScenarioError):
    """Raised when offered capacity cannot cover demand in some period."""


def _as_float_tuple(values: Iterable, what: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in values)
    except (TypeError, ValueError):
        raise ScenarioError(f"{what} must be a sequence of numbers")


@dataclass(frozen=True)
class GeneratorOffer:
    """Single-block offer of one generating unit over the horizon.

    startup_stairs encodes the stair-wise startup cost as ordered
    (max_offline_periods, cost) pairs; the last pair also covers every
    longer offline duration (an infinite threshold may be written as
    None in documents).
    """

    id: str
    bid: tuple[float, ...]
    p_min: tuple[float, ...]
    p_max: tuple[float, ...]
    ramp_up: float
    ramp_down: float
    startup_stairs: tuple[tuple[float, float], ...]
    shutdown_cost: float
    no_load_cost: float
    initial_committed: bool = False
    initial_output: float = 0.0
    initial_offline_periods: int = 0

    def startup_cost_for(self, offline_periods: int) -> float:
        """Startup cost after the given number of offline periods."""
        for threshold, cost in self.startup_stairs:
            if offline_periods <= threshold:
                return cost
        return self.startup_stairs[-1][1]

    def stair_durations(self) -> tuple[tuple[int, float], ...]:
        """Expand the stairs into one (duration, cost) pair per distinct
        offline duration that needs its own startup constraint.

        Durations beyond the second-to-last threshold all price at the
        final stair cost, so the expansion stops one past it.
        """
        if len(self.startup_stairs) >= 2:
            deepest = int(self.startup_stairs[-2][0]) + 1
        else:
            deepest = 1
        return tuple((d, self.startup_cost_for(d)) for d in range(1, deepest + 1))


@dataclass(frozen=True)
class PevFleet:
    """Aggregated plug-in electric vehicle fleet.

    Power limits are nameplate values; the per-period availability
    fraction scales them (see effective_fleet_limits).  Net output is
    positive when the fleet discharges to the grid.
    """

    id: str
    e_min: float
    e_max: float
    e_initial: float
    e_target: float
    ch_min: float
    ch_max: float
    dsch_min: float
    dsch_max: float
    efficiency: float
    availability: tuple[float, ...]


@dataclass(frozen=True)
class Scenario:
    periods: int
    demand: tuple[float, ...]
    units: tuple[GeneratorOffer, ...]
    fleets: tuple[PevFleet, ...]


def effective_fleet_limits(fleet: PevFleet, t: int) -> tuple[float, float, float, float]:
    """Availability-scaled power limits of a fleet in period t (1-based).

    Returns (ch_max_t, ch_min_t, dsch_max_t, dsch_min_t).
    """
    a = fleet.availability[t - 1]
    return (a * fleet.ch_max, a * fleet.ch_min, a * fleet.dsch_max, a * fleet.dsch_min)


def default_offline_periods(stairs: tuple[tuple[float, float], ...]) -> int:
    """Offline duration that prices at the deepest stair (a cold start)."""
    if len(stairs) >= 2:
        return int(stairs[-2][0]) + 1
    return 1


def _check_unit(u: GeneratorOffer, periods: int) -> None:
    uid = u.id
    for name, series in (("bid", u.bid), ("p_min", u.p_min), ("p_max", u.p_max)):
        if len(series) != periods:
            raise ScenarioError(f"unit {uid}: {name} has length {len(series)}, expected {periods}")
        for t, v in enumerate(series, start=1):
            if not math.isfinite(v) or v < 0:
                raise ScenarioError(f"unit {uid}: {name} must be finite and non-negative, period {t}")
    for t in range(1, periods + 1):
        if u.p_min[t - 1] > u.p_max[t - 1]:
            raise ScenarioError(f"unit {uid}: p_min exceeds p_max, period {t}")
    for name, v in (("ramp_up", u.ramp_up), ("ramp_down", u.ramp_down),
                    ("shutdown_cost", u.shutdown_cost), ("no_load_cost", u.no_load_cost)):
        if not math.isfinite(v) or v < 0:
            raise ScenarioError(f"unit {uid}: {name} must be finite and non-negative")
    if not u.startup_stairs:
        raise ScenarioError(f"unit {uid}: startup_stairs must not be empty")
    prev_thr, prev_cost = None, None
    for k, (thr, cost) in enumerate(u.startup_stairs):
        last = k == len(u.startup_stairs) - 1
        if not last and not math.isfinite(thr):
            raise ScenarioError(f"unit {uid}: only the last stair threshold may be infinite")
        if thr < 1:
            raise ScenarioError(f"unit {uid}: stair thresholds must be at least 1")
        if math.isfinite(thr) and thr != int(thr):
            raise ScenarioError(f"unit {uid}: stair thresholds must be whole periods")
        if not math.isfinite(cost) or cost < 0:
            raise ScenarioError(f"unit {uid}: stair costs must be finite and non-negative")
        if prev_thr is not None and thr <= prev_thr:
            raise ScenarioError(f"unit {uid}: stair thresholds must be strictly increasing")
        if prev_cost is not None and cost < prev_cost:
            raise ScenarioError(f"unit {uid}: stair costs must be non-decreasing")
        prev_thr, prev_cost = thr, cost
    if not math.isfinite(u.initial_output) or u.initial_output < 0:
        raise ScenarioError(f"unit {uid}: initial_output must be finite and non-negative")
    if u.initial_committed:
        if u.initial_offline_periods != 0:
            raise ScenarioError(f"unit {uid}: initial_offline_periods must be 0 when initially committed")
    else:
        if u.initial_output != 0:
            raise ScenarioError(f"unit {uid}: initial_output must be 0 when not initially committed")
        if u.initial_offline_periods < 1:
            raise ScenarioError(f"unit {uid}: initial_offline_periods must be at least 1 when offline")


def _check_fleet(f: PevFleet, periods: int) -> None:
    fid = f.id
    for name, v in (("e_min", f.e_min), ("e_max", f.e_max), ("e_initial", f.e_initial),
                    ("e_target", f.e_target), ("ch_min", f.ch_min), ("ch_max", f.ch_max),
                    ("dsch_min", f.dsch_min), ("dsch_max", f.dsch_max)):
        if not math.isfinite(v) or v < 0:
            raise ScenarioError(f"fleet {fid}: {name} must be finite and non-negative")
    if not (f.e_min <= f.e_initial <= f.e_max):
        raise ScenarioError(f"fleet {fid}: e_initial must lie within [e_min, e_max]")
    if not (f.e_min <= f.e_target <= f.e_max):
        raise ScenarioError(f"fleet {fid}: e_target must lie within [e_min, e_max]")
    if f.ch_min > f.ch_max:
        raise ScenarioError(f"fleet {fid}: ch_min exceeds ch_max")
    if f.dsch_min > f.dsch_max:
        raise ScenarioError(f"fleet {fid}: dsch_min exceeds dsch_max")
    if not (0 < f.efficiency <= 1):
        raise ScenarioError(f"fleet {fid}: efficiency must lie in (0, 1]")
    if len(f.availability) != periods:
        raise ScenarioError(f"fleet {fid}: availability has length {len(f.availability)}, expected {periods}")
    for t, a in enumerate(f.availability, start=1):
        if not math.isfinite(a) or not (0 <= a <= 1):
            raise ScenarioError(f"fleet {fid}: availability must lie in [0, 1], period {t}")


def validate_scenario(s: Scenario) -> None:
    """Check every structural invariant; raise ScenarioError on the first
    violation and CapacityError when offered capacity cannot meet demand."""
    if s.periods < 1:
        raise ScenarioError("periods must be at least 1")
    if len(s.demand) != s.periods:
        raise ScenarioError(f"demand has length {len(s.demand)}, expected {s.periods}")
    for t, d in enumerate(s.demand, start=1):
        if not math.isfinite(d) or d < 0:
            raise ScenarioError(f"demand must be finite and non-negative, period {t}")
    seen: set[str] = set()
    for u in s.units:
        if u.id in seen:
            raise ScenarioError(f"duplicate id {u.id}")
        seen.add(u.id)
        _check_unit(u, s.periods)
    for f in s.fleets:
        if f.id in seen:
            raise ScenarioError(f"duplicate id {f.id}")
        seen.add(f.id)
        _check_fleet(f, s.periods)
    for t in range(1, s.periods + 1):
        supply = sum(u.p_max[t - 1] for u in s.units)
        supply += sum(effective_fleet_limits(f, t)[2] for f in s.fleets)
        if supply < s.demand[t - 1] - 1e-9:
            raise CapacityError(
                f"offered capacity {supply} cannot cover demand {s.demand[t - 1]}, period {t}")


def _unit_from_doc(doc: dict) -> GeneratorOffer:
    if "id" not in doc:
        raise ScenarioError("unit missing id")
    uid = str(doc["id"])
    for key in ("bid", "p_min", "p_max", "ramp_up", "ramp_down",
                "startup_stairs", "shutdown_cost", "no_load_cost"):
        if key not in doc:
            raise ScenarioError(f"unit {uid}: missing field {key}")
    raw_stairs = doc["startup_stairs"]
    if not isinstance(raw_stairs, list):
        raise ScenarioError(f"unit {uid}: startup_stairs must be a list of pairs")
    stairs = []
    for entry in raw_stairs:
        if not isinstance(entry, (list, tuple)) or len(entry) != 2:
            raise ScenarioError(f"unit {uid}: each startup stair must be a [max_offline_periods, cost] pair")
        thr, cost = entry
        stairs.append((math.inf if thr is None else float(thr), float(cost)))
    committed = bool(doc.get("initial_committed", False))
    stairs_t = tuple(stairs)
    if "initial_offline_periods" in doc:
        offline = int(doc["initial_offline_periods"])
    else:
        offline = 0 if committed else default_offline_periods(stairs_t)
    return GeneratorOffer(
        id=uid,
        bid=_as_float_tuple(doc["bid"], f"unit {uid}: bid"),
        p_min=_as_float_tuple(doc["p_min"], f"unit {uid}: p_min"),
        p_max=_as_float_tuple(doc["p_max"], f"unit {uid}: p_max"),
        ramp_up=float(doc["ramp_up"]),
        ramp_down=float(doc["ramp_down"]),
        startup_stairs=stairs_t,
        shutdown_cost=float(doc["shutdown_cost"]),
        no_load_cost=float(doc["no_load_cost"]),
        initial_committed=committed,
        initial_output=float(doc.get("initial_output", 0.0)),
        initial_offline_periods=offline,
    )


def _fleet_from_doc(doc: dict) -> PevFleet:
    if "id" not in doc:
        raise ScenarioError("fleet missing id")
    fid = str(doc["id"])
    for key in ("e_min", "e_max", "e_initial", "e_target", "ch_min", "ch_max",
                "dsch_min", "dsch_max", "efficiency", "availability"):
        if key not in doc:
            raise ScenarioError(f"fleet {fid}: missing field {key}")
    return PevFleet(
        id=fid,
        e_min=float(doc["e_min"]),
        e_max=float(doc["e_max"]),
        e_initial=float(doc["e_initial"]),
        e_target=float(doc["e_target"]),
        ch_min=float(doc["ch_min"]),
        ch_max=float(doc["ch_max"]),
        dsch_min=float(doc["dsch_min"]),
        dsch_max=float(doc["dsch_max"]),
        efficiency=float(doc["efficiency"]),
        availability=_as_float_tuple(doc["availability"], f"fleet {fid}: availability"),
    )


def load_scenario(source) -> Scenario:
    """Parse and validate a scenario document.

    source may be UTF-8 bytes, a str, or a readable file object.  Raises
    ScenarioError (or CapacityError) with the first violated invariant.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"malformed scenario document: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    for key in ("periods", "demand", "units"):
        if key not in doc:
            raise ScenarioError(f"missing top-level field {key}")
    try:
        periods = int(doc["periods"])
    except (TypeError, ValueError):
        raise ScenarioError("periods must be an integer")
    units = tuple(_unit_from_doc(u) for u in doc["units"])
    fleets = tuple(_fleet_from_doc(f) for f in doc.get("fleets", []))
    s = Scenario(
        periods=periods,
        demand=_as_float_tuple(doc["demand"], "demand"),
        units=units,
        fleets=fleets,
    )
    validate_scenario(s)
    return s


def serialize_scenario(s: Scenario) -> str:
    """Render a Scenario back to its document form.

    load_scenario(serialize_scenario(s)) reproduces s exactly.
    """
    doc = {
        "periods": s.periods,
        "demand": list(s.demand),
        "units": [
            {
                "id": u.id,
                "bid": list(u.bid),
                "p_min": list(u.p_min),
                "p_max": list(u.p_max),
                "ramp_up": u.ramp_up,
                "ramp_down": u.ramp_down,
                "startup_stairs": [
                    [None if math.isinf(thr) else thr, cost] for thr, cost in u.startup_stairs
                ],
                "shutdown_cost": u.shutdown_cost,
                "no_load_cost": u.no_load_cost,
                "initial_committed": u.initial_committed,
                "initial_output": u.initial_output,
                "initial_offline_periods": u.initial_offline_periods,
            }
            for u in s.units
        ],
        "fleets": [
            {
                "id": f.id,
                "e_min": f.e_min,
                "e_max": f.e_max,
                "e_initial": f.e_initial,
                "e_target": f.e_target,
                "ch_min": f.ch_min,
                "ch_max": f.ch_max,
                "dsch_min": f.dsch_min,
                "dsch_max": f.dsch_max,
                "efficiency": f.efficiency,
                "availability": list(f.availability),
            }
            for f in s.fleets
        ],
    }
    return json.dumps(doc, indent=2)


def strip_fleets(s: Scenario) -> Scenario:
    """Scenario with every fleet removed (the no-V2G variant).

    Revalidates, so a market that relied on fleet discharge to cover
    demand is rejected here.
    """
    bare = replace(s, fleets=())
    validate_scenario(bare)
    return bare


def parse_demand_csv(text: str, periods: int) -> tuple[float, ...]:
    """Parse a (period, demand_mw) CSV column into a demand series.

    A header row is permitted.  Every period 1..periods must appear
    exactly once.
    """
    values: dict[int, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 2:
            raise ScenarioError(f"demand csv line {lineno}: expected period,demand_mw")
        try:
            t = int(parts[0])
            d = float(parts[1])
        except ValueError:
            if lineno == 1:
                continue  # header
            raise ScenarioError(f"demand csv line {lineno}: expected period,demand_mw")
        if t in values:
            raise ScenarioError(f"demand csv: duplicate period {t}")
        values[t] = d
    if sorted(values) != list(range(1, periods + 1)):
        raise ScenarioError(f"demand csv must cover periods 1..{periods} exactly")
    return tuple(values[t] for t in range(1, periods + 1))


def override_demand(s: Scenario, demand: tuple[float, ...]) -> Scenario:
    """Scenario with the demand series replaced; revalidated."""
    out = replace(s, demand=tuple(float(d) for d in demand))
    validate_scenario(out)
    return out
