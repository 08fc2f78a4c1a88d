"""Command-line entry points and deterministic report emission.

Every writer formats numbers to six decimal places with '.' as the
separator so repeated runs on the same input are byte-identical; the
only exception is the wall_ms column of the decomposition trace, which
records real elapsed time.  The report path also renders the series to
PNG figures next to the delimited files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

from .lp_mip import make_solver
from .ocm import (ClearingResult, IterationLimitReached, MarketInfeasible,
                  clear_ocm)
from .pcm_gbd import GbdOptions, GbdTrace, NoPriceExists, run_pcm_gbd
from .scenario import (CapacityError, Scenario, ScenarioError, load_scenario,
                       override_demand, parse_demand_csv, strip_fleets)

EXIT_OK = 0
EXIT_FILE = 1
EXIT_INVALID = 2
EXIT_CAPACITY = 3
EXIT_INFEASIBLE = 10
EXIT_ITERATION_LIMIT = 11

MECHANISM_ORDER = ("ocm", "ocm_v2g", "pcm", "pcm_v2g")


@dataclass(frozen=True)
class ComparisonReport:
    """Four-way mechanism comparison: cost metrics, per-unit payments,
    and the payment savings of the price-minimizing auction relative to
    the offer-minimizing one, with and without fleets."""

    metrics: dict        # mechanism -> {offer_cost, payment_cost, average_mcp}
    unit_payments: dict  # unit id -> mechanism -> payment
    savings: dict        # {"no_v2g"|"v2g"} -> {absolute, percent}
    results: dict        # mechanism -> ClearingResult


def _fmt(x) -> str:
    return f"{x:.6f}"


def _round_floats(obj):
    if isinstance(obj, float):
        return round(obj, 6)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def write_result_json(result: ClearingResult, path: str) -> None:
    doc = _round_floats(result.to_dict())
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_hourly_csv(s: Scenario, result: ClearingResult, path: str) -> None:
    """Per-period series: demand, demand net of fleet action, price, the
    energy payment mcp(t) * sum_i p_i(t), and the fleet net output."""
    sch = result.schedule
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,demand,net_demand,mcp,payment_t,fleet_net_mw\n")
        for t in range(1, s.periods + 1):
            fleet_net = sum(sch.p_fleet[f.id][t - 1] for f in s.fleets)
            unit_total = sum(sch.p[u.id][t - 1] for u in s.units)
            payment_t = result.mcp[t - 1] * unit_total
            fh.write(",".join([
                str(t), _fmt(s.demand[t - 1]), _fmt(s.demand[t - 1] - fleet_net),
                _fmt(result.mcp[t - 1]), _fmt(payment_t), _fmt(fleet_net),
            ]) + "\n")


def write_trace_csv(trace: GbdTrace, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("iteration,cut_type,ubd,lbd,wall_ms\n")
        for row in trace.rows:
            fh.write(f"{row.iteration},{row.cut_type},{_fmt(row.ubd)},"
                     f"{_fmt(row.lbd)},{row.wall_ms:.3f}\n")


def build_comparison(results: dict) -> ComparisonReport:
    metrics = {}
    for mech in MECHANISM_ORDER:
        r = results[mech]
        metrics[mech] = {
            "offer_cost": r.offer_cost,
            "payment_cost": r.payment_cost,
            "average_mcp": sum(r.mcp) / len(r.mcp),
        }
    unit_ids = list(results["ocm"].unit_payments)
    unit_payments = {
        uid: {mech: results[mech].unit_payments[uid] for mech in MECHANISM_ORDER}
        for uid in unit_ids}
    savings = {}
    for label, ocm_key, pcm_key in (("no_v2g", "ocm", "pcm"), ("v2g", "ocm_v2g", "pcm_v2g")):
        ocm_pay = results[ocm_key].payment_cost
        pcm_pay = results[pcm_key].payment_cost
        absolute = ocm_pay - pcm_pay
        savings[label] = {
            "absolute": absolute,
            "percent": 100.0 * absolute / ocm_pay if ocm_pay else 0.0,
        }
    return ComparisonReport(metrics=metrics, unit_payments=unit_payments,
                            savings=savings, results=results)


def write_comparison_json(report: ComparisonReport, path: str) -> None:
    doc = _round_floats({
        "metrics": report.metrics,
        "unit_payments": report.unit_payments,
        "savings": report.savings,
    })
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_comparison_csv(report: ComparisonReport, path: str) -> None:
    """Metric rows by mechanism columns; the savings rows carry values
    under the pcm columns only."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("metric," + ",".join(MECHANISM_ORDER) + "\n")
        for metric in ("offer_cost", "payment_cost", "average_mcp"):
            cells = [_fmt(report.metrics[m][metric]) for m in MECHANISM_ORDER]
            fh.write(f"{metric}," + ",".join(cells) + "\n")
        for uid, by_mech in report.unit_payments.items():
            cells = [_fmt(by_mech[m]) for m in MECHANISM_ORDER]
            fh.write(f"unit_payment[{uid}]," + ",".join(cells) + "\n")
        fh.write("savings_vs_ocm_abs,,,"
                 + _fmt(report.savings["no_v2g"]["absolute"]) + ","
                 + _fmt(report.savings["v2g"]["absolute"]) + "\n")
        fh.write("savings_vs_ocm_pct,,,"
                 + _fmt(report.savings["no_v2g"]["percent"]) + ","
                 + _fmt(report.savings["v2g"]["percent"]) + "\n")


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


_PNG_META = {"Software": "v2gmarket"}


def render_hourly_png(s: Scenario, result: ClearingResult, path: str) -> None:
    plt = _plt()
    sch = result.schedule
    ts = list(range(1, s.periods + 1))
    fleet_net = [sum(sch.p_fleet[f.id][t - 1] for f in s.fleets) for t in ts]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax1.plot(ts, list(s.demand), marker="o", label="demand")
    ax1.plot(ts, [d - fn for d, fn in zip(s.demand, fleet_net)], marker="s",
             label="net demand")
    ax1.bar(ts, fleet_net, alpha=0.4, label="fleet net MW")
    ax1.set_ylabel("MW")
    ax1.legend(loc="best")
    ax2.step(ts, list(result.mcp), where="mid", color="tab:red", label="mcp")
    ax2.set_xlabel("period")
    ax2.set_ylabel("price")
    ax2.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def render_convergence_png(trace: GbdTrace, path: str) -> None:
    plt = _plt()
    its = [row.iteration for row in trace.rows]
    finite_ubd = [row.ubd if math.isfinite(row.ubd) else None for row in trace.rows]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(its, finite_ubd, marker="o", label="UBD")
    ax.plot(its, [row.lbd for row in trace.rows], marker="s", label="LBD")
    ax.set_xlabel("iteration")
    ax.set_ylabel("bound")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def render_comparison_pngs(report: ComparisonReport, payments_path: str,
                           mcp_path: str) -> None:
    plt = _plt()
    labels = list(MECHANISM_ORDER)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.bar(labels, [report.metrics[m]["payment_cost"] for m in labels],
           color=["#777777", "#777777", "#2a6fbb", "#2a6fbb"])
    ax.set_ylabel("payment")
    fig.tight_layout()
    fig.savefig(payments_path, dpi=120, metadata=_PNG_META)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.bar(labels, [report.metrics[m]["average_mcp"] for m in labels],
           color=["#777777", "#777777", "#2a6fbb", "#2a6fbb"])
    ax.set_ylabel("average mcp")
    fig.tight_layout()
    fig.savefig(mcp_path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def _load(scenario_path: str, demand_csv: str = None) -> Scenario:
    with open(scenario_path, "r", encoding="utf-8") as fh:
        s = load_scenario(fh)
    if demand_csv is not None:
        with open(demand_csv, "r", encoding="utf-8") as fh:
            demand = parse_demand_csv(fh.read(), s.periods)
        s = override_demand(s, demand)
    return s


def cmd_validate(scenario_path: str, demand_csv: str = None) -> dict:
    s = _load(scenario_path, demand_csv)
    return {"periods": s.periods, "units": len(s.units), "fleets": len(s.fleets)}


def cmd_clear(scenario_path: str, mechanism: str, v2g: str, out_dir: str, *,
              epsilon: float = 1e-4, max_iter: int = 50, seed_from_ocm: bool = False,
              solver_name: str = "baseline", demand_csv: str = None) -> ClearingResult:
    import os
    s = _load(scenario_path, demand_csv)
    if v2g == "off":
        s = strip_fleets(s)
    solver = make_solver(solver_name)
    os.makedirs(out_dir, exist_ok=True)
    trace = None
    if mechanism == "ocm":
        result = clear_ocm(s, solver=solver)
    else:
        opts = GbdOptions(epsilon=epsilon, max_iterations=max_iter,
                          seed_from_ocm=seed_from_ocm, solver=solver)
        result, trace = run_pcm_gbd(s, opts)
    write_result_json(result, os.path.join(out_dir, "result.json"))
    write_hourly_csv(s, result, os.path.join(out_dir, "hourly.csv"))
    render_hourly_png(s, result, os.path.join(out_dir, "hourly.png"))
    if trace is not None:
        write_trace_csv(trace, os.path.join(out_dir, "trace.csv"))
        render_convergence_png(trace, os.path.join(out_dir, "convergence.png"))
    return result


def cmd_compare(scenario_path: str, out_dir: str, *, epsilon: float = 1e-4,
                max_iter: int = 50, solver_name: str = "baseline",
                demand_csv: str = None) -> ComparisonReport:
    """Clear all four mechanism variants and emit the comparison files.

    The price-minimizing runs are seeded from the companion
    offer-minimizing settlement, which guarantees their payment never
    exceeds it.
    """
    import os
    s = _load(scenario_path, demand_csv)
    bare = strip_fleets(s)
    solver = make_solver(solver_name)
    opts = GbdOptions(epsilon=epsilon, max_iterations=max_iter,
                      seed_from_ocm=True, solver=solver)
    results = {
        "ocm": clear_ocm(bare, solver=solver),
        "ocm_v2g": clear_ocm(s, solver=solver),
        "pcm": run_pcm_gbd(bare, opts)[0],
        "pcm_v2g": run_pcm_gbd(s, opts)[0],
    }
    report = build_comparison(results)
    os.makedirs(out_dir, exist_ok=True)
    write_comparison_json(report, os.path.join(out_dir, "comparison.json"))
    write_comparison_csv(report, os.path.join(out_dir, "comparison.csv"))
    render_comparison_pngs(report, os.path.join(out_dir, "comparison_payments.png"),
                           os.path.join(out_dir, "comparison_mcp.png"))
    return report


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="v2gmarket",
                                description="Day-ahead market clearing with V2G fleets")
    sub = p.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("validate", help="check a scenario document")
    pv.add_argument("file")
    pv.add_argument("--demand-csv", default=None)

    pc = sub.add_parser("clear", help="clear one mechanism and write reports")
    pc.add_argument("file")
    pc.add_argument("--mechanism", required=True, choices=["ocm", "pcm"])
    pc.add_argument("--v2g", choices=["on", "off"], default="on")
    pc.add_argument("--out", required=True)
    pc.add_argument("--epsilon", type=float, default=1e-4)
    pc.add_argument("--max-iter", type=int, default=50)
    pc.add_argument("--seed-from-ocm", action="store_true")
    pc.add_argument("--solver", choices=["baseline", "highs"], default="baseline")
    pc.add_argument("--demand-csv", default=None)

    pm = sub.add_parser("compare", help="clear all four variants and compare")
    pm.add_argument("file")
    pm.add_argument("--out", required=True)
    pm.add_argument("--epsilon", type=float, default=1e-4)
    pm.add_argument("--max-iter", type=int, default=50)
    pm.add_argument("--solver", choices=["baseline", "highs"], default="baseline")
    pm.add_argument("--demand-csv", default=None)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            info = cmd_validate(args.file, demand_csv=args.demand_csv)
            print(f"ok: {info['units']} units, {info['fleets']} fleets, "
                  f"{info['periods']} periods")
            return EXIT_OK
        if args.command == "clear":
            result = cmd_clear(args.file, args.mechanism, args.v2g, args.out,
                               epsilon=args.epsilon, max_iter=args.max_iter,
                               seed_from_ocm=args.seed_from_ocm,
                               solver_name=args.solver, demand_csv=args.demand_csv)
            print(f"{args.mechanism} cleared: offer={result.offer_cost:.6f} "
                  f"payment={result.payment_cost:.6f}")
            return EXIT_OK
        report = cmd_compare(args.file, args.out, epsilon=args.epsilon,
                             max_iter=args.max_iter, solver_name=args.solver,
                             demand_csv=args.demand_csv)
        for mech in MECHANISM_ORDER:
            m = report.metrics[mech]
            print(f"{mech}: offer={m['offer_cost']:.6f} "
                  f"payment={m['payment_cost']:.6f} avg_mcp={m['average_mcp']:.6f}")
        return EXIT_OK
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except UnicodeDecodeError as exc:
        print(f"error: not a UTF-8 text file: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (MarketInfeasible, NoPriceExists) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except IterationLimitReached as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ITERATION_LIMIT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FILE


if __name__ == "__main__":
    sys.exit(main())
