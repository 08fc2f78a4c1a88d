"""CLI surface: exit codes, emitted file formats, determinism, figures."""

import csv
import json
import math
import re

import pytest

from v2gmarket.cli_report import (EXIT_CAPACITY, EXIT_FILE, EXIT_INFEASIBLE,
                                  EXIT_INVALID, EXIT_ITERATION_LIMIT, EXIT_OK,
                                  cmd_compare, cmd_validate, main)
from v2gmarket.scenario import serialize_scenario

from conftest import SCENARIO_DIR
from test_ocm import fleet_doc, market, three_unit_market, unit

SIX_DP = re.compile(r"^-?\d+\.\d{6}$")


def write_scenario(tmp_path, s, name="case.json"):
    p = tmp_path / name
    p.write_text(serialize_scenario(s), encoding="utf-8")
    return str(p)


@pytest.fixture()
def peaky_path():
    return str(SCENARIO_DIR / "peaky_v2g.json")


def test_validate_ok(capsys, peaky_path):
    assert main(["validate", peaky_path]) == EXIT_OK
    out = capsys.readouterr().out
    assert "3 units" in out and "1 fleets" in out and "6 periods" in out


def test_validate_missing_file(capsys):
    assert main(["validate", "/definitely/not/here.json"]) == EXIT_FILE
    assert "error" in capsys.readouterr().err


def test_validate_bad_demand_length(tmp_path, capsys):
    doc = json.loads(serialize_scenario(three_unit_market()))
    doc["demand"] = [150.0, 1.0]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc), encoding="utf-8")
    assert main(["validate", str(p)]) == EXIT_INVALID
    assert "demand" in capsys.readouterr().err


def test_validate_capacity_violation(tmp_path, capsys):
    doc = json.loads(serialize_scenario(three_unit_market()))
    doc["demand"] = [99999.0]
    p = tmp_path / "cap.json"
    p.write_text(json.dumps(doc), encoding="utf-8")
    assert main(["validate", str(p)]) == EXIT_CAPACITY


def test_validate_malformed_json(tmp_path):
    p = tmp_path / "junk.json"
    p.write_text("{", encoding="utf-8")
    assert main(["validate", str(p)]) == EXIT_INVALID


def test_cmd_validate_returns_summary(peaky_path):
    info = cmd_validate(peaky_path)
    assert info == {"periods": 6, "units": 3, "fleets": 1}


def test_clear_ocm_emits_files(tmp_path, peaky_path):
    out = tmp_path / "run"
    assert main(["clear", peaky_path, "--mechanism", "ocm",
                 "--out", str(out)]) == EXIT_OK
    assert (out / "result.json").is_file()
    assert (out / "hourly.csv").is_file()
    assert (out / "hourly.png").is_file()
    assert not (out / "trace.csv").exists()

    doc = json.loads((out / "result.json").read_text(encoding="utf-8"))
    assert doc["stats"]["mechanism"] == "ocm"
    assert len(doc["mcp"]) == 6
    assert "wall" not in json.dumps(doc["stats"])

    rows = list(csv.DictReader((out / "hourly.csv").open(encoding="utf-8")))
    assert [r["t"] for r in rows] == [str(t) for t in range(1, 7)]
    header = rows[0].keys()
    assert list(header) == ["t", "demand", "net_demand", "mcp", "payment_t",
                            "fleet_net_mw"]
    for r in rows:
        for col in ("demand", "net_demand", "mcp", "payment_t", "fleet_net_mw"):
            assert SIX_DP.match(r[col]), (col, r[col])
        assert float(r["net_demand"]) == pytest.approx(
            float(r["demand"]) - float(r["fleet_net_mw"]), abs=1e-5)

    # energy payments plus fixed costs reproduce the settled payment
    from v2gmarket.scenario import load_scenario
    s = load_scenario(open(peaky_path, encoding="utf-8"))
    energy = sum(float(r["payment_t"]) for r in rows)
    sch = doc["schedule"]
    fixed = 0.0
    for u in s.units:
        fixed += sum(sch["sc_u"][u.id]) + sum(sch["sc_d"][u.id])
        fixed += u.no_load_cost * sum(sch["u"][u.id])
    assert energy + fixed == pytest.approx(doc["payment_cost"], abs=1e-4)


def test_clear_pcm_emits_trace(tmp_path, peaky_path):
    out = tmp_path / "run"
    assert main(["clear", peaky_path, "--mechanism", "pcm", "--seed-from-ocm",
                 "--out", str(out)]) == EXIT_OK
    assert (out / "trace.csv").is_file()
    assert (out / "convergence.png").is_file()
    lines = (out / "trace.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "iteration,cut_type,ubd,lbd,wall_ms"
    assert all(line.split(",")[1] in ("optimality", "feasibility")
               for line in lines[1:])


def test_clear_repeat_byte_identical(tmp_path, peaky_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["clear", peaky_path, "--mechanism", "ocm",
                     "--out", str(out)]) == EXIT_OK
    for name in ("result.json", "hourly.csv", "hourly.png"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_clear_v2g_off_strips_fleet(tmp_path, peaky_path):
    out = tmp_path / "off"
    assert main(["clear", peaky_path, "--mechanism", "ocm", "--v2g", "off",
                 "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader((out / "hourly.csv").open(encoding="utf-8")))
    assert all(float(r["fleet_net_mw"]) == 0.0 for r in rows)


def test_clear_infeasible_market_exit_code(tmp_path):
    s = market([100.0, 160.0],
               [unit("U1", 10.0, 200, periods=2, p0=100.0, ramp=10.0)])
    path = write_scenario(tmp_path, s)
    assert main(["clear", path, "--mechanism", "ocm",
                 "--out", str(tmp_path / "x")]) == EXIT_INFEASIBLE


def test_clear_iteration_limit_exit_code(tmp_path):
    path = write_scenario(tmp_path, three_unit_market())
    assert main(["clear", path, "--mechanism", "pcm", "--max-iter", "2",
                 "--out", str(tmp_path / "x")]) == EXIT_ITERATION_LIMIT


def test_clear_solver_choice_matches(tmp_path, peaky_path):
    a, b = tmp_path / "base", tmp_path / "highs"
    assert main(["clear", peaky_path, "--mechanism", "ocm",
                 "--out", str(a)]) == EXIT_OK
    assert main(["clear", peaky_path, "--mechanism", "ocm", "--solver", "highs",
                 "--out", str(b)]) == EXIT_OK
    da = json.loads((a / "result.json").read_text(encoding="utf-8"))
    db = json.loads((b / "result.json").read_text(encoding="utf-8"))
    assert da["offer_cost"] == pytest.approx(db["offer_cost"], abs=1e-5)


def test_demand_csv_override(tmp_path):
    s = three_unit_market()
    path = write_scenario(tmp_path, s)
    csv_path = tmp_path / "d.csv"
    csv_path.write_text("period,demand_mw\n1,120\n", encoding="utf-8")
    out = tmp_path / "o"
    assert main(["clear", path, "--mechanism", "ocm", "--out", str(out),
                 "--demand-csv", str(csv_path)]) == EXIT_OK
    rows = list(csv.DictReader((out / "hourly.csv").open(encoding="utf-8")))
    assert float(rows[0]["demand"]) == 120.0


def test_compare_emits_files_and_matches_csv(tmp_path, peaky_path):
    out = tmp_path / "cmp"
    assert main(["compare", peaky_path, "--out", str(out)]) == EXIT_OK
    for name in ("comparison.json", "comparison.csv", "comparison_payments.png",
                 "comparison_mcp.png"):
        assert (out / name).is_file(), name
    doc = json.loads((out / "comparison.json").read_text(encoding="utf-8"))
    lines = (out / "comparison.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "metric,ocm,ocm_v2g,pcm,pcm_v2g"
    by_metric = {line.split(",")[0]: line.split(",")[1:] for line in lines[1:]}
    for i, mech in enumerate(("ocm", "ocm_v2g", "pcm", "pcm_v2g")):
        assert float(by_metric["payment_cost"][i]) == pytest.approx(
            doc["metrics"][mech]["payment_cost"], abs=1e-5)
    # average mcp is the plain per-period mean
    assert float(by_metric["average_mcp"][0]) == pytest.approx(
        sum([25.0, 25.0, 25.0, 10.0, 10.0, 10.0]) / 6.0, abs=1e-6)
    # savings definition
    assert doc["savings"]["v2g"]["absolute"] == pytest.approx(
        doc["metrics"]["ocm_v2g"]["payment_cost"]
        - doc["metrics"]["pcm_v2g"]["payment_cost"], abs=1e-5)
    pct = doc["savings"]["no_v2g"]["percent"]
    assert pct == pytest.approx(
        100.0 * doc["savings"]["no_v2g"]["absolute"]
        / doc["metrics"]["ocm"]["payment_cost"], abs=1e-6)


def test_compare_fleet_free_columns_identical(tmp_path):
    path = write_scenario(tmp_path, three_unit_market())
    out = tmp_path / "cmp"
    assert main(["compare", path, "--out", str(out)]) == EXIT_OK
    lines = (out / "comparison.csv").read_text(encoding="utf-8").splitlines()
    for line in lines[1:]:
        cells = line.split(",")
        if cells[0].startswith("savings"):
            continue
        assert cells[1] == cells[2], line   # ocm == ocm_v2g
        assert cells[3] == cells[4], line   # pcm == pcm_v2g


def test_compare_repeat_byte_identical(tmp_path, peaky_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["compare", peaky_path, "--out", str(out)]) == EXIT_OK
    for name in ("comparison.json", "comparison.csv", "comparison_payments.png",
                 "comparison_mcp.png"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_compare_pcm_never_above_ocm(tmp_path, peaky_path):
    report = cmd_compare(peaky_path, str(tmp_path / "c"))
    assert (report.metrics["pcm"]["payment_cost"]
            <= report.metrics["ocm"]["payment_cost"] + 1e-6)
    assert (report.metrics["pcm_v2g"]["payment_cost"]
            <= report.metrics["ocm_v2g"]["payment_cost"] + 1e-6)


def test_compare_sub_run_failure_propagates(tmp_path):
    s = market([100.0, 160.0],
               [unit("U1", 10.0, 200, periods=2, p0=100.0, ramp=10.0)])
    path = write_scenario(tmp_path, s)
    assert main(["compare", path, "--out", str(tmp_path / "x")]) == EXIT_INFEASIBLE
