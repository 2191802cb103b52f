import json
import shutil

import pytest

from h2grid import cli
from h2grid.cases import tutorial_case
from h2grid.io import (BundleError, bundled_case, load_bundle, load_solution, save_bundle, save_solution,
                       write_schedule)


@pytest.fixture
def bundle(tmp_path):
    dst = tmp_path / "case"
    shutil.copytree(bundled_case(), dst)
    return dst


def test_bundled_case_inventory(case33):
    assert len(case33.network.nodes) == 33
    assert len(case33.tn.buses) == 24
    assert (len(case33.fleet.dgs), len(case33.fleet.pvs), len(case33.fleet.h2)) == (3, 6, 3)
    assert case33.timeline.horizon_hours == 168


def test_roundtrip(tmp_path, case33):
    save_bundle(case33, tmp_path / "copy")
    assert load_bundle(tmp_path / "copy") == case33


def test_tutorial_roundtrip(tmp_path):
    sc = tutorial_case()
    save_bundle(sc, tmp_path / "t")
    back = load_bundle(tmp_path / "t")
    assert back.network == sc.network and back.fleet == sc.fleet


def test_truncated_series_named(bundle):
    lines = (bundle / "fcev_demand.csv").read_text().splitlines()
    (bundle / "fcev_demand.csv").write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(BundleError, match="167 of 168") as e:
        load_bundle(bundle)
    assert e.value.file == "fcev_demand.csv"


def test_unit_mismatch(bundle):
    p = bundle / "fcev_demand.csv"
    text = p.read_text().replace("[kg]", "[lb]", 1)
    p.write_text(text)
    with pytest.raises(BundleError, match="unit mismatch") as e:
        load_bundle(bundle)
    assert e.value.line == 1 and e.value.column == 2


def test_bad_cell_location(bundle):
    p = bundle / "signals.csv"
    rows = p.read_text().splitlines()
    cells = rows[3].split(",")
    cells[2] = "abc"
    rows[3] = ",".join(cells)
    p.write_text("\n".join(rows) + "\n")
    with pytest.raises(BundleError) as e:
        load_bundle(bundle)
    assert (e.value.line, e.value.column) == (4, 3)


def test_negative_resistance_in_bundle(bundle):
    p = bundle / "dist_network.json"
    d = json.loads(p.read_text())
    d["lines"][4]["resistance"] = -0.01
    p.write_text(json.dumps(d))
    with pytest.raises(BundleError, match="negative impedance"):
        load_bundle(bundle)


def test_solution_bytes_deterministic(tmp_path, tutorial_solved):
    _, _, sol = tutorial_solved
    a = save_solution(sol, tmp_path / "a.json").read_bytes()
    b = save_solution(load_solution(tmp_path / "a.json"), tmp_path / "b.json").read_bytes()
    assert a == b
    write_schedule(sol, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0].startswith("hour,")


def test_cli_validate_corrupt_bundle(bundle, capsys):
    (bundle / "pv.csv").write_text("hour,PV1 [MW]\n1,0.1\n")
    assert cli.main(["validate", str(bundle)]) == 2
    rec = json.loads(capsys.readouterr().err)
    assert rec["error"] == "bundle" and rec["file"] == "pv.csv"


def test_cli_unknown_flag(capsys):
    assert cli.main(["roll", "tutorial", "--nope"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "usage"


def test_cli_solve_report_deterministic(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "a"))
    assert cli.main(["solve", "tutorial"]) == 0
    assert cli.main(["solve", "tutorial", "--out", str(tmp_path / "b")]) == 0
    run_a, run_b = tmp_path / "a" / "solve-tutorial", tmp_path / "b" / "solve-tutorial"
    for name in ("solution.json", "schedule.csv", "summary.json"):
        assert (run_a / name).read_bytes() == (run_b / name).read_bytes()
    assert cli.main(["report", str(run_a), "--tables", "h2cost,dlmp"]) == 0
    assert (run_a / "dlmp.csv").exists() and (run_a / "h2cost.csv").exists()
    assert cli.main(["validate", "tutorial", "--solution", str(run_a)]) == 0
    assert cli.main(["report", str(run_a), "--tables", "bogus"]) == 2
