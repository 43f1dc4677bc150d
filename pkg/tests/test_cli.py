import csv
import io
import json

import pytest

from fracperc import cli
from fracperc.acceptance import CriterionResult
from fracperc.treeflow import FlowSandwichReport, tree_to_json, TreeNode, TreeSpec


def run_cli(capsys, argv):
    rc = cli.main(argv)
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_version_exits_zero(capsys):
    with pytest.raises(SystemExit) as err:
        cli.main(["--version"])
    assert err.value.code == 0
    assert "fracperc" in capsys.readouterr().out


def test_no_command_is_a_usage_error():
    with pytest.raises(SystemExit) as err:
        cli.main([])
    assert err.value.code == 2


def test_missing_seed_is_a_usage_error():
    with pytest.raises(SystemExit) as err:
        cli.main(["area", "--r", "2", "--schedule", "const:0.9"])
    assert err.value.code == 2


def test_bad_schedule_returns_2(capsys):
    rc, _, err = run_cli(capsys, ["area", "--r", "2", "--schedule", "bogus", "--seed", "1"])
    assert rc == 2
    assert "error:" in err


def test_bad_zdist_returns_2(capsys):
    rc, _, err = run_cli(capsys, ["lemma", "--zdist", "gamma:2", "--theta", "1", "--seed", "1"])
    assert rc == 2
    assert "error:" in err


def test_bound_harmonic_value(capsys):
    argv = ["bound", "--n", "2", "--r", "8", "--k", "1", "--schedule", "harmonic", "--kind", "contour"]
    rc, out, _ = run_cli(capsys, argv)
    assert rc == 0
    payload = json.loads(out)
    (rec,) = payload["bounds"]
    assert rec["kind"] == "contour"
    assert rec["bound"] == pytest.approx(0.45511961331341866)
    assert not rec["infinite"]

    # --N is an accepted spelling of --n.
    rc2, out2, _ = run_cli(capsys, ["bound", "--N", "2", "--r", "8", "--k", "1",
                                    "--schedule", "harmonic", "--kind", "contour"])
    assert rc2 == 0 and json.loads(out2) == payload


def test_bound_constant_schedule_is_infinite(capsys):
    rc, out, _ = run_cli(capsys, ["bound", "--r", "4", "--k", "1", "--schedule", "const:1",
                                  "--kind", "contour", "--interval", "unit"])
    assert rc == 0
    (rec,) = json.loads(out)["bounds"]
    assert rec["bound"] is None
    assert rec["infinite"] is True
    assert rec["interval"] == "full"


def test_bound_both_kinds(capsys):
    rc, out, _ = run_cli(capsys, ["bound", "--r", "3", "--k", "1", "--schedule", "const:0.9"])
    assert rc == 0
    kinds = [rec["kind"] for rec in json.loads(out)["bounds"]]
    assert kinds == ["contour", "crossing"]


def test_area_with_no_vacancies(capsys):
    rc, out, _ = run_cli(capsys, ["area", "--r", "2", "--schedule", "const:1",
                                  "--trials", "50", "--seed", "3"])
    assert rc == 0
    payload = json.loads(out)
    assert payload["estimate"] == 1.0
    assert payload["se"] == 0.0
    assert payload["trials"] == 50
    assert payload["params"]["schedule"] == "const:1.0"


def test_area_csv_format(capsys):
    rc, out, _ = run_cli(capsys, ["area", "--r", "2", "--schedule", "const:0.9",
                                  "--trials", "20", "--seed", "3", "--format", "csv"])
    assert rc == 0
    header, row = list(csv.reader(io.StringIO(out)))
    assert "experiment_id" in header
    assert "estimate" in header
    assert "params.n" in header
    assert len(header) == len(row)
    assert row[header.index("experiment_id")] == "area"


def test_out_writes_file_not_stdout(tmp_path, capsys):
    dest = tmp_path / "report.json"
    rc, out, _ = run_cli(capsys, ["area", "--r", "2", "--schedule", "const:0.9",
                                  "--trials", "10", "--seed", "1", "--out", str(dest)])
    assert rc == 0
    assert out == ""
    assert json.loads(dest.read_text())["experiment_id"] == "area"


def test_crossing_estimate_shape(capsys):
    rc, out, _ = run_cli(capsys, ["crossing", "--r", "2", "--schedule", "const:0.7",
                                  "--trials", "40", "--seed", "5"])
    assert rc == 0
    payload = json.loads(out)
    assert 0.0 <= payload["p_hat"] <= 1.0
    assert payload["hits"] <= payload["trials"] == 40


def test_contour_span_unit_alias(capsys):
    rc, out, _ = run_cli(capsys, ["contour", "--r", "3", "--k", "1", "--schedule", "const:0.95",
                                  "--trials", "10", "--seed", "2", "--span", "unit"])
    assert rc == 0
    payload = json.loads(out)
    assert payload["params"]["span"] == "full"
    assert payload["passed"] is True


def test_lemma_point_mass(capsys):
    rc, out, _ = run_cli(capsys, ["lemma", "--zdist", "point:1.0", "--theta", "1.0", "--seed", "1"])
    assert rc == 0
    payload = json.loads(out)
    assert payload["passed"] is True
    assert payload["seed"] == 1


def test_treeflow_command(tmp_path, capsys):
    tree = TreeSpec(children=(TreeNode(2.0, (TreeNode(2.0),)),))
    path = tmp_path / "tree.json"
    path.write_text(json.dumps(tree_to_json(tree)))
    rc, out, _ = run_cli(capsys, ["treeflow", "--tree", str(path), "--trials", "2000", "--seed", "1"])
    assert rc == 0
    payload = json.loads(out)
    assert payload["passed"] is True
    assert payload["tree"] == str(path)

    rc, _, err = run_cli(capsys, ["treeflow", "--tree", str(tmp_path / "nope.json"),
                                  "--trials", "10", "--seed", "1"])
    assert rc == 2 and "error:" in err


def test_treeflow_failing_report_exits_1(tmp_path, capsys, monkeypatch):
    tree = TreeSpec(children=(TreeNode(2.0),))
    path = tmp_path / "tree.json"
    path.write_text(json.dumps(tree_to_json(tree)))
    fake = FlowSandwichReport(conductance=1.0, flow_mean=9.0, flow_se=0.01,
                              trials=10, passed_lower=True, passed_upper=False)
    monkeypatch.setattr(cli, "verify_flow_sandwich", lambda *a, **k: fake)
    rc, out, _ = run_cli(capsys, ["treeflow", "--tree", str(path), "--trials", "10", "--seed", "1"])
    assert rc == 1
    assert json.loads(out)["passed"] is False


def test_blocking_command(capsys):
    rc, out, _ = run_cli(capsys, ["blocking", "--r", "4", "--k", "2", "--band-index", "1",
                                  "--schedule", "harmonic", "--seed", "3"])
    assert rc == 0
    payload = json.loads(out)
    assert isinstance(payload["found"], bool)
    assert payload["seed"] == 3 and payload["trial"] == 0
    if payload["found"]:
        assert payload["crossing_from_band"] is False


def test_render_is_byte_stable(tmp_path, capsys):
    argv = ["render", "--seed", "9", "--r", "3", "--schedule", "const:0.8", "--cell-px", "2"]
    a, b = tmp_path / "a.ppm", tmp_path / "b.ppm"
    assert run_cli(capsys, argv + ["--out", str(a)])[0] == 0
    assert run_cli(capsys, argv + ["--out", str(b)])[0] == 0
    data = a.read_bytes()
    assert data == b.read_bytes()
    # 2**3 cells of 2 px on each axis.
    assert data.startswith(b"P6\n16 16\n255\n")
    assert len(data) == len(b"P6\n16 16\n255\n") + 16 * 16 * 3

    c = tmp_path / "c.ppm"
    rc, out, _ = run_cli(capsys, argv + ["--overlay", "crossing", "--out", str(c)])
    assert rc == 0
    assert c.read_bytes().startswith(b"P6\n16 16\n255\n")
    assert "wrote" in out


def test_verify_all_unknown_key(capsys):
    rc, _, err = run_cli(capsys, ["verify-all", "--seed", "1", "--only", "nope"])
    assert rc == 2
    assert "unknown criteria" in err


def test_verify_all_single_quick_criterion(tmp_path, capsys):
    report = tmp_path / "report.jsonl"
    argv = ["verify-all", "--seed", "7", "--quick", "--only", "truncation-bound",
            "--report", str(report)]
    rc, out, _ = run_cli(capsys, argv)
    assert rc == 0
    assert "[PASS] truncation-bound" in out
    assert "1/1 criteria passed" in out

    lines = report.read_text().splitlines()
    assert len(lines) == 1
    entry = json.loads(lines[0])
    assert entry["key"] == "truncation-bound" and entry["passed"] is True

    # The report file appends across runs.
    assert run_cli(capsys, argv)[0] == 0
    assert len(report.read_text().splitlines()) == 2


def test_verify_all_failure_exits_1(capsys, monkeypatch):
    fake = [CriterionResult(key="area-law", title="t", passed=False,
                            wall_time_s=0.0, details={})]
    monkeypatch.setattr(cli, "run_all", lambda *a, **k: fake)
    rc, out, _ = run_cli(capsys, ["verify-all", "--seed", "1"])
    assert rc == 1
    assert "0/1 criteria passed" in out
    assert "failed: area-law" in out
