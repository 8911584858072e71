import io
import json
import subprocess
import sys

import pytest

from polyar.cli import EXIT_USAGE, run

SAT_DOC = "polyar 1\nvar x 0 1\nvar y 0 1\ncon <= 1 2 0 | 1 0 2 | -0.25 0 0\n"
UNSAT_DOC = "polyar 1\nvar x 0 1\ncon <= 1 2 | 1 0\n"
HYBRID_DOC = """\
polyar 1
var x -2 2
bool b1 b2
pb = 1 : 1 b1 | 1 b2
link b1 iff <= 1 1 | 1 0
link b2 iff <= -1 1 | 1 0
"""

FAST = ["--workers", "1", "--timeout", "60"]


def call(argv):
    out = io.StringIO()
    code = run(argv, out)
    return code, out.getvalue()


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, text in (("sat", SAT_DOC), ("unsat", UNSAT_DOC), ("hybrid", HYBRID_DOC)):
        p = tmp_path / f"{name}.poly"
        p.write_text(text)
        paths[name] = str(p)
    return paths


def test_solve_sat(files, tmp_path):
    res = tmp_path / "res.json"
    code, text = call(["solve", files["sat"], *FAST, "--json-out", str(res)])
    assert code == 0 and text.startswith("sat")
    assert "x = " in text and "y = " in text
    data = json.loads(res.read_text())
    assert set(data) >= {"status", "model", "bool_model", "stats", "config"}
    assert data["status"] == "sat" and set(data["model"]) == {"x", "y"}
    m = data["model"]
    assert m["x"] ** 2 + m["y"] ** 2 <= 0.25 + 1e-9
    assert data["config"]["max_workers"] == 1
    for k in ("iterations", "neg", "pos", "ambig", "subsolver_calls", "wall_ms"):
        assert k in data["stats"]


def test_solve_unsat(files):
    code, text = call(["solve", files["unsat"], *FAST])
    assert code == 1 and text.strip() == "unsat"


def test_json_schema_stable(files, tmp_path):
    keys = []
    for name in ("sat", "unsat"):
        res = tmp_path / f"{name}.json"
        call(["solve", files[name], *FAST, "--json-out", str(res)])
        data = json.loads(res.read_text())
        keys.append((set(data), set(data["stats"]), set(data["config"])))
    assert keys[0] == keys[1]


def test_hybrid_solve_and_verify(files, tmp_path):
    res = tmp_path / "res.json"
    code, text = call(["solve", files["hybrid"], *FAST, "--json-out", str(res)])
    assert code == 0
    data = json.loads(res.read_text())
    assert sum(data["bool_model"].values()) == 1
    code, text = call(["verify", files["hybrid"], str(res)])
    assert code == 0 and text.startswith("pass")


def test_verify_accepts_and_rejects(files, tmp_path):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"x": 0.1, "y": 0.2}))
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"x": 0.9, "y": 0.9}))
    assert call(["verify", files["sat"], str(good)])[0] == 0
    code, text = call(["verify", files["sat"], str(bad)])
    assert code == 1 and text.startswith("fail")


def test_verify_checks_booleans(files, tmp_path):
    both = tmp_path / "both.json"
    both.write_text(json.dumps({"model": {"x": -1.0}, "bool_model": {"b1": True, "b2": True}}))
    code, text = call(["verify", files["hybrid"], str(both)])
    assert code == 1 and "pseudo-Boolean" in text
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"model": {"x": 1.0}, "bool_model": {"b1": True, "b2": False}}))
    assert call(["verify", files["hybrid"], str(wrong)])[0] == 1


@pytest.mark.parametrize("argv", [
    [],
    ["solve"],
    ["frobnicate"],
    ["solve", "/nonexistent/file.poly"],
    ["bench"],
    ["bench", "sof"],
    ["bench", "sof", "--dims", "7", "1", "1", "--bounds", "0", "1"],
    ["solve", "x", "--timeout", "abc"],
])
def test_usage_errors(argv, capsys):
    code, _ = call(argv)
    assert code == EXIT_USAGE
    assert "polyar:" in capsys.readouterr().err


def test_bad_file_reports_position(tmp_path, capsys):
    p = tmp_path / "bad.poly"
    p.write_text("polyar 1\nvar x 0 1\ncon <= 1 q\n")
    assert call(["solve", str(p)])[0] == EXIT_USAGE
    assert "line 3, column 10" in capsys.readouterr().err


def test_bad_model_json(files, tmp_path, capsys):
    p = tmp_path / "m.json"
    p.write_text("{not json")
    assert call(["verify", files["sat"], str(p)])[0] == EXIT_USAGE
    p.write_text(json.dumps({"x": 0.1}))
    assert call(["verify", files["sat"], str(p)])[0] == EXIT_USAGE


def test_timeout_exit_code(tmp_path):
    p = tmp_path / "hard.poly"
    # a 1e-10 band around a quartic surface: no answer in zero seconds
    p.write_text("polyar 1\nvar x -1 1\nvar y -1 1\ncon = 1 4 0 | 1 0 4 | -0.5 0 0\n")
    code, text = call(["solve", str(p), "--workers", "1", "--timeout", "0", "--epsilon", "1e-10"])
    assert code == 3 and text.strip() == "timeout"


def test_bench_sof_write_and_solve(tmp_path):
    inst = tmp_path / "sof.poly"
    res = tmp_path / "sof.json"
    code, text = call(["bench", "sof", "--dims", "2", "1", "1", "--bounds", "-5", "5", "--seed", "1",
                       "--write", str(inst), *FAST, "--json-out", str(res)])
    assert code in (0, 1)
    data = json.loads(res.read_text())
    if code == 0:
        assert data["verify"]["stable"] and data["verify"]["max_real_eig"] < 0
        assert call(["verify", str(inst), str(res)])[0] == 0
    assert data["config"]["presolve_starts"] >= 128


def test_bench_duffing_trace(tmp_path):
    res = tmp_path / "duff.json"
    code, text = call(["bench", "duffing", "--n", "2", "--zeta", "0.3", "--steps", "5", "--seed", "7",
                       *FAST, "--json-out", str(res)])
    assert code == 0
    data = json.loads(res.read_text())
    assert len(data["steps"]) == 5
    assert all(s["verify"]["ok"] for s in data["steps"])
    assert text.count("verify=ok") == 5
    Vs = [s["V"] for s in data["steps"]]
    assert all(a > b for a, b in zip(Vs, Vs[1:]))


def test_bench_switching_write_only(tmp_path):
    p = tmp_path / "sw.poly"
    assert call(["bench", "switching", "--write", str(p), "--no-solve"])[0] == 0
    assert p.read_text().startswith("polyar 1")


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "polyar", "solve", files["unsat"], *FAST],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 1 and proc.stdout.strip() == "unsat"
    proc = subprocess.run([sys.executable, "-m", "polyar", "--bogus"], capture_output=True, text=True, timeout=60)
    assert proc.returncode == EXIT_USAGE
