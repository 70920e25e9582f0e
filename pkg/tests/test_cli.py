import csv
import json
import math
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from expspider.cli import dumps, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _solve(name, out, *extra):
    code = main(["solve", str(CONFIGS / name), "--out", str(out), *extra])
    dirs = sorted(Path(out).iterdir())
    return code, dirs[-1]


@pytest.fixture(scope="module")
def pi_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    code, run_dir = _solve("pi_i.spider.json", out)
    assert code == 0
    return run_dir


def test_solve_pi(pi_dir):
    doc = json.loads((pi_dir / "result.json").read_text())
    assert doc["status"] == "converged" and doc["schema_version"] == 1
    assert abs(doc["lambda_im"] - math.pi) < 1e-12 and abs(doc["lambda_re"]) < 1e-12
    assert doc["eta"] == -1 and doc["eta_invariant"] and doc["verify"]["passed"]
    assert doc["eta_claim"] == -1 and doc["eta_matches_claim"] is True
    assert doc["bound_check"]["holds"]
    assert pi_dir.name.startswith("pi_i-")
    rows = list(csv.reader(open(pi_dir / "trace.csv")))
    assert rows[0][:3] == ["n", "lambda_re", "lambda_im"] and len(rows) == doc["iterations"] + 1


def test_float_format():
    assert dumps({"x": 0.1}) == '{\n  "x": 1.0000000000000001e-01\n}'
    assert json.loads(dumps([math.inf, math.nan, 1.5])) == [None, None, 1.5]
    assert "1.5000000000000000e+00" in dumps([1.5])


def test_result_deterministic(tmp_path, pi_dir):
    _, second = _solve("pi_i.spider.json", tmp_path)
    assert (second / "result.json").read_bytes() == (pi_dir / "result.json").read_bytes()
    assert second.name != pi_dir.name or second.parent != pi_dir.parent


def test_inconsistent_diverges(tmp_path, capsys):
    code, run_dir = _solve("inconsistent.spider.json", tmp_path)
    assert code == 2
    doc = json.loads((run_dir / "result.json").read_text())
    assert doc["status"] != "converged"
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "error" in err


def test_malformed_is_usage_error(tmp_path, capsys):
    assert main(["solve", str(CONFIGS / "malformed.spider.json"), "--out", str(tmp_path)]) == 64
    err = capsys.readouterr().err
    assert "line" in err


def test_missing_config(tmp_path):
    assert main(["solve", str(tmp_path / "nope.spider.json"), "--out", str(tmp_path)]) == 66


def test_bad_flags_exit_64():
    with pytest.raises(SystemExit) as info:
        main(["solve"])
    assert info.value.code == 64


def test_verify(pi_dir, tmp_path):
    assert main(["verify", str(pi_dir)]) == 0
    assert main(["verify", str(pi_dir / "result.json")]) == 0
    doc = json.loads((pi_dir / "result.json").read_text())
    doc["lambda_re"] = 0.01
    tampered = tmp_path / "result.json"
    tampered.write_text(json.dumps(doc))
    assert main(["verify", str(tampered)]) == 1
    assert main(["verify", str(tmp_path / "missing.json")]) == 66


def test_qd_analyze(pi_dir, tmp_path):
    out = tmp_path / "qd"
    assert main(["qd-analyze", str(pi_dir), "-M", "32", "--grid", "16", "--out", str(out)]) == 0
    rep = json.loads((out / "qd_report.json").read_text())
    assert rep["entries"] and all(e["ratio"] < 1 for e in rep["entries"])
    assert rep["M"] == 32 and rep["N"] == 16
    assert main(["qd-analyze", str(pi_dir), "--branches", "0"]) == 64


def test_qd_analyze_degenerate(tmp_path):
    code, run_dir = _solve("degenerate.spider.json", tmp_path)
    assert code == 0
    assert main(["qd-analyze", str(run_dir)]) == 0
    assert json.loads((run_dir / "qd_report.json").read_text())["entries"] == []


def test_trace_export(pi_dir, tmp_path):
    assert main(["trace-export", str(pi_dir)]) == 0
    doc = json.loads((pi_dir / "result.json").read_text())
    rows = list(csv.DictReader(open(pi_dir / "points.csv")))
    names = list(doc["positions"])
    assert len(rows) == doc["iterations"] * len(names)
    final = {r["index"]: complex(float(r["re"]), float(r["im"])) for r in rows[-len(names):]}
    for k, (re, im) in doc["positions"].items():
        assert final[k] == complex(re, im)
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["trace-export", str(empty)]) == 66


def test_trajectory_file(pi_dir):
    data = np.load(pi_dir / "trajectory.npz")
    assert data["positions"].shape == (len(data["steps"]), len(data["names"]))


def test_batch_parallel(tmp_path, capsys):
    cfgs = [str(CONFIGS / n) for n in ("pi_i.spider.json", "degenerate.spider.json", "p1_two_cycle.spider.json")]
    assert main(["batch", *cfgs, "--jobs", "2", "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3 and all(l.startswith("0\t") for l in lines)
    assert len(list(tmp_path.iterdir())) == 3


def test_batch_worst_code(tmp_path):
    cfgs = [str(CONFIGS / "pi_i.spider.json"), str(CONFIGS / "inconsistent.spider.json")]
    assert main(["batch", *cfgs, "--out", str(tmp_path)]) == 2


def test_converged_configs_pass_verify(tmp_path):
    for cfg in sorted(CONFIGS.glob("*.spider.json")):
        if cfg.name in ("malformed.spider.json", "inconsistent.spider.json"):
            continue
        out = tmp_path / cfg.stem
        code, run_dir = _solve(cfg.name, out)
        doc = json.loads((run_dir / "result.json").read_text())
        if doc["status"] == "converged":
            assert main(["verify", str(run_dir)]) == 0, cfg.name


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "expspider", "verify", str(tmp_path / "x.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 66
    assert json.loads(proc.stderr.strip())["error"]
    assert shutil.which("expspider") is not None
