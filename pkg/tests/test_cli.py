"""End-to-end CLI runs against golden files in tests/golden.

Set RHPROPHET_REGEN_GOLDEN=1 to rewrite the golden files after an intended
change in output.
"""
import csv
import io
import json
import math
import os
import subprocess
import sys
from pathlib import Path

import pytest

from rhprophet.cli import ExperimentConfig, config_from_args, main
from rhprophet.distributions import ValidationError

GOLDEN = Path(__file__).parent / "golden"
REGEN = os.environ.get("RHPROPHET_REGEN_GOLDEN") == "1"

FOUR_POINT = '{"kind": "survival", "survival": [1, 0.5, 0.25, 0.2]}'
CASES = {
    "classify_four_point.json": ["classify", "--horizon", FOUR_POINT],
    "classify_four_point.csv": ["classify", "--horizon", FOUR_POINT, "--classes", "g,ihr,hnbue", "--format", "csv"],
    "eval_single_draw.json": ["eval", "--horizon", '{"kind": "degenerate", "h": 1}',
                              "--value", '{"kind": "uniform", "a": 0, "b": 2}',
                              "--policy", '{"kind": "threshold", "pi": 0}'],
    "eval_toy_both.json": ["eval", "--horizon", '{"kind": "uniform", "lo": 1, "hi": 2}',
                           "--value", '{"kind": "atomic", "atoms": [0, 1], "probs": [0.5, 0.5]}',
                           "--policy", '{"kind": "backward_induction"}', "--method", "both",
                           "--runs", "20000", "--seed", "7"],
    "eval_geometric_fixed_point.csv": ["eval", "--horizon", '{"kind": "geometric", "q": 0.5}',
                                       "--value", '{"kind": "two_point", "x1": 1, "x2": 2, "p": 0.5}',
                                       "--policy", '{"kind": "backward_induction"}', "--format", "csv"],
    "simulate_randomized.json": ["simulate", "--horizon", '{"kind": "geometric", "mean": 2}',
                                 "--value", '{"kind": "two_point", "x1": 1, "x2": 2, "p": 0.3}',
                                 "--policy", '{"kind": "randomized", "pi": 1, "q": 0.5}',
                                 "--runs", "50000", "--seed", "11"],
    "simulate_secretary.csv": ["simulate", "--horizon", '{"kind": "degenerate", "h": 10}',
                               "--value", '{"kind": "uniform"}', "--policy", '{"kind": "secretary", "m": 10}',
                               "--runs", "20000", "--seed", "3", "--format", "csv"],
    "hard_curve.csv": ["hard", "--epsilon", "0.1", "--m-grid", "100,1000", "--format", "csv"],
    "hard_perturbed.csv": ["hard", "--epsilon", "0.1", "--m-grid", "1000", "--perturbed", "--format", "csv"],
    "hard_cv.csv": ["hard", "--epsilon", "0.1", "--m-grid", "1000,100000", "--cv", "--format", "csv"],
    "hard_moments.json": ["hard", "--epsilon", "0.1", "--m-grid", "100,10000", "--moments", "2"],
}


def run_cli(argv, env=None):
    e = dict(os.environ)
    e.pop("PROPHET_SEED", None)
    e.update(env or {})
    return subprocess.run([sys.executable, "-m", "rhprophet", *argv], capture_output=True,
                          text=True, env=e, timeout=300)


def _close(a, b):
    if isinstance(a, float) or isinstance(b, float):
        return math.isclose(float(a), float(b), rel_tol=1e-9, abs_tol=1e-12)
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(_close(a[k], b[k]) for k in a)
    if isinstance(a, list):
        return len(a) == len(b) and all(_close(x, y) for x, y in zip(a, b))
    return a == b


def _parse(name, text):
    if name.endswith(".json"):
        return json.loads(text)
    rows = list(csv.reader(io.StringIO(text)))

    def cell(v):
        try:
            return float(v)
        except ValueError:
            return v
    return [rows[0]] + [[cell(v) for v in r] for r in rows[1:]]


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden(name):
    res = run_cli(CASES[name])
    assert res.returncode == 0, res.stderr
    path = GOLDEN / name
    if REGEN:
        path.write_text(res.stdout, encoding="utf-8")
    expected = path.read_text(encoding="utf-8")
    assert _close(_parse(name, res.stdout), _parse(name, expected))


def test_golden_values_make_sense():
    # spot checks that tie golden files back to known values
    single = json.loads((GOLDEN / "eval_single_draw.json").read_text())["exact"]
    assert single["gambler"] == single["prophet"] == 1.0 and single["ratio"] == 1.0
    toy = json.loads((GOLDEN / "eval_toy_both.json").read_text())
    assert toy["exact"]["gambler"] == 0.625
    assert abs(toy["mc"]["estimate"] - 0.625) <= 3 * toy["mc"]["se"]
    rows = _parse("x.csv", (GOLDEN / "eval_geometric_fixed_point.csv").read_text())
    assert rows[1][1] == pytest.approx(1.5, abs=1e-12) and rows[1][4] == "fixed-point"
    foot = json.loads((GOLDEN / "classify_four_point.json").read_text())
    g = next(r for r in foot["reports"] if r["label"] == "g")
    assert g["verdict"] == "member"


def test_simulate_is_byte_identical():
    argv = CASES["simulate_randomized.json"]
    a, b = run_cli(argv), run_cli(argv + ["--threads", "3"])
    assert a.returncode == 0 and a.stdout == b.stdout


def test_seed_from_environment():
    argv = [a for a in CASES["simulate_randomized.json"] if a not in ("--seed", "11")]
    a = run_cli(argv, {"PROPHET_SEED": "11"})
    assert a.stdout == (GOLDEN / "simulate_randomized.json").read_text()
    b = run_cli(argv, {"PROPHET_SEED": "12"})
    assert b.stdout != a.stdout
    c = run_cli(argv, {"PROPHET_SEED": "x"})
    assert c.returncode == 2


def test_config_file_and_flag_override(tmp_path):
    cfg = {"command": "simulate", "horizon": {"kind": "geometric", "mean": 2},
           "value": {"kind": "two_point", "x1": 1, "x2": 2, "p": 0.3},
           "policy": {"kind": "randomized", "pi": 1, "q": 0.5}, "runs": 50000, "seed": 99}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    res = run_cli(["simulate", "--config", str(path), "--seed", "11"])
    assert res.returncode == 0
    assert res.stdout == (GOLDEN / "simulate_randomized.json").read_text()


def test_output_file(tmp_path):
    out = tmp_path / "r.csv"
    res = run_cli(CASES["hard_curve.csv"] + ["--output", str(out)])
    assert res.returncode == 0 and res.stdout == ""
    assert out.read_text() == (GOLDEN / "hard_curve.csv").read_text()


def test_reproduce_single_check():
    res = run_cli(["reproduce", "--only", "cv_bound", "--emit", "csv"])
    assert res.returncode == 0
    rows = list(csv.reader(io.StringIO(res.stdout)))
    assert rows[0] == ["id", "name", "passed", "reference", "computed", "tolerance",
                       "runtime_s", "budget_s", "detail"]
    assert len(rows) == 2 and rows[1][1] == "cv_bound" and rows[1][2] == "True"
    assert rows[1][4] == "0.770470"
    assert "[PASS]  3 cv_bound" in res.stderr


def test_reproduce_reports_failures_with_exit_1():
    res = run_cli(["reproduce", "--only", "hard_cv_limit"])
    assert res.returncode == 1
    assert json.loads(res.stdout)["passed"] is False


@pytest.mark.parametrize("argv", [
    ["eval", "--horizon", '{"kind": "geometric", "q": 0.5, "x": 1}', "--value", '{"kind": "point", "c": 1}',
     "--policy", '{"kind": "threshold", "pi": 0}'],
    ["eval", "--horizon", "{bad json"],
    ["eval", "--value", '{"kind": "point", "c": 1}', "--policy", '{"kind": "threshold", "pi": 0}'],
    ["reproduce", "--only", "no_such_check"],
    ["hard", "--epsilon", "0", "--m-grid", "10"],
    ["simulate", "--horizon", '{"kind": "degenerate", "h": 2}', "--value", '{"kind": "uniform"}',
     "--policy", '{"kind": "secretary"}', "--runs", "10"],
    ["frobnicate"],
])
def test_validation_exit_code(argv):
    res = run_cli(argv)
    assert res.returncode == 2


def test_offending_key_is_named(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"command": "hard", "epsilonn": 0.1}))
    res = run_cli(["hard", "--config", str(path)])
    assert res.returncode == 2 and "config.epsilonn" in res.stderr
    res = run_cli(CASES["eval_single_draw.json"][:2] + ['{"kind": "degenerate", "hh": 1}'] + CASES["eval_single_draw.json"][3:])
    assert res.returncode == 2 and "horizon.degenerate" in res.stderr


def test_numeric_failure_exit_code():
    res = run_cli(["hard", "--epsilon", "0.1", "--m-grid", "1000000", "--moments", "200"])
    assert res.returncode == 3


def test_config_round_trip():
    cfg = config_from_args(["hard", "--epsilon", "0.2", "--m-grid", "10,100", "--cv"])
    again = ExperimentConfig.from_json(json.loads(json.dumps(cfg.to_json())))
    assert again == cfg and again.to_json() == cfg.to_json()
    assert ExperimentConfig.from_json(ExperimentConfig().to_json()) == ExperimentConfig()
    with pytest.raises(ValidationError):
        ExperimentConfig.from_json({"runs": 0})


def test_main_in_process(capsys):
    assert main(["hard", "--epsilon", "0.5", "--m-grid", "50", "--format", "csv"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "m,Z_m,E_H,E_MH,pi_bar,gambler,ratio"
