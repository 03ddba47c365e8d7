from __future__ import annotations

import json
import math

import pytest

from msrpt import verify
from msrpt.analysis.audits import BoundReport
from msrpt.cli import main
from msrpt.core_model import Instance, Job
from msrpt.workload_gen import load_instance, save_instance


def _out(capsys):
    return capsys.readouterr().out.strip()


def test_generate_and_simulate(tmp_path, capsys):
    inst = tmp_path / "i.json"
    assert main(["generate", "--dist", "exp:mu=1", "--rho", "0.5", "--jobs", "50", "--machines", "2", "--seed", "3", "-o", str(inst)]) == 0
    assert len(load_instance(inst).jobs) == 50
    capsys.readouterr()
    assert main(["simulate", "--instance", str(inst), "--policy", "m-srpt", "--out-dir", str(tmp_path / "s"), "--y-grid", "1,2"]) == 0
    assert _out(capsys).startswith("mean_flow ")
    assert (tmp_path / "s" / "jobs.csv").exists() and (tmp_path / "s" / "trace.csv").exists()


def test_generate_is_seeded(tmp_path):
    for name in ("a", "b"):
        assert main(["generate", "--lambda", "0.7", "--jobs", "30", "--seed", "5", "--out", str(tmp_path / f"{name}.json")]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_simulate_brute(tmp_path, capsys):
    inst = tmp_path / "i.json"
    save_instance(Instance(1, (Job.from_sizes(0, 0.0, [3.0]), Job.from_sizes(1, 1.0, [1.0]))), inst)
    assert main(["simulate", "--instance", str(inst), "--policy", "brute"]) == 0
    assert float(_out(capsys).split()[1]) == 5.0


def test_simulate_brute_rejects_fractional(tmp_path):
    inst = tmp_path / "i.json"
    main(["generate", "--rho", "0.5", "--jobs", "4", "--seed", "1", "-o", str(inst)])
    assert main(["simulate", "--instance", str(inst), "--policy", "brute"]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["generate", "--dist", "pareto:xmin=1,alpha=0.5", "--rho", "0.5"],
        ["generate"],
        ["simulate", "--instance", "/nonexistent/i.json"],
        ["bounds", "--formula", "cr", "--params", "alpha=0.5,beta=1"],
        ["bounds", "--formula", "busy-period", "--params", "w=1"],
        ["bounds", "--formula", "exp-max", "--params", "n=1.5"],
        ["plot", "--summary", "/nonexistent/summary.csv"],
        ["sweep"],
    ],
)
def test_validation_errors_exit_1(argv, tmp_path):
    assert main(argv + ["--out-dir", str(tmp_path)]) == 1


@pytest.mark.parametrize(
    "params, formula, expected",
    [
        ("alpha=8,beta=2", "cr", 24.0),
        ("n=2,mu=1", "exp-max", 1.5),
        ("w=1,rho=0.5", "busy-period", 2.0),
        ("dist=exp:mu=1,lam=0.5,y=1", "rho-of-y", 0.5 * (1 - 2 / math.e)),
    ],
)
def test_bounds_values(params, formula, expected, capsys):
    assert main(["bounds", "--formula", formula, "--params", params]) == 0
    assert float(_out(capsys)) == pytest.approx(expected, abs=1e-6)


def test_bounds_nested_dist(capsys):
    assert main(["bounds", "--formula", "srpt-growth", "--params", "dist=uniform:a=1;b=2,rho=0.5"]) == 0
    assert float(_out(capsys)) > 0
    assert main(["bounds", "--formula", "mm1-srpt", "--params", "rho=0.9"]) == 0
    lo, hi = map(float, _out(capsys).split())
    assert lo < hi


def test_verify_suite_ok(tmp_path, capsys):
    assert main(["verify", "--suite", "charging", "--instances", "3", "--max-jobs", "20", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "verify_charging.csv").read_text().startswith("name,")
    assert "0 violations" in _out(capsys)


def test_verify_violation_exit_3(tmp_path, monkeypatch, capsys):
    monkeypatch.setitem(verify.SUITES, "busy", lambda **_: [BoundReport("fake", {"x": 1}, 1.0, 2.0)])
    assert main(["verify", "--suite", "busy", "--out-dir", str(tmp_path)]) == 3
    assert "VIOLATION fake" in _out(capsys)


def test_runtime_error_exit_2(tmp_path, monkeypatch):
    def boom(**_):
        raise RuntimeError("kaput")

    monkeypatch.setitem(verify.SUITES, "busy", boom)
    assert main(["verify", "--suite", "busy", "--out-dir", str(tmp_path)]) == 2


def test_sweep_and_plot(tmp_path, capsys):
    cfg = {"distribution": "exp:mu=1", "machines": 2, "policies": ["m-srpt", "srpt1n"], "rho": [0.5, 0.7],
           "replications": 2, "jobs": 1000, "split": "fixed:k=2"}
    p = tmp_path / "exp.json"
    p.write_text(json.dumps(cfg))
    out = tmp_path / "o"
    assert main(["sweep", "--config", str(p), "--out-dir", str(out), "--seed", "4"]) == 0
    assert len((out / "results.csv").read_text().splitlines()) == 1 + 2 * 2 * 2
    assert main(["plot", "--summary", str(out / "summary.csv"), "--out-dir", str(tmp_path / "plots")]) == 0
    assert len((tmp_path / "plots" / "ratio_vs_rho.csv").read_text().splitlines()) == 3


def test_sweep_unstable_exit_1(tmp_path):
    p = tmp_path / "exp.json"
    p.write_text(json.dumps({"rho": [1.05], "jobs": 100, "replications": 1}))
    assert main(["sweep", "--config", str(p), "--out-dir", str(tmp_path)]) == 1


def test_config_overrides_flags(tmp_path):
    cfg = tmp_path / "g.json"
    cfg.write_text(json.dumps({"jobs": 7, "seed": 2, "rho": 0.3}))
    out = tmp_path / "i.json"
    assert main(["generate", "--jobs", "100", "--rho", "0.9", "--config", str(cfg), "-o", str(out)]) == 0
    assert len(load_instance(out).jobs) == 7


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "g.json"
    cfg.write_text(json.dumps({"nope": 1}))
    assert main(["generate", "--rho", "0.5", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 1


def test_generate_allows_overload(tmp_path):
    # stability is the caller's business when sampling a finite instance
    assert main(["generate", "--rho", "1.05", "--jobs", "20", "-o", str(tmp_path / "i.json")]) == 0
