from __future__ import annotations

import csv
import json

import pytest

from msrpt.analysis.heavy_traffic import RATIO_FIELDS, StabilityError
from msrpt.plotting import PLOT_FIELDS, SchemaError, emit_plot_data
from msrpt.sweep import RESULT_FIELDS, SUMMARY_FIELDS, ConfigError, ExperimentConfig, fmt, run_sweep


def _cfg(**kw):
    base = dict(distribution="exp:mu=1", machines=1, policies=["srpt1n"], rho=[0.5], replications=2, jobs=2000, seed=7)
    base.update(kw)
    return ExperimentConfig(**base)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_single_point_sweep(tmp_path):
    res = run_sweep(_cfg(), tmp_path)
    assert len(_rows(res.paths["results"])) == 2
    assert len(_rows(res.paths["summary"])) == 1
    assert res.n_failed == 0
    assert _rows(res.paths["summary"])[0]["reps"] == "2"


def test_golden_headers(tmp_path):
    res = run_sweep(_cfg(policies=["m-srpt", "srpt1n"], machines=2), tmp_path)
    for key, fields in (("results", RESULT_FIELDS), ("summary", SUMMARY_FIELDS), ("ratio", RATIO_FIELDS)):
        assert res.paths[key].read_text().splitlines()[0] == ",".join(fields)
    assert res.paths["results"].read_text().splitlines()[0] == (
        "policy,rho,seed,n_jobs,mean_flow,total_flow,p50_flow,p99_flow,mean_busy_period,wallclock_ms,error"
    )
    assert b"\r\n" not in res.paths["results"].read_bytes()


def test_byte_identical_rerun_and_threads(tmp_path):
    cfg = _cfg(policies=["m-srpt", "srpt1n", "fcfs"], machines=2, rho=[0.5, 0.8], replications=3,
               split="fixed:k=2", nonpreemptive_fraction=0.5, eta_cap=1.0)
    a = run_sweep(cfg, tmp_path / "a")
    b = run_sweep(cfg, tmp_path / "b")
    cfg.threads = 3
    c = run_sweep(cfg, tmp_path / "c")
    for key in ("results", "summary", "ratio"):
        assert a.paths[key].read_bytes() == b.paths[key].read_bytes() == c.paths[key].read_bytes()


def test_unstable_load_rejected(tmp_path):
    with pytest.raises(StabilityError):
        run_sweep(_cfg(rho=[0.5, 1.05]), tmp_path)
    assert not (tmp_path / "results.csv").exists()


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        _cfg(rho=None).validate()
    with pytest.raises(ConfigError):
        _cfg(lam=[0.5]).validate()
    with pytest.raises(ConfigError):
        _cfg(policies=["brute"]).validate()
    with pytest.raises(ValueError):
        _cfg(distribution="pareto:xmin=1,alpha=0.5").validate()


def test_config_json_roundtrip(tmp_path):
    cfg = _cfg(rho=[0.1, 0.3])
    p = tmp_path / "c.json"
    p.write_text(cfg.to_json())
    assert ExperimentConfig.load(p) == cfg


def test_lam_grid(tmp_path):
    res = run_sweep(_cfg(rho=None, lam=[0.25], machines=2), tmp_path)
    assert float(res.summary[0]["rho"]) == pytest.approx(0.125)


def test_fmt():
    assert fmt(0.1) == "0.1" and fmt(None) == "" and fmt(float("nan")) == "" and fmt(3) == "3" and fmt(True) == "true"


@pytest.fixture(scope="module")
def four_point(tmp_path_factory):
    d = tmp_path_factory.mktemp("sweep4")
    cfg = _cfg(distribution="uniform:a=1,b=2", split="fixed:k=2", nonpreemptive_fraction=0.5, eta_cap=1.0,
               machines=2, policies=["m-srpt", "srpt1n"], rho=[0.5, 0.6, 0.7, 0.8], replications=4, jobs=3000)
    return run_sweep(cfg, d)


def test_plot_four_points(four_point, tmp_path):
    paths = emit_plot_data(four_point.paths["summary"], tmp_path)
    ratio = _rows(paths["ratio_vs_rho"])
    assert len(ratio) == 4
    assert list(ratio[0]) == PLOT_FIELDS
    for r in ratio:
        assert float(r["ci_lo"]) <= float(r["y"]) <= float(r["ci_hi"])
        # same-sample SRPT on the fast server lower-bounds M-SRPT
        assert float(r["y"]) >= 1.0 - (float(r["ci_hi"]) - float(r["ci_lo"]))
    assert len(_rows(paths["mean_flow_vs_inv_load"])) == 8
    assert len(_rows(paths["gap_vs_log_load"])) == 4
    assert paths["ratio_vs_rho_svg"].read_text().lstrip().startswith("<?xml")


def test_plot_deterministic(four_point, tmp_path):
    a = emit_plot_data(four_point.paths["summary"], tmp_path / "a")
    b = emit_plot_data(four_point.paths["summary"], tmp_path / "b")
    for k in a:
        assert a[k].read_bytes() == b[k].read_bytes()


def test_plot_empty_summary(tmp_path, caplog):
    s = tmp_path / "summary.csv"
    s.write_text("")
    paths = emit_plot_data(s, tmp_path / "out")
    assert all(p.read_text() == "" for p in paths.values())
    assert "no rows" in caplog.text


def test_plot_missing_column(tmp_path):
    s = tmp_path / "summary.csv"
    s.write_text("policy,rho,ci_lo,ci_hi\nsrpt1n,0.5,1,2\n")
    with pytest.raises(SchemaError, match="mean_flow"):
        emit_plot_data(s, tmp_path / "out")


def test_plot_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        emit_plot_data(tmp_path / "nope.csv", tmp_path)
