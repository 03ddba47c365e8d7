"""Experiment configs and the replication sweep that writes results CSVs."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import rng
from .analysis.heavy_traffic import WARMUP, RATIO_FIELDS, StabilityError, mean_ci, ratio_point
from .distributions import SizeDistribution, parse_distribution
from .fastsim import simulate_arrays
from .schedulers import PolicyKind, PolicySpec, parse_policy
from .workload_gen import TaskSplit, lam_for_rho, parse_split, rho as load_of, sample_arrays


class ConfigError(ValueError):
    pass


RESULT_FIELDS = [
    "policy", "rho", "seed", "n_jobs", "mean_flow", "total_flow",
    "p50_flow", "p99_flow", "mean_busy_period", "wallclock_ms", "error",
]
SUMMARY_FIELDS = [
    "policy", "rho", "lam", "reps", "n_failed", "mean_flow", "ci_lo", "ci_hi",
    "p99_flow", "mean_busy_period",
]


@dataclass
class ExperimentConfig:
    """Everything that determines a sweep's output files."""

    name: str = "sweep"
    distribution: str = "exp:mu=1"
    split: str = "single"
    nonpreemptive_fraction: float = 0.0
    eta_cap: float | None = None
    machines: int = 1
    parallel_tasks: bool = False
    policies: list[str] = field(default_factory=lambda: ["m-srpt", "srpt1n"])
    rho: list[float] | None = None
    lam: list[float] | None = None
    replications: int = 10
    jobs: int = 10000
    seed: int = 0
    warmup: float = WARMUP
    y_grid: list[float] = field(default_factory=list)
    out_dir: str = "out"
    threads: int = 1
    record_wallclock: bool = False

    # --- derived ---------------------------------------------------------
    def dist(self) -> SizeDistribution:
        return parse_distribution(self.distribution)

    def task_split(self) -> TaskSplit:
        return parse_split(self.split, self.nonpreemptive_fraction, self.eta_cap)

    def policy_specs(self) -> list[PolicySpec]:
        return [parse_policy(p) for p in self.policies]

    def loads(self) -> list[tuple[float, float]]:
        """(rho, lambda) pairs in config order."""
        d = self.dist()
        if self.lam is not None:
            return [(load_of(d, l, self.machines), float(l)) for l in self.lam]
        return [(float(r), lam_for_rho(d, r, self.machines)) for r in self.rho]

    def validate(self) -> "ExperimentConfig":
        if (self.rho is None) == (self.lam is None):
            raise ConfigError("give exactly one of 'rho' or 'lam'")
        grid = self.rho if self.rho is not None else self.lam
        if not grid:
            raise ConfigError("the load grid is empty")
        if not isinstance(self.machines, int) or self.machines < 1:
            raise ConfigError(f"machines must be a positive integer (got {self.machines!r})")
        if not isinstance(self.replications, int) or self.replications < 1:
            raise ConfigError(f"replications must be a positive integer (got {self.replications!r})")
        if not isinstance(self.jobs, int) or self.jobs < 2:
            raise ConfigError(f"jobs must be an integer >= 2 (got {self.jobs!r})")
        if not 0.0 <= self.warmup < 1.0:
            raise ConfigError(f"warmup must lie in [0, 1) (got {self.warmup!r})")
        if not self.policies:
            raise ConfigError("no policies given")
        for p in self.policy_specs():
            if p.kind is PolicyKind.BRUTE_OPT:
                raise ConfigError("the brute-force oracle cannot be used in a sweep")
        self.task_split()
        for r, l in self.loads():
            if not (l > 0 and math.isfinite(l)):
                raise ConfigError(f"arrival rate must be positive (got {l!r})")
            if not r < 1.0:
                raise StabilityError(f"load rho={r!r} >= 1: the system is unstable")
            if not r > 0.0:
                raise ConfigError(f"load rho must be positive (got {r!r})")
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
        return cls.from_dict(doc)


def fmt(x) -> str:
    """Deterministic CSV cell: shortest round-trip repr for floats, blank for None/NaN."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path, fieldnames: Sequence[str], rows: Sequence[dict]) -> None:
    """RFC 4180 CSV with LF line endings."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fieldnames), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: fmt(r.get(k)) for k in fieldnames})
    Path(path).write_text(buf.getvalue())


def _replication_rows(cfg: ExperimentConfig, dist, split, policies, rho: float, lam: float, rep: int) -> list[dict]:
    seed = rng.replication_seed(cfg.seed, rep)
    rows = []
    try:
        arr = sample_arrays(dist, split, lam, cfg.jobs, cfg.machines, seed, cfg.parallel_tasks)
    except Exception as e:  # noqa: BLE001 - recorded per row
        return [dict(policy=str(p), rho=rho, seed=seed, error=f"{type(e).__name__}: {e}") for p in policies]
    warm = int(cfg.jobs * cfg.warmup)
    t_warm = float(arr.arrival[warm])
    for p in policies:
        row = dict(policy=str(p), rho=rho, seed=seed)
        t0 = time.perf_counter()
        try:
            res = simulate_arrays(arr, p, cfg.y_grid, cfg.warmup)
            f = res.flow[warm:]
            keep = res.bp_start >= t_warm
            row.update(
                n_jobs=len(f),
                mean_flow=float(np.mean(f)),
                total_flow=math.fsum(f),
                p50_flow=float(np.quantile(f, 0.5)),
                p99_flow=float(np.quantile(f, 0.99)),
                mean_busy_period=float(np.mean(res.bp_length[keep])) if keep.any() else math.nan,
                error="",
            )
        except Exception as e:  # noqa: BLE001 - recorded per row
            row["error"] = f"{type(e).__name__}: {e}"
        if cfg.record_wallclock:
            row["wallclock_ms"] = (time.perf_counter() - t0) * 1e3
        rows.append(row)
    return rows


@dataclass
class SweepResult:
    rows: list[dict]
    summary: list[dict]
    ratio: list[dict]
    paths: dict[str, Path]

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.rows if r.get("error"))


def run_sweep(cfg: ExperimentConfig, out_dir=None) -> SweepResult:
    """Simulate every (rho, replication, policy) and write three CSV files.

    results.csv  one row per (rho, policy, replication), in that order;
    summary.csv  per (rho, policy) mean flow with a bootstrap CI;
    ratio.csv    M-SRPT / SRPT_1N ratio and additive gap per rho (when both run).
    Replications may run concurrently; rows are merged in a fixed order.
    """
    cfg.validate()
    dist, split, policies = cfg.dist(), cfg.task_split(), cfg.policy_specs()
    loads = cfg.loads()
    out = Path(cfg.out_dir if out_dir is None else out_dir)
    out.mkdir(parents=True, exist_ok=True)

    jobs = [(i, r) for i in range(len(loads)) for r in range(cfg.replications)]

    def work(item):
        i, r = item
        rho, lam = loads[i]
        return _replication_rows(cfg, dist, split, policies, rho, lam, r)

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            chunks = list(ex.map(work, jobs))
    else:
        chunks = [work(j) for j in jobs]
    # reorder to (rho, policy, replication)
    grid: dict[tuple[int, int], list[dict]] = {}
    for (i, _r), chunk in zip(jobs, chunks):
        for k, row in enumerate(chunk):
            grid.setdefault((i, k), []).append(row)
    rows = [row for i in range(len(loads)) for k in range(len(policies)) for row in grid[(i, k)]]

    summary, ratio = [], []
    names = [str(p) for p in policies]
    for i, (rho, lam) in enumerate(loads):
        per_policy = {}
        for k, name in enumerate(names):
            ok = [r for r in grid[(i, k)] if not r.get("error")]
            means = np.array([r["mean_flow"] for r in ok])
            srow = dict(policy=name, rho=rho, lam=lam, reps=len(ok), n_failed=cfg.replications - len(ok))
            if len(ok):
                m, lo, hi = mean_ci(means, cfg.seed, 2, i, k)
                bps = [r["mean_busy_period"] for r in ok if not math.isnan(r["mean_busy_period"])]
                srow.update(
                    mean_flow=m, ci_lo=lo, ci_hi=hi,
                    p99_flow=float(np.mean([r["p99_flow"] for r in ok])),
                    mean_busy_period=float(np.mean(bps)) if bps else math.nan,
                )
            summary.append(srow)
            per_policy[name] = {r["seed"]: r["mean_flow"] for r in ok}
        a, b = per_policy.get("m-srpt"), per_policy.get("srpt1n")
        if a and b:
            seeds = sorted(set(a) & set(b))
            if seeds:
                pt = ratio_point(rho, lam, np.array([a[s] for s in seeds]), np.array([b[s] for s in seeds]), cfg.seed, i)
                ratio.append(pt.row())

    paths = {"results": out / "results.csv", "summary": out / "summary.csv", "ratio": out / "ratio.csv"}
    write_csv(paths["results"], RESULT_FIELDS, rows)
    write_csv(paths["summary"], SUMMARY_FIELDS, summary)
    write_csv(paths["ratio"], RATIO_FIELDS, ratio)
    return SweepResult(rows, summary, ratio, paths)
