"""Verification suites: each returns a list of BoundReports."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .analysis import audits
from .analysis.audits import BoundReport
from .analysis.heavy_traffic import (
    busy_period_regression,
    gap_slope,
    heavy_traffic_ratio_curve,
    nonincreasing_within_ci,
    psjf_workload_check,
)
from .distributions import Exponential, parse_distribution
from .workload_gen import parse_split


def lemma_workload(instances: int = 1000, seed: int = 0, max_jobs: int = 200, **_) -> list[BoundReport]:
    """Per-instance worst workload-lemma and class-prefix reports on the random corpus."""
    out = []
    for rep in _corpus_reports(instances, seed, max_jobs, charging=False):
        out.extend(rep)
    return out


def charging(instances: int = 1000, seed: int = 0, max_jobs: int = 200, **_) -> list[BoundReport]:
    out = []
    for rep in _corpus_reports(instances, seed, max_jobs, charging=True):
        out.extend(rep)
    return out


def _worst(reports: list[BoundReport], name: str) -> BoundReport | None:
    sel = [r for r in reports if r.name == name]
    if not sel:
        return None
    bad = [r for r in sel if not r.satisfied]
    if bad:
        return bad[0]
    return min(sel, key=lambda r: r.margin)


def _corpus_reports(instances: int, seed: int, max_jobs: int, charging: bool):
    """Yield, per instance, every violating report plus the tightest satisfied one per kind."""
    from . import rng
    from .core_model import instance_params
    from .schedulers import PolicyKind, PolicySpec
    from .sim_engine import coupled_run

    a, b = PolicySpec(PolicyKind.M_SRPT), PolicySpec(PolicyKind.SRPT_1N)
    for s in range(instances):
        inst = audits.random_audit_instance(rng.replication_seed(seed, s), max_jobs)
        if charging:
            from .sim_engine import run

            reps = audits.audit_charging_bounds(run(inst, a))
            kinds = ("charging_waste", "charging_nonpm")
        else:
            p = instance_params(inst)
            ta, tb = coupled_run(inst, a, b)
            reps = audits.audit_workload_lemma(ta, tb, y_grid=tuple(np.geomspace(p.p_min / 2, 2 * p.p_max, 16)))
            kinds = ("workload_lemma", "class_prefix")
        keep = [r for r in reps if not r.satisfied]
        for k in kinds:
            w = _worst(reps, k)
            if w is not None and w.satisfied:
                keep.append(w)
        for r in keep:
            r.inputs = {"instance": s, **r.inputs}
        yield keep


def busy(rhos: Sequence[float] = (0.3, 0.5, 0.7), jobs: int = 1_000_000, seed: int = 0, tol: float = 0.05, **_) -> list[BoundReport]:
    """Busy-period length regressed on initiating work; slope vs 1/(1-rho)."""
    out = []
    for r in rhos:
        fit = busy_period_regression(Exponential(1.0), r, jobs, seed)
        err = abs(fit.slope / fit.expected_slope - 1.0)
        out.append(BoundReport(
            "busy_period_slope_relerr",
            {"rho": r, "periods": fit.n_periods, "slope": fit.slope, "expected": fit.expected_slope, "stderr": fit.slope_stderr},
            tol, err,
        ))
    return out


def psjf(lam: float = 0.8, xs: Sequence[float] = (0.5, 1.0, 2.0), jobs: int = 1_000_000, reps: int = 4, seed: int = 0, **_) -> list[BoundReport]:
    out = []
    for c in psjf_workload_check(Exponential(1.0), lam, xs, jobs, reps, seed):
        inputs = {"x": c.x, "lam": lam, "formula": c.formula, "time_avg": c.time_avg, "arrival_avg": c.arrival_avg}
        out.append(BoundReport("psjf_formula_relerr", inputs, 0.05, c.rel_err_formula))
        out.append(BoundReport("psjf_pasta_relerr", dict(inputs), 0.02, c.rel_err_pasta))
    return out


def cr_sweep(progress: Callable | None = None, **kw) -> list[BoundReport]:
    res = audits.cr_sweep(progress=progress, **{k: v for k, v in kw.items() if k in _CR_KEYS})
    out = list(res.violations)
    for rep in (res.max_ratio, res.tightest):
        rep.inputs = {"instances": res.count, "multisets": res.multisets, **rep.inputs}
        out.append(rep)
    return out


_CR_KEYS = {"max_jobs", "max_size", "max_arrival", "machine_counts", "max_tasks", "parallel_modes", "orderings"}


def heavy_traffic(
    distribution: str = "uniform:a=1,b=2",
    split: str = "fixed:k=2",
    np_frac: float = 0.5,
    eta_cap: float | None = 1.0,
    machines: int = 2,
    rhos: Sequence[float] = (0.8, 0.9, 0.95, 0.99),
    reps: int = 20,
    jobs: int = 200_000,
    seed: int = 0,
    threads: int = 1,
    **_,
) -> list[BoundReport]:
    """Ratio trend, lower-bound consistency and gap slope of the M-SRPT / SRPT_1N curve."""
    pts = heavy_traffic_ratio_curve(
        parse_distribution(distribution), parse_split(split, np_frac, eta_cap),
        machines, rhos, reps, jobs, seed, threads=threads,
    )
    out = []
    for p in pts:
        # SRPT on the fast server lower-bounds every policy: the ratio CI must reach 1
        out.append(BoundReport("ratio_lower_bound", {"rho": p.rho, "ratio": p.ratio, "lo": p.ratio_lo, "hi": p.ratio_hi}, 0.0, 1.0 - p.ratio_hi))
    mono = nonincreasing_within_ci(pts)
    out.append(BoundReport("ratio_nonincreasing", {"ratios": ";".join(f"{p.ratio:.6g}" for p in pts)}, 0.0, 0.0 if mono else 1.0))
    out.append(BoundReport("ratio_last_below_first", {"first": pts[0].ratio, "last": pts[-1].ratio}, 0.0, pts[-1].ratio - pts[0].ratio,
                           satisfied=pts[-1].ratio < pts[0].ratio))
    slope = gap_slope(pts)
    out.append(BoundReport("gap_slope_nonnegative", {"slope": slope}, 0.0, -slope if math.isfinite(slope) else math.inf))
    return out


SUITES: dict[str, Callable[..., list[BoundReport]]] = {
    "lemma-workload": lemma_workload,
    "charging": charging,
    "busy": busy,
    "psjf": psjf,
    "cr-sweep": cr_sweep,
    "heavy-traffic": heavy_traffic,
}
