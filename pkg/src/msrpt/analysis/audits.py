"""Trace audits: workload lemma, charging bounds, busy periods, competitive ratio."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .. import rng
from ..core_model import Instance, Job, class_grid, instance_params
from ..oracle import brute_force_optimal
from ..schedulers import PolicyKind, PolicySpec
from ..sim_engine import Trace, coupled_run, merged_grid, run, total_flow
from .bounds import cr_upper_bound

REL_TOL = 1e-9


@dataclass
class BoundReport:
    name: str
    inputs: dict = field(default_factory=dict)
    bound_value: float = math.nan
    observed_value: float | None = None
    satisfied: bool | None = None
    margin: float | None = None

    def __post_init__(self):
        if self.observed_value is not None and self.satisfied is None:
            self.satisfied = bool(self.observed_value <= self.bound_value + REL_TOL * abs(self.bound_value))
        if self.observed_value is not None and self.margin is None:
            self.margin = self.bound_value - self.observed_value

    def row(self) -> dict:
        d = asdict(self)
        d["inputs"] = ";".join(f"{k}={v}" for k, v in self.inputs.items())
        return d


REPORT_FIELDS = ["name", "inputs", "bound_value", "observed_value", "satisfied", "margin"]


class AuditError(ValueError):
    pass


# --- workload lemma -----------------------------------------------------------


def _merged_grid(ta: Trace, tb: Trace) -> np.ndarray:
    if ta.grid is not None:
        return ta.grid
    return merged_grid(ta.times, tb.times)


def audit_workload_lemma(
    ta: Trace,
    tb: Trace,
    machines: int | None = None,
    eta: float | None = None,
    y_grid: Sequence[float] | None = None,
) -> list[BoundReport]:
    """W_<=y(M-SRPT) - W_<=y(SRPT_1N) <= N (2y + eta) on the merged event grid.

    One report per y, carrying the worst (largest) difference and its time;
    then one report per class k for the prefix W^[k] = W_<=2^k against the
    looser N (2^(k+1) + eta + 1), with the tight N (2^(k+1) + eta) verdict
    recorded in the inputs.
    """
    if ta.instance != tb.instance:
        raise AuditError("traces come from different instances")
    inst = ta.instance
    p = instance_params(inst)
    N = inst.machines if machines is None else machines
    eta = p.eta if eta is None else eta
    if y_grid is None:
        y_grid = ta.y_grid or tuple(np.geomspace(p.p_min / 2, 2 * p.p_max, 16))
    grid = _merged_grid(ta, tb)
    Ra = ta.remaining_at(grid)
    Rb = tb.remaining_at(grid)

    def w_leq(R, y):
        return np.where((R > 0) & (R <= y), R, 0.0).sum(axis=1)

    out = []
    for y in y_grid:
        diff = w_leq(Ra, y) - w_leq(Rb, y)
        i = int(np.argmax(diff))
        out.append(
            BoundReport(
                "workload_lemma",
                {"y": float(y), "N": N, "eta": eta, "t": float(grid[i]), "n_times": len(grid)},
                N * (2 * y + eta),
                float(diff[i]),
            )
        )
    k_lo, k_hi = class_grid(p.p_min, p.p_max)
    for k in range(k_lo, k_hi + 1):
        y = 2.0**k
        diff = w_leq(Ra, y) - w_leq(Rb, y)
        i = int(np.argmax(diff))
        tight = N * (2 ** (k + 1) + eta)
        obs = float(diff[i])
        out.append(
            BoundReport(
                "class_prefix",
                {"k": k, "N": N, "eta": eta, "t": float(grid[i]), "tight_bound": tight, "tight_ok": obs <= tight + REL_TOL * tight},
                N * (2 ** (k + 1) + eta + 1),
                obs,
            )
        )
    return out


# --- charging bounds ------------------------------------------------------------


def _segments(trace: Trace):
    """Per-segment arrays: start, length, remaining (at start), machines per job, idle."""
    ts, rem, rate = trace._arrays()
    speed = trace.speed
    served = np.rint(rate / speed).astype(np.int64)
    idle = np.array([s.assignment.idle for s in trace.snapshots], dtype=np.int64)
    dt = np.diff(ts, append=ts[-1])
    return ts, dt, rem, served, idle


def audit_charging_bounds(trace: Trace, inst: Instance | None = None) -> list[BoundReport]:
    """Per-job W_waste <= (N-1) p_x and W_non-pm <= (N^2+N) eta + N p_x.

    For a tagged job x over [r_x, C_x]:
    W_waste  = machine-time spent idle or on other jobs with remaining > p_x
               while x holds a machine;
    W_non-pm = machine-time spent on jobs whose remaining at r_x exceeded p_x
               while x holds no machine.
    """
    inst = trace.instance if inst is None else inst
    if trace.instance != inst:
        raise AuditError("trace does not belong to this instance")
    if trace.policy.single_fast:
        raise AuditError("charging bounds are defined for the multi-machine policies")
    N = inst.machines
    eta = instance_params(inst).eta
    ts, dt, rem, served, idle = _segments(trace)
    out = []
    for col, job in enumerate(inst.jobs):
        rec = trace.jobs[job.id]
        if rec.completion is None:
            raise AuditError(f"job {job.id} never completed")
        px = job.total_size
        # the engine admits arrivals within TIME_EPS of the current event time
        a = int(np.searchsorted(ts, rec.arrival + 1e-12 * max(1.0, abs(rec.arrival)), side="right")) - 1
        b = int(np.searchsorted(ts, rec.completion, side="left"))
        seg = slice(a, b)
        mine = served[seg, col] > 0
        d = dt[seg]
        R = rem[seg]
        S = served[seg]
        big_now = R > px
        big_now[:, col] = False
        waste = float(np.sum(d[mine] * (idle[seg][mine] + (S[mine] * big_now[mine]).sum(axis=1))))
        big_at_r = rem[a] > px
        big_at_r[col] = False
        nonpm = float(np.sum(d[~mine] * (S[~mine][:, big_at_r]).sum(axis=1)))
        out.append(BoundReport("charging_waste", {"job": job.id, "p": px, "N": N}, (N - 1) * px, waste))
        out.append(BoundReport("charging_nonpm", {"job": job.id, "p": px, "N": N, "eta": eta}, (N * N + N) * eta + N * px, nonpm))
    return out


# --- busy periods -------------------------------------------------------------------


def measure_busy_periods(trace: Trace) -> list[tuple[float, float, float]]:
    """Maximal intervals with no idle machine: (start, length, work at start)."""
    out = []
    start = None
    work = 0.0
    for snap in trace.snapshots:
        full = bool(snap.remaining) and snap.assignment.idle == 0
        if full and start is None:
            start = snap.time
            work = math.fsum(snap.remaining.values())
        elif not full and start is not None:
            out.append((start, snap.time - start, work))
            start = None
    if start is not None:
        out.append((start, trace.snapshots[-1].time - start, work))
    return out


# --- competitive ratio ----------------------------------------------------------------


def competitive_ratio_check(inst: Instance, policy: PolicySpec | None = None) -> BoundReport:
    """Total flow of M-SRPT over the exhaustive optimum, against 4 log2 a + 2 b + 8."""
    policy = PolicySpec(PolicyKind.M_SRPT) if policy is None else policy
    p = instance_params(inst)
    opt = brute_force_optimal(inst).total_flow
    alg = total_flow(run(inst, policy, check=False, record=False))
    return BoundReport(
        "competitive_ratio",
        {"alpha": p.alpha, "beta": p.beta, "N": inst.machines, "n_jobs": len(inst.jobs), "opt": opt, "alg": alg},
        cr_upper_bound(p.alpha, p.beta),
        alg / opt,
    )


def _job_types(max_size: int, max_tasks: int) -> list[tuple[tuple[int, bool], ...]]:
    """Distinct jobs up to relabelling tasks: sorted (size, preemptive) multisets.

    The preemptivity flag of a unit task is irrelevant with integer data (it
    always runs exactly one whole unit between integer-time events), so unit
    tasks are always marked preemptive.
    """
    out = set()

    def parts(n, most, k):
        if n == 0:
            yield ()
            return
        if k == 0:
            return
        for first in range(min(n, most), 0, -1):
            for rest in parts(n - first, first, k - 1):
                yield (first,) + rest

    for total in range(1, max_size + 1):
        for sizes in parts(total, total, max_tasks):
            choices = [(True,) if s == 1 else (True, False) for s in sizes]
            for flags in itertools.product(*choices):
                out.add(tuple(sorted(zip(sizes, flags), key=lambda t: (-t[0], not t[1]))))
    return sorted(out)


def enumerate_cr_instances(
    max_jobs: int = 3,
    max_size: int = 4,
    max_arrival: int = 3,
    machine_counts: Iterable[int] = (1, 2),
    max_tasks: int = 3,
    parallel_modes: Iterable[bool] = (False,),
    orderings: bool = True,
) -> Iterator[tuple[Instance, tuple]]:
    """All small integer instances, modulo time shifts and identical jobs.

    Arrivals are shifted so the earliest is 0 (flow time is shift invariant).
    With ``orderings`` every distinct assignment of ids to the chosen job
    multiset is produced, since ids break priority ties. The yielded key
    identifies the multiset, so callers can reuse one optimum across
    orderings.
    """
    types = _job_types(max_size, max_tasks)
    specs = [(a, t) for a in range(max_arrival + 1) for t in types]
    for N in machine_counts:
        for par in parallel_modes:
            for n in range(1, max_jobs + 1):
                for combo in itertools.combinations_with_replacement(specs, n):
                    if min(a for a, _ in combo) != 0:
                        continue
                    key = (N, par, combo)
                    perms = sorted(set(itertools.permutations(combo))) if orderings else [combo]
                    for perm in perms:
                        jobs = tuple(
                            Job.from_sizes(i, a, [s for s, _ in t], [f for _, f in t]) for i, (a, t) in enumerate(perm)
                        )
                        yield Instance(N, jobs, par), key


@dataclass
class CRSweepResult:
    count: int = 0
    multisets: int = 0
    max_ratio: BoundReport | None = None
    tightest: BoundReport | None = None
    violations: list = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return not self.violations


def cr_sweep(progress=None, **kw) -> CRSweepResult:
    """Exhaustive competitive-ratio sweep over ``enumerate_cr_instances(**kw)``.

    Tracks the largest observed ratio, the smallest margin to the bound and
    every violating instance.
    """
    out = CRSweepResult()
    last_key, opt = None, math.nan
    policy = PolicySpec(PolicyKind.M_SRPT)
    for inst, key in enumerate_cr_instances(**kw):
        if key != last_key:  # orderings of one multiset are consecutive
            opt = brute_force_optimal(inst).total_flow
            last_key = key
            out.multisets += 1
        alg = total_flow(run(inst, policy, check=False, record=False))
        p = instance_params(inst)
        bound = cr_upper_bound(p.alpha, p.beta)
        ratio = alg / opt
        out.count += 1
        if progress is not None and out.count % 50000 == 0:
            progress(out.count)
        worse = out.max_ratio is None or ratio > out.max_ratio.observed_value
        tighter = out.tightest is None or bound - ratio < out.tightest.margin
        if not (worse or tighter or ratio > bound):
            continue
        rep = BoundReport(
            "competitive_ratio_sweep",
            {"alpha": p.alpha, "beta": p.beta, "N": inst.machines, "parallel": inst.parallel_tasks,
             "jobs": _describe(inst), "opt": opt, "alg": alg},
            bound,
            ratio,
        )
        if worse:
            out.max_ratio = rep
        if tighter:
            out.tightest = rep
        if not rep.satisfied:
            out.violations.append(rep)
    return out


def _describe(inst: Instance) -> str:
    parts = []
    for j in inst.jobs:
        tasks = "+".join(f"{t.size:g}{'' if t.preemptive else 'np'}" for t in j.tasks)
        parts.append(f"j{j.id}@{j.arrival:g}[{tasks}]")
    return " ".join(parts)


# --- random audit corpus ----------------------------------------------------------------


def random_audit_instance(seed: int, max_jobs: int = 200, machine_choices=(1, 2, 4)) -> Instance:
    """Random mixed-preemptivity instance for lemma audits.

    Sizes, task counts, flags and load vary per seed so that the corpus
    covers light and overloaded systems, tiny and wide size ranges.
    """
    g = rng.stream(seed, "corpus")
    N = int(g.choice(machine_choices))
    n = int(g.integers(1, max_jobs + 1))
    spread = float(g.choice([1.0, 4.0, 16.0, 64.0]))
    np_frac = float(g.choice([0.0, 0.3, 0.7, 1.0]))
    load = float(g.uniform(0.5, 1.5))
    max_tasks = int(g.choice([1, 2, 4]))
    mean_size = (1 + spread) / 2
    gaps = g.exponential(mean_size / (N * load), n)
    if g.random() < 0.2:
        gaps = np.round(gaps)  # integer arrivals create simultaneous events
    arrival = np.cumsum(gaps) - gaps[0]
    jobs = []
    for i in range(n):
        p = float(g.uniform(1.0, spread)) if spread > 1 else 1.0
        k = int(g.integers(1, max_tasks + 1))
        w = g.random(k) + 0.05
        from ..workload_gen import exact_parts

        sizes = exact_parts(p, w)
        flags = [bool(x) for x in g.random(k) >= np_frac]
        jobs.append(Job.from_sizes(i, float(arrival[i]), sizes, flags))
    return Instance(N, tuple(jobs), bool(g.random() < 0.3))


def audit_corpus(
    n_instances: int = 1000,
    seed: int = 0,
    max_jobs: int = 200,
    n_y: int = 16,
) -> dict:
    """Run the workload-lemma and charging audits on a random corpus.

    Returns counts plus the first violating reports (if any).
    """
    out = {"instances": 0, "lemma_checks": 0, "prefix_checks": 0, "charging_checks": 0,
           "lemma_violations": [], "prefix_violations": [], "prefix_tight_violations": [],
           "charging_violations": [], "max_lemma_ratio": -math.inf, "max_charging_ratio": -math.inf}
    a, b = PolicySpec(PolicyKind.M_SRPT), PolicySpec(PolicyKind.SRPT_1N)
    for s in range(n_instances):
        inst = random_audit_instance(rng.replication_seed(seed, s), max_jobs)
        p = instance_params(inst)
        ys = tuple(np.geomspace(p.p_min / 2, 2 * p.p_max, n_y))
        ta, tb = coupled_run(inst, a, b)
        for r in audit_workload_lemma(ta, tb, y_grid=ys):
            key = "lemma" if r.name == "workload_lemma" else "prefix"
            out[f"{key}_checks"] += 1
            if not r.satisfied:
                out[f"{key}_violations"].append((s, r))
            if key == "prefix" and not r.inputs["tight_ok"]:
                out["prefix_tight_violations"].append((s, r))
            if key == "lemma" and r.bound_value > 0:
                out["max_lemma_ratio"] = max(out["max_lemma_ratio"], r.observed_value / r.bound_value)
        for r in audit_charging_bounds(ta):
            out["charging_checks"] += 1
            if not r.satisfied:
                out["charging_violations"].append((s, r))
            if r.bound_value > 0:
                out["max_charging_ratio"] = max(out["max_charging_ratio"], r.observed_value / r.bound_value)
        out["instances"] += 1
    return out
