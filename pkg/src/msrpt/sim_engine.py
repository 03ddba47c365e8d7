"""Continuous-time event-driven simulator with full traces.

Between events every served task loses work at the machine speed, so
remaining work is affine in time and priorities can only change at an
arrival or a task completion. The engine therefore re-invokes the policy
only at those instants.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core_model import ClassDecomposition, Instance, class_grid, decompose, instance_params
from .schedulers import Assignment, PolicyKind, PolicySpec, assignment_violations, decide

TIME_EPS = 1e-12  # arrivals within this of "now" are merged into the current event
DONE_RTOL = 1e-12  # a task is finished once remaining <= DONE_RTOL * size

ARRIVAL, TASK_DONE, JOB_DONE = "ARRIVAL", "TASK_DONE", "JOB_DONE"


class SimulationError(AssertionError):
    """Internal invariant broken (bug trap)."""


class TraceIncomplete(ValueError):
    pass


@dataclass
class JobState:
    id: int
    arrival: float
    size: float
    sizes: list[float]
    preemptive: list[bool]
    rem: list[float]
    started: list[bool] = field(default_factory=list)

    def __post_init__(self):
        if not self.started:
            self.started = [r < s for r, s in zip(self.rem, self.sizes)]

    @property
    def remaining(self) -> float:
        # plain left-to-right sum; fastsim uses the same order
        s = 0.0
        for r in self.rem:
            s += r
        return s

    def alive_tasks(self) -> list[int]:
        return [t for t, r in enumerate(self.rem) if r > 0]


@dataclass
class SimState:
    now: float
    machines: int
    speed: float = 1.0
    parallel_tasks: bool = False
    jobs: dict[int, JobState] = field(default_factory=dict)
    pinned: dict[int, tuple[int, int]] = field(default_factory=dict)


@dataclass
class Snapshot:
    """State right after the events at ``time`` and the decision taken there."""

    time: float
    remaining: dict[int, float]
    assignment: Assignment
    w_leq: tuple[float, ...]


@dataclass
class Event:
    time: float
    kind: str
    job_id: int


@dataclass
class JobRecord:
    job_id: int
    arrival: float
    size: float
    completion: float | None = None

    @property
    def flow(self) -> float | None:
        return None if self.completion is None else self.completion - self.arrival


@dataclass
class Trace:
    instance: Instance
    policy: PolicySpec
    machines: int
    speed: float
    y_grid: tuple[float, ...]
    events: list[Event] = field(default_factory=list)
    snapshots: list[Snapshot] = field(default_factory=list)
    jobs: dict[int, JobRecord] = field(default_factory=dict)
    grid: np.ndarray | None = None  # merged sampling grid set by coupled_run

    def __post_init__(self):
        self._dense = None

    @property
    def complete(self) -> bool:
        return all(r.completion is not None for r in self.jobs.values())

    @property
    def job_ids(self) -> list[int]:
        return [j.id for j in self.instance.jobs]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    def _arrays(self):
        if self._dense is None:
            ids = self.job_ids
            col = {j: i for i, j in enumerate(ids)}
            S, n = len(self.snapshots), len(ids)
            rem = np.zeros((S, n))
            rate = np.zeros((S, n))
            for i, snap in enumerate(self.snapshots):
                for j, r in snap.remaining.items():
                    rem[i, col[j]] = r
                for j, c in snap.assignment.served().items():
                    rate[i, col[j]] = c * snap.assignment.speed
            self._dense = (self.times, rem, rate)
        return self._dense

    def remaining_at(self, times: Sequence[float]) -> np.ndarray:
        """Per-job remaining work (rows: times, columns: jobs in instance order).

        Values are right limits: events at a queried time have been applied.
        """
        ts, rem, rate = self._arrays()
        q = np.asarray(times, dtype=float)
        idx = np.searchsorted(ts, q, side="right") - 1
        out = np.zeros((len(q), rem.shape[1]))
        ok = idx >= 0
        i = idx[ok]
        out[ok] = np.maximum(rem[i] - rate[i] * (q[ok] - ts[i])[:, None], 0.0)
        return out

    def w_leq(self, y: float, times: Sequence[float] | None = None) -> np.ndarray:
        """Total remaining work of jobs whose remaining work is <= y."""
        R = self.remaining_at(self.times if times is None else times)
        return np.where((R > 0) & (R <= y), R, 0.0).sum(axis=1)

    def class_decomposition(self, i: int) -> ClassDecomposition:
        p = instance_params(self.instance)
        return decompose(self.snapshots[i].remaining.items(), class_grid(p.p_min, p.p_max))

    def flows(self) -> dict[int, float]:
        if not self.complete:
            raise TraceIncomplete("trace has unfinished jobs")
        return {j: r.flow for j, r in self.jobs.items()}


def _job_states(inst: Instance, single_fast: bool) -> list[JobState]:
    out = []
    for job in inst.jobs:
        if single_fast:
            # task structure is irrelevant on the fully preemptive fast server
            sizes, flags = [job.total_size], [True]
        else:
            sizes = [t.size for t in job.tasks]
            flags = [t.preemptive for t in job.tasks]
        out.append(JobState(job.id, job.arrival, job.total_size, sizes, flags, list(sizes), [False] * len(sizes)))
    return out


def run(
    inst: Instance,
    policy: PolicySpec,
    y_grid: Sequence[float] = (),
    *,
    check: bool = True,
    record: bool = True,
) -> Trace:
    """Simulate ``policy`` on ``inst`` until every job completes.

    With ``check`` every decision is audited for pinning, uniqueness and work
    conservation. With ``record=False`` only per-job records are kept.
    """
    if policy.kind is PolicyKind.BRUTE_OPT:
        raise ValueError("use oracle.brute_force_optimal for the offline optimum")
    single = policy.single_fast
    parallel = inst.parallel_tasks if policy.parallel_tasks is None else policy.parallel_tasks
    machines = 1 if single else inst.machines
    speed = float(inst.machines) if single else 1.0
    y_grid = tuple(float(y) for y in y_grid)
    state = SimState(0.0, machines, speed, parallel and not single)
    trace = Trace(inst, policy, machines, speed, y_grid)
    for job in inst.jobs:
        trace.jobs[job.id] = JobRecord(job.id, job.arrival, job.total_size)

    pending = deque(_job_states(inst, single))
    now = pending[0].arrival
    done_events: list[Event] = []
    while True:
        events = []
        while pending and pending[0].arrival <= now + TIME_EPS:
            js = pending.popleft()
            state.jobs[js.id] = js
            events.append(Event(now, ARRIVAL, js.id))
        events.extend(done_events)
        state.now = now
        asg = decide(policy, state)
        if check:
            bad = assignment_violations(state, asg)
            if bad:
                raise SimulationError(f"t={now}: " + "; ".join(bad))
        if record:
            trace.events.extend(events)
            rem = {j: js.remaining for j, js in state.jobs.items()}
            w = tuple(math.fsum(r for r in rem.values() if r <= y) for y in y_grid)
            trace.snapshots.append(Snapshot(now, rem, asg, w))
        if not state.jobs and not pending:
            break

        # next event: first task completion or next arrival
        served = [(m, s) for m, s in enumerate(asg.slots) if s is not None]
        dt, first = math.inf, None
        for m, (j, t) in served:
            d = state.jobs[j].rem[t] / speed
            if d < dt:
                dt, first = d, (j, t)
        if pending and pending[0].arrival - now <= dt:
            dt, first = pending[0].arrival - now, None
            nxt = pending[0].arrival
        else:
            nxt = now + dt
        if not math.isfinite(dt):
            raise SimulationError(f"t={now}: no further event but {len(state.jobs)} jobs alive")

        done_events = []
        touched = {j: state.jobs[j] for _, (j, _t) in served}
        for m, (j, t) in served:
            js = touched[j]
            if dt > 0:
                js.started[t] = True
            r = js.rem[t] - speed * dt
            if (j, t) == first or r <= DONE_RTOL * js.sizes[t]:
                r = 0.0
            elif r < 0:
                raise SimulationError(f"negative remaining {r} for task {(j, t)}")
            js.rem[t] = r
        now = nxt
        state.pinned = {}
        for m, (j, t) in served:
            js = touched[j]
            if js.rem[t] == 0.0:
                done_events.append(Event(now, TASK_DONE, j))
                if not js.alive_tasks() and j in state.jobs:
                    del state.jobs[j]
                    trace.jobs[j].completion = now
                    done_events.append(Event(now, JOB_DONE, j))
            elif not js.preemptive[t] and js.started[t]:
                state.pinned[m] = (j, t)
    return trace


def total_flow(trace: Trace) -> float:
    return math.fsum(trace.flows().values())


def mean_flow(trace: Trace) -> float:
    flows = trace.flows()
    return math.fsum(flows.values()) / len(flows)


def merged_grid(*times: Sequence[float]) -> np.ndarray:
    """Sorted union of event times, collapsing runs closer than TIME_EPS.

    Arrivals within TIME_EPS of an event are folded into that event, so two
    traces may record the same batch at times differing by rounding noise.
    Each run is represented by its latest time, where both traces have
    applied every event of the run.
    """
    t = np.unique(np.concatenate([np.asarray(x, dtype=float) for x in times]))
    if len(t) < 2:
        return t
    last = np.append(np.diff(t) > TIME_EPS, True)
    return t[last]


def coupled_run(inst: Instance, a: PolicySpec, b: PolicySpec, y_grid: Sequence[float] = (), **kw) -> tuple[Trace, Trace]:
    """Run two policies on the same input and attach a merged sampling grid."""
    ta = run(inst, a, y_grid, **kw)
    tb = run(inst, b, y_grid, **kw)
    grid = merged_grid(ta.times, tb.times)
    ta.grid = grid
    tb.grid = grid
    return ta, tb


def write_trace_csv(trace: Trace, path, ks: Sequence[int] | None = None) -> None:
    """One row per event: time, kind, job, totals, W^[k] prefixes, W_<=y samples."""
    p = instance_params(trace.instance)
    if ks is None:
        lo, hi = class_grid(p.p_min, p.p_max)
        ks = list(range(lo, hi + 1))
    snaps = {s.time: i for i, s in enumerate(trace.snapshots)}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["time", "event_kind", "job_id", "remaining_total", "n_alive"]
            + [f"W_prefix_{k}" for k in ks]
            + [f"W_leq_{y:g}" for y in trace.y_grid]
        )
        for ev in trace.events:
            i = snaps[ev.time]
            snap = trace.snapshots[i]
            cd = trace.class_decomposition(i)
            w.writerow(
                [repr(ev.time), ev.kind, ev.job_id, repr(math.fsum(snap.remaining.values())), len(snap.remaining)]
                + [repr(cd.prefix(k)) for k in ks]
                + [repr(v) for v in snap.w_leq]
            )


def write_jobs_csv(trace: Trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["job_id", "arrival", "size", "completion", "flow"])
        for job in trace.instance.jobs:
            r = trace.jobs[job.id]
            w.writerow([job.id, repr(r.arrival), repr(r.size), repr(r.completion), repr(r.flow)])
