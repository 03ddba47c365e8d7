"""Exhaustive offline optimum for tiny integer instances.

Time is cut into quanta; in each quantum every machine serves one unit of
one task or idles. A non-preemptive task, once started, must be served in
every following quantum until it finishes (machines are identical, so
"same machine" and "some machine" coincide). Total flow time equals the
number of (job, quantum) pairs with the job released and unfinished, which
is the per-step cost of the search.

With integer data every event of an online policy running at unit speed
falls on a quantum boundary, so every such schedule lies in the search
space and the oracle lower-bounds it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .core_model import Instance

MAX_JOBS = 4
MAX_TASKS = 3
MAX_STATES = 10**7


class OracleTooLarge(RuntimeError):
    """Instance too large for the exhaustive oracle."""


@dataclass
class OracleResult:
    total_flow: float
    schedule: list[tuple[float, tuple[tuple[int, int], ...]]]
    completions: dict[int, float] = field(default_factory=dict)
    states: int = 0

    def __iter__(self):
        # allows ``schedule, total = brute_force_optimal(...)``
        yield self.schedule
        yield self.total_flow


def _units(x: float, q: float, what: str) -> int:
    u = round(x / q)
    if abs(u * q - x) > 1e-9 * max(1.0, abs(x)):
        raise OracleTooLarge(f"{what}={x!r} is not a multiple of the quantum {q!r}")
    return int(u)


def brute_force_optimal(inst: Instance, time_quantum: float = 1.0, max_states: int = MAX_STATES) -> OracleResult:
    if len(inst.jobs) > MAX_JOBS:
        raise OracleTooLarge(f"instance too large for oracle: {len(inst.jobs)} jobs (max {MAX_JOBS})")
    q = float(time_quantum)
    if not q > 0:
        raise ValueError("time_quantum must be positive")
    N = inst.machines
    parallel = inst.parallel_tasks

    arrival: list[int] = []
    owner: list[int] = []  # flat task -> job position
    tid: list[int] = []
    units: list[int] = []
    rigid: list[bool] = []  # non-preemptive and longer than one quantum
    for jp, job in enumerate(inst.jobs):
        if len(job.tasks) > MAX_TASKS:
            raise OracleTooLarge(f"instance too large for oracle: job {job.id} has {len(job.tasks)} tasks (max {MAX_TASKS})")
        arrival.append(_units(job.arrival, q, f"job {job.id} arrival"))
        for task in job.tasks:
            owner.append(jp)
            tid.append(task.id)
            u = _units(task.size, q, f"job {job.id} task {task.id} size")
            units.append(u)
            rigid.append((not task.preemptive) and u > 1)
    nj, nt = len(inst.jobs), len(units)
    job_tasks = [[i for i in range(nt) if owner[i] == jp] for jp in range(nj)]
    t_last = max(arrival)
    memo: dict = {}

    def solve(t: int, rem: tuple) -> int:
        key = (min(t, t_last), rem)
        hit = memo.get(key)
        if hit is not None:
            return hit[0]
        if len(memo) >= max_states:
            raise OracleTooLarge(f"instance too large for oracle: more than {max_states} search states")
        alive = [jp for jp in range(nj) if arrival[jp] <= t and any(rem[i] for i in job_tasks[jp])]
        if not alive:
            later = [arrival[jp] for jp in range(nj) if arrival[jp] > t and any(rem[i] for i in job_tasks[jp])]
            if not later:
                memo[key] = (0, None)
                return 0
            val = solve(min(later), rem)
            memo[key] = (val, ("jump", min(later)))
            return val
        forced = [i for i in range(nt) if rigid[i] and 0 < rem[i] < units[i]]
        busy_jobs = {owner[i] for i in forced}
        eligible = [
            i for i in range(nt)
            if rem[i] > 0 and arrival[owner[i]] <= t and i not in forced
            and (parallel or owner[i] not in busy_jobs)
        ]
        cap = N - len(forced)
        best, best_s = None, None
        for k in range(min(cap, len(eligible)), -1, -1):
            for extra in itertools.combinations(eligible, k):
                if not parallel:
                    js = [owner[i] for i in extra]
                    if len(set(js)) != len(js):
                        continue
                if k < cap and _dominated_idle(extra, eligible, rigid, owner, parallel, rem, units, t >= t_last):
                    continue
                chosen = tuple(forced) + extra
                nxt = list(rem)
                for i in chosen:
                    nxt[i] -= 1
                val = solve(t + 1, tuple(nxt))
                if best is None or val < best:
                    best, best_s = val, chosen
        best += len(alive)
        memo[key] = (best, ("serve", best_s))
        return best

    start = tuple(units)
    t0 = min(arrival)
    total_units = solve(t0, start)

    # replay the argmin choices
    schedule = []
    completions: dict[int, float] = {}
    t, rem = t0, start
    while True:
        _, choice = memo[(min(t, t_last), rem)]
        if choice is None:
            break
        if choice[0] == "jump":
            t = choice[1]
            continue
        chosen = choice[1]
        schedule.append((t * q, tuple(sorted((inst.jobs[owner[i]].id, tid[i]) for i in chosen))))
        nxt = list(rem)
        for i in chosen:
            nxt[i] -= 1
        rem = tuple(nxt)
        t += 1
        for jp in {owner[i] for i in chosen}:
            if not any(rem[i] for i in job_tasks[jp]):
                completions[inst.jobs[jp].id] = t * q
    return OracleResult(total_units * q, schedule, completions, len(memo))


def _dominated_idle(extra, eligible, rigid, owner, parallel, rem, units, no_more_arrivals) -> bool:
    """True if a machine idles while some waiting task could use it for free.

    Pulling one unit of a preemptive (or single-quantum) task forward into an
    idle slot never delays anything, so such schedules are dominated. Holding
    back an unstarted rigid task can only pay off while arrivals are pending.
    """
    used = {owner[i] for i in extra}
    for i in eligible:
        if i in extra or not (parallel or owner[i] not in used):
            continue
        if no_more_arrivals or not (rigid[i] and rem[i] == units[i]):
            return True
    return False
