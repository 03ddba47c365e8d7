"""Scheduling disciplines as pure decision functions over a SimState.

Every decide_* function looks at the current state (alive jobs, per-task
remaining work, pinned non-preemptive tasks) and returns an Assignment of
machines to (job id, task id) pairs. The engine calls them only at events.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Iterable

if TYPE_CHECKING:
    from .sim_engine import JobState, SimState


class PolicyError(ValueError):
    pass


class PolicyKind(str, enum.Enum):
    M_SRPT = "m-srpt"
    M_CHI_SRPT = "m-chi-srpt"
    SRPT_1N = "srpt1n"
    PSJF_1N = "psjf1n"
    FCFS = "fcfs"
    BRUTE_OPT = "brute"


@dataclass(frozen=True)
class PolicySpec:
    kind: PolicyKind
    chi: float = 0.0
    # None inherits the instance's parallel_tasks flag
    parallel_tasks: bool | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.kind is PolicyKind.M_CHI_SRPT:
            if not self.chi > 0:
                raise PolicyError(f"m-chi-srpt needs chi > 0 (got {self.chi!r})")
        elif self.chi:
            raise PolicyError(f"chi is only meaningful for m-chi-srpt (got chi={self.chi!r} for {self.kind.value})")

    @property
    def single_fast(self) -> bool:
        """True for the one-server-of-speed-N benchmarks."""
        return self.kind in (PolicyKind.SRPT_1N, PolicyKind.PSJF_1N)

    def __str__(self) -> str:
        if self.kind is PolicyKind.M_CHI_SRPT:
            return f"{self.kind.value}:{self.chi:g}"
        return self.kind.value


def parse_policy(text: str) -> PolicySpec:
    """Parse ``m-srpt | m-chi-srpt:<chi> | srpt1n | psjf1n | fcfs | brute``."""
    name, _, arg = text.strip().partition(":")
    try:
        kind = PolicyKind(name.lower())
    except ValueError:
        raise PolicyError(f"unknown policy {text!r}") from None
    if kind is PolicyKind.M_CHI_SRPT:
        if not arg:
            raise PolicyError("m-chi-srpt needs a threshold, e.g. m-chi-srpt:0.5")
        try:
            chi = float(arg)
        except ValueError:
            raise PolicyError(f"bad chi {arg!r}") from None
        return PolicySpec(kind, chi=chi)
    if arg:
        raise PolicyError(f"policy {name} takes no argument")
    return PolicySpec(kind)


Slot = "tuple[int, int] | None"


@dataclass(frozen=True)
class Assignment:
    """Machine index -> (job id, task id) or None for IDLE."""

    slots: tuple
    speed: float = 1.0

    def served(self) -> dict[int, int]:
        """Job id -> number of machines it holds."""
        out: dict[int, int] = {}
        for s in self.slots:
            if s is not None:
                out[s[0]] = out.get(s[0], 0) + 1
        return out

    def rate(self, job_id: int) -> float:
        return self.speed * sum(1 for s in self.slots if s is not None and s[0] == job_id)

    @property
    def idle(self) -> int:
        return sum(1 for s in self.slots if s is None)

    def served_tasks(self) -> set[tuple[int, int]]:
        return {s for s in self.slots if s is not None}


def _srpt_key(js: JobState):
    return (js.remaining, js.id)


def _fifo_key(js: JobState):
    return (js.arrival, js.id)


def _shortest_task(js: JobState, taken: set) -> int | None:
    best = None
    for tid, r in enumerate(js.rem):
        if r > 0 and (js.id, tid) not in taken:
            if best is None or r < js.rem[best]:
                best = tid
    return best


def _first_task(js: JobState, taken: set) -> int | None:
    for tid, r in enumerate(js.rem):
        if r > 0 and (js.id, tid) not in taken:
            return tid
    return None


def _fill(state: SimState, order: Iterable[JobState], pick: Callable) -> Assignment:
    slots: list = [None] * state.machines
    taken: set = set()
    holding: set = set()
    for m, jt in state.pinned.items():
        slots[m] = jt
        taken.add(jt)
        holding.add(jt[0])
    free = [m for m in range(state.machines) if slots[m] is None]
    order = list(order)
    fi = 0
    # first pass: one machine per job, in priority order
    for js in order:
        if fi == len(free):
            break
        if js.id in holding:
            continue
        tid = pick(js, taken)
        if tid is None:
            continue
        slots[free[fi]] = (js.id, tid)
        fi += 1
        taken.add((js.id, tid))
        holding.add(js.id)
    if state.parallel_tasks:
        # leftover machines go to extra tasks, highest priority job first
        for js in order:
            while fi < len(free):
                tid = pick(js, taken)
                if tid is None:
                    break
                slots[free[fi]] = (js.id, tid)
                fi += 1
                taken.add((js.id, tid))
    return Assignment(tuple(slots), state.speed)


def decide_m_srpt(state: SimState) -> Assignment:
    """Pinned tasks stay put; free machines go to jobs by least remaining work."""
    return _fill(state, sorted(state.jobs.values(), key=_srpt_key), _shortest_task)


def m_chi_order(jobs: Iterable[JobState], chi: float) -> list[JobState]:
    """Jobs with remaining <= chi first (FIFO by arrival), then the rest by SRPT.

    Taking the first m candidates of this order reproduces the split of the m
    smallest jobs J_s into J_s minus C_chi (served as is) and J_s cap C_chi
    (replaced by the same number of C_chi jobs in arrival order).
    """
    jobs = list(jobs)
    small = sorted((j for j in jobs if j.remaining <= chi), key=_fifo_key)
    big = sorted((j for j in jobs if j.remaining > chi), key=_srpt_key)
    return small + big


def decide_m_chi_srpt(state: SimState, chi: float) -> Assignment:
    if not chi > 0:
        raise PolicyError(f"chi must be positive (got {chi!r})")
    return _fill(state, m_chi_order(state.jobs.values(), chi), _shortest_task)


def decide_fcfs(state: SimState) -> Assignment:
    return _fill(state, sorted(state.jobs.values(), key=_fifo_key), _first_task)


def _single_fast(state: SimState, key) -> Assignment:
    if not state.jobs:
        return Assignment((None,), state.speed)
    js = min(state.jobs.values(), key=key)
    return Assignment(((js.id, _shortest_task(js, set())),), state.speed)


def decide_srpt_single_fast(state: SimState) -> Assignment:
    """Whole speed-N server to the job with least remaining work."""
    return _single_fast(state, _srpt_key)


def decide_psjf_single_fast(state: SimState) -> Assignment:
    """Whole speed-N server to the job with smallest original size."""
    return _single_fast(state, lambda js: (js.size, js.id))


def decide(spec: PolicySpec, state: SimState) -> Assignment:
    kind = spec.kind
    if kind is PolicyKind.M_SRPT:
        return decide_m_srpt(state)
    if kind is PolicyKind.M_CHI_SRPT:
        return decide_m_chi_srpt(state, spec.chi)
    if kind is PolicyKind.FCFS:
        return decide_fcfs(state)
    if kind is PolicyKind.SRPT_1N:
        return decide_srpt_single_fast(state)
    if kind is PolicyKind.PSJF_1N:
        return decide_psjf_single_fast(state)
    raise PolicyError(f"{kind.value} is an offline oracle, not an online decision rule")


def assignment_violations(state: SimState, asg: Assignment) -> list[str]:
    """Check pinning, uniqueness and work conservation; return messages."""
    out = []
    for m, jt in state.pinned.items():
        if m >= len(asg.slots) or asg.slots[m] != jt:
            out.append(f"pinned task {jt} left machine {m}")
    seen = set()
    per_job: dict[int, int] = {}
    for m, s in enumerate(asg.slots):
        if s is None:
            continue
        if s in seen:
            out.append(f"task {s} on two machines")
        seen.add(s)
        js = state.jobs.get(s[0])
        if js is None or not js.rem[s[1]] > 0:
            out.append(f"machine {m} serves dead task {s}")
        per_job[s[0]] = per_job.get(s[0], 0) + 1
    if not state.parallel_tasks:
        for j, c in per_job.items():
            if c > 1:
                out.append(f"job {j} on {c} machines without parallel_tasks")
    if asg.idle:
        for js in state.jobs.values():
            if state.parallel_tasks:
                missing = [t for t, r in enumerate(js.rem) if r > 0 and (js.id, t) not in seen]
                if missing:
                    out.append(f"idle machine while task ({js.id}, {missing[0]}) waits")
                    break
            elif js.id not in per_job:
                out.append(f"idle machine while job {js.id} waits")
                break
    return out
