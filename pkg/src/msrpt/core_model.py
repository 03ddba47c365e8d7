"""Jobs, tasks, instances and the power-of-two class decomposition."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple


class InstanceError(ValueError):
    """Raised for malformed or inconsistent instances."""


@dataclass(frozen=True)
class Task:
    id: int
    size: float
    preemptive: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.size) and self.size > 0):
            raise InstanceError(f"task {self.id}: size must be positive and finite (got {self.size!r})")


@dataclass(frozen=True)
class Job:
    id: int
    arrival: float
    tasks: tuple[Task, ...]

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not self.tasks:
            raise InstanceError(f"job {self.id}: needs at least one task")
        if not (math.isfinite(self.arrival) and self.arrival >= 0):
            raise InstanceError(f"job {self.id}: arrival must be a nonnegative finite time (got {self.arrival!r})")
        for pos, task in enumerate(self.tasks):
            if task.id != pos:
                raise InstanceError(f"job {self.id}: task ids must be 0..n-1 in order (task at {pos} has id {task.id})")

    @property
    def total_size(self) -> float:
        return math.fsum(t.size for t in self.tasks)

    @property
    def nonpreemptive_sizes(self) -> list[float]:
        return [t.size for t in self.tasks if not t.preemptive]

    @classmethod
    def from_sizes(cls, id: int, arrival: float, sizes: Iterable[float], preemptive: Iterable[bool] | bool = True) -> "Job":
        sizes = list(sizes)
        if isinstance(preemptive, bool):
            flags = [preemptive] * len(sizes)
        else:
            flags = list(preemptive)
        if len(flags) != len(sizes):
            raise InstanceError(f"job {id}: {len(sizes)} sizes but {len(flags)} preemptivity flags")
        return cls(id, float(arrival), tuple(Task(i, float(s), bool(p)) for i, (s, p) in enumerate(zip(sizes, flags))))


@dataclass(frozen=True)
class Instance:
    """N identical machines plus a job set, kept sorted by (arrival, id)."""

    machines: int
    jobs: tuple[Job, ...]
    parallel_tasks: bool = False

    def __post_init__(self):
        if int(self.machines) != self.machines or self.machines < 1:
            raise InstanceError(f"machines must be a positive integer (got {self.machines!r})")
        jobs = tuple(sorted(self.jobs, key=lambda j: (j.arrival, j.id)))
        if not jobs:
            raise InstanceError("instance has no jobs")
        seen = set()
        for job in jobs:
            if job.id in seen:
                raise InstanceError(f"duplicate job id {job.id}")
            seen.add(job.id)
        object.__setattr__(self, "jobs", jobs)
        object.__setattr__(self, "machines", int(self.machines))

    def __len__(self) -> int:
        return len(self.jobs)

    @property
    def params(self) -> "InstanceParams":
        return instance_params(self)

    def job(self, job_id: int) -> Job:
        for j in self.jobs:
            if j.id == job_id:
                return j
        raise KeyError(job_id)


class InstanceParams(NamedTuple):
    alpha: float
    beta: float
    eta: float
    p_min: float
    p_max: float


def instance_params(inst: Instance) -> InstanceParams:
    if not inst.jobs:
        raise InstanceError("instance has no jobs")
    sizes = [j.total_size for j in inst.jobs]
    p_min, p_max = min(sizes), max(sizes)
    # eta over an empty set of non-preemptive tasks is 0
    eta = max((s for j in inst.jobs for s in j.nonpreemptive_sizes), default=0.0)
    return InstanceParams(p_max / p_min, eta / p_min, eta, p_min, p_max)


def class_index(w: float) -> int:
    """Return the k with 2**(k-1) < w <= 2**k."""
    if not w > 0 or not math.isfinite(w):
        raise ValueError(f"class_index needs a positive finite workload (got {w!r})")
    mant, exp = math.frexp(w)
    # mant in [0.5, 1): w is an exact power of two only when mant == 0.5
    return exp - 1 if mant == 0.5 else exp


def class_grid(p_min: float, p_max: float) -> tuple[int, int]:
    """Class range used for an instance: ceil(log2 p_min) .. ceil(log2 p_max) + 1."""
    return class_index(p_min), class_index(p_max) + 1


@dataclass
class ClassDecomposition:
    """Remaining work per class k (jobs with remaining in (2^(k-1), 2^k])."""

    per_class_work: dict[int, float] = field(default_factory=dict)
    k_lo: int | None = None
    k_hi: int | None = None

    @property
    def boundaries(self) -> list[float]:
        if self.k_lo is None:
            return []
        return [2.0 ** k for k in range(self.k_lo, self.k_hi + 1)]

    def prefix(self, k: int) -> float:
        """Total remaining work of jobs in classes <= k."""
        return math.fsum(w for i, w in self.per_class_work.items() if i <= k)

    @property
    def prefix_work(self) -> dict[int, float]:
        if self.k_lo is None:
            return {}
        out = {}
        acc = math.fsum(w for i, w in self.per_class_work.items() if i < self.k_lo)
        for k in range(self.k_lo, self.k_hi + 1):
            acc += self.per_class_work.get(k, 0.0)
            out[k] = acc
        return out

    @property
    def total(self) -> float:
        return math.fsum(self.per_class_work.values())


def decompose(jobs: Iterable[tuple[int, float]], grid: tuple[int, int] | None = None) -> ClassDecomposition:
    """Bucket (job id, remaining) pairs into power-of-two classes.

    Zero-remaining jobs are ignored. Without an explicit grid the prefix range
    spans the classes actually present.
    """
    per: dict[int, list[float]] = {}
    for _, rem in jobs:
        if rem < 0:
            raise ValueError(f"negative remaining work {rem!r}")
        if rem == 0:
            continue
        per.setdefault(class_index(rem), []).append(rem)
    per_class = {k: math.fsum(v) for k, v in sorted(per.items())}
    if grid is None:
        if per_class:
            grid = (min(per_class), max(per_class))
        else:
            grid = (None, None)
    else:
        lo, hi = grid
        if per_class:
            grid = (lo, max(hi, max(per_class)))
    return ClassDecomposition(per_class, grid[0], grid[1])
