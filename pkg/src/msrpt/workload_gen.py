"""Instance I/O and M/GI/N instance sampling.

Sampled workloads come in two shapes: a flat array form (``JobArrays``) that
the compiled kernels consume directly, and the ``Instance`` object form used
by the reference engine. Both are produced from the same arrays, so a seed
yields the same jobs either way.
"""

from __future__ import annotations

import enum
import functools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import rng
from .core_model import Instance, InstanceError, Job, Task
from .distributions import DistributionError, SizeDistribution, parse_kv

MAX_TASKS = 64  # geometric task counts are truncated here


class SplitMode(str, enum.Enum):
    SINGLE = "single"
    FIXED_K = "fixed"
    GEOMETRIC = "geom"


@dataclass(frozen=True)
class TaskSplit:
    """How a sampled job size is cut into tasks and which tasks are rigid."""

    mode: SplitMode = SplitMode.SINGLE
    k: int = 1
    q: float = 0.5
    nonpreemptive_fraction: float = 0.0
    eta_cap: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", SplitMode(self.mode))
        if self.mode is SplitMode.FIXED_K and not (isinstance(self.k, int) and 1 <= self.k <= MAX_TASKS):
            raise ValueError(f"fixed split needs 1 <= k <= {MAX_TASKS} (got {self.k!r})")
        if self.mode is SplitMode.GEOMETRIC and not (0.0 < self.q <= 1.0):
            raise ValueError(f"geometric split needs 0 < q <= 1 (got {self.q!r})")
        if not 0.0 <= self.nonpreemptive_fraction <= 1.0:
            raise ValueError(f"nonpreemptive fraction must lie in [0, 1] (got {self.nonpreemptive_fraction!r})")
        if self.eta_cap is not None and not self.eta_cap > 0:
            raise ValueError(f"eta_cap must be positive (got {self.eta_cap!r})")

    def spec(self) -> str:
        if self.mode is SplitMode.FIXED_K:
            return f"fixed:k={self.k}"
        if self.mode is SplitMode.GEOMETRIC:
            return f"geom:q={self.q!r}"
        return "single"


def parse_split(text: str, np_frac: float = 0.0, eta_cap: float | None = None) -> TaskSplit:
    """Parse ``single``, ``fixed:k=3`` or ``geom:q=0.5``."""
    name, _, rest = text.strip().partition(":")
    kv = parse_kv(rest)
    name = name.lower()
    if name == "single" and not kv:
        return TaskSplit(SplitMode.SINGLE, nonpreemptive_fraction=np_frac, eta_cap=eta_cap)
    if name == "fixed" and set(kv) == {"k"}:
        return TaskSplit(SplitMode.FIXED_K, k=int(kv["k"]), nonpreemptive_fraction=np_frac, eta_cap=eta_cap)
    if name == "geom" and set(kv) == {"q"}:
        return TaskSplit(SplitMode.GEOMETRIC, q=float(kv["q"]), nonpreemptive_fraction=np_frac, eta_cap=eta_cap)
    raise ValueError(f"bad split spec {text!r} (expected single | fixed:k=<int> | geom:q=<p>)")


@dataclass
class JobArrays:
    """Flat job/task arrays; tasks of job i are task_*[ptr[i]:ptr[i+1]]."""

    machines: int
    arrival: np.ndarray
    size: np.ndarray
    ptr: np.ndarray
    task_size: np.ndarray
    task_np: np.ndarray
    parallel_tasks: bool = False

    @property
    def n_jobs(self) -> int:
        return len(self.arrival)

    @property
    def eta(self) -> float:
        s = self.task_size[self.task_np]
        return float(s.max()) if len(s) else 0.0

    def to_instance(self) -> Instance:
        jobs = []
        for i in range(self.n_jobs):
            a, b = self.ptr[i], self.ptr[i + 1]
            tasks = tuple(Task(t, float(s), not bool(f)) for t, (s, f) in enumerate(zip(self.task_size[a:b], self.task_np[a:b])))
            jobs.append(Job(i, float(self.arrival[i]), tasks))
        return Instance(self.machines, tuple(jobs), self.parallel_tasks)


def _fix_sum(parts: list[float], p: float) -> list[float]:
    """Adjust the smallest part so that math.fsum(parts) == p.

    The smallest part is at most p/2, so its ulp is at most half of p's and
    an exactly corrected part makes the rounded sum land on p.
    """
    if len(parts) > 1 and math.fsum(parts) != p:
        j = min(range(len(parts)), key=parts.__getitem__)
        others = parts[:j] + parts[j + 1:]
        parts[j] = p - math.fsum(others)
        if math.fsum(parts) != p:
            parts[j] = float(Fraction(p) - sum(map(Fraction, others), Fraction(0)))
    if math.fsum(parts) != p or min(parts) <= 0:
        raise ArithmeticError(f"could not split {p!r} exactly")
    return parts


def exact_parts(p: float, weights) -> list[float]:
    """Split p in proportion to weights with math.fsum(parts) == p exactly."""
    w = [float(x) for x in weights]
    tot = math.fsum(w)
    w = [max(x / tot, 1e-9) for x in w]  # keep every part comfortably positive
    tot = math.fsum(w)
    return _fix_sum([p * (x / tot) for x in w], p)


def _cap_pieces(s: float, cap: float) -> list[float]:
    m = math.ceil(s / cap)
    while s / m > cap:
        m += 1
    if m == 1:
        return [s]
    parts = exact_parts(s, [1.0] * m)
    # residual fix-ups move parts by at most a few ulps; keep them under cap
    if max(parts) > cap:
        raise ArithmeticError(f"piece {max(parts)!r} exceeds eta_cap {cap!r}")
    return parts


def split_job(p: float, split: TaskSplit, k: int, stick: np.ndarray, flags: np.ndarray) -> tuple[list[float], list[bool]]:
    """Cut one job into tasks given its pre-drawn randomness."""
    if k == 1:
        sizes = [p]
    elif split.mode is SplitMode.GEOMETRIC:
        # uniform stick-breaking: normalized i.i.d. exponentials (Dirichlet(1,...,1))
        sizes = exact_parts(p, [-math.log(u) for u in stick[:k]])
    else:
        sizes = exact_parts(p, [1.0] * k)
    np_flags = [bool(f) for f in flags[:k]]
    if split.eta_cap is None:
        return sizes, np_flags
    out_s, out_f = [], []
    for s, f in zip(sizes, np_flags):
        if f and s > split.eta_cap:
            pieces = _cap_pieces(s, split.eta_cap)
            out_s.extend(pieces)
            out_f.extend([True] * len(pieces))
        else:
            out_s.append(s)
            out_f.append(f)
    if len(out_s) > len(sizes):
        _fix_sum(out_s, p)
        if max(x for x, f in zip(out_s, out_f) if f) > split.eta_cap:
            raise ArithmeticError(f"job of size {p!r}: a rigid task exceeds eta_cap after rebalancing")
    return out_s, out_f


@functools.lru_cache(maxsize=8)
def _job_tasks(dist: SizeDistribution, split: TaskSplit, n_jobs: int, seed: int):
    """Sizes and task arrays; independent of the arrival rate, so cached.

    Sweeping the load with a fixed seed reuses these (common random numbers).
    """
    size = np.asarray(dist.sample(rng.uniforms(seed, "size", n_jobs)), dtype=float)
    if not np.all((size > 0) & np.isfinite(size)):
        raise DistributionError("sampled a nonpositive or infinite size")
    if split.mode is SplitMode.SINGLE:
        counts = np.ones(n_jobs, dtype=np.int64)
    elif split.mode is SplitMode.FIXED_K:
        counts = np.full(n_jobs, split.k, dtype=np.int64)
    elif split.q >= 1.0:
        counts = np.ones(n_jobs, dtype=np.int64)
    else:
        u = rng.uniforms(seed, "ntasks", n_jobs)
        counts = np.minimum(1 + np.floor(np.log(u) / math.log1p(-split.q)).astype(np.int64), MAX_TASKS)
    offs = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    total = int(offs[-1])
    flags = rng.uniforms(seed, "np", total) < split.nonpreemptive_fraction

    if split.mode is SplitMode.SINGLE and split.eta_cap is None:
        out = (size, offs, size.copy(), flags)
    else:
        stick = rng.uniforms(seed, "split", total).tolist() if split.mode is SplitMode.GEOMETRIC else None
        flag_l, off_l, size_l, count_l = flags.tolist(), offs.tolist(), size.tolist(), counts.tolist()
        ptr = [0]
        t_size: list[float] = []
        t_np: list[bool] = []
        for i in range(n_jobs):
            a, b = off_l[i], off_l[i + 1]
            sz, fl = split_job(size_l[i], split, count_l[i], stick[a:b] if stick is not None else None, flag_l[a:b])
            t_size.extend(sz)
            t_np.extend(fl)
            ptr.append(len(t_size))
        out = (size, np.asarray(ptr, dtype=np.int64), np.asarray(t_size, dtype=float), np.asarray(t_np, dtype=bool))
    for arr in out:
        arr.setflags(write=False)
    return out


@functools.lru_cache(maxsize=8)
def _unit_gaps(n_jobs: int, seed: int) -> np.ndarray:
    g = -np.log(rng.uniforms(seed, "interarrival", n_jobs))
    g.setflags(write=False)
    return g


def sample_arrays(
    dist: SizeDistribution,
    split: TaskSplit,
    lam: float,
    n_jobs: int,
    machines: int,
    seed: int,
    parallel_tasks: bool = False,
) -> JobArrays:
    """Poisson(lam) arrivals, i.i.d. sizes from dist, tasks per split."""
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError(f"lambda must be positive (got {lam!r})")
    if int(n_jobs) != n_jobs or n_jobs < 1:
        raise ValueError(f"n_jobs must be a positive integer (got {n_jobs!r})")
    if int(machines) != machines or machines < 1:
        raise InstanceError(f"machines must be a positive integer (got {machines!r})")
    arrival = np.cumsum(_unit_gaps(int(n_jobs), int(seed)) / lam)
    size, ptr, t_size, t_np = _job_tasks(dist, split, int(n_jobs), int(seed))
    return JobArrays(int(machines), arrival, size, ptr, t_size, t_np, parallel_tasks)


def sample_instance(
    dist: SizeDistribution,
    split: TaskSplit,
    lam: float,
    n_jobs: int,
    machines: int,
    seed: int,
    parallel_tasks: bool = False,
) -> Instance:
    return sample_arrays(dist, split, lam, n_jobs, machines, seed, parallel_tasks).to_instance()


def rho(dist: SizeDistribution, lam: float, machines: int = 1) -> float:
    """Machine-normalized traffic intensity lam * E[p] / N."""
    return lam * dist.mean / machines


def lam_for_rho(dist: SizeDistribution, rho_target: float, machines: int = 1) -> float:
    return rho_target * machines / dist.mean


def rho_of_y(dist: SizeDistribution, lam: float, y: float) -> float:
    """Load carried by jobs of size <= y: lam * int_0^y t f(t) dt (not normalized by N)."""
    if y < 0:
        raise ValueError(f"y must be nonnegative (got {y!r})")
    return float(lam * dist.partial_mean(y))


def G_and_inverse(dist: SizeDistribution):
    """(G, G_inv) with G(y) = int_0^y t f / E[p] and its left-continuous inverse."""
    return (lambda y: float(dist.G(y))), dist.G_inv


# --- JSON instance format ----------------------------------------------------


def _num(x: float) -> float:
    # repr() of a Python float is the shortest string that round-trips, which
    # is never longer than 17 significant digits
    return float(x)


def instance_to_dict(inst: Instance) -> dict:
    return {
        "machines": inst.machines,
        "parallel_tasks": inst.parallel_tasks,
        "jobs": [
            {
                "id": j.id,
                "arrival": _num(j.arrival),
                "tasks": [{"size": _num(t.size), "preemptive": t.preemptive} for t in j.tasks],
            }
            for j in inst.jobs
        ],
    }


def instance_from_dict(doc) -> Instance:
    if not isinstance(doc, dict):
        raise InstanceError("instance document must be a JSON object")
    for key in ("machines", "jobs"):
        if key not in doc:
            raise InstanceError(f"missing key {key!r}")
    jobs_doc = doc["jobs"]
    if not isinstance(jobs_doc, list) or not jobs_doc:
        raise InstanceError("instance has no jobs")
    par = doc.get("parallel_tasks", False)
    if not isinstance(par, bool):
        raise InstanceError("parallel_tasks must be true or false")
    jobs = []
    for pos, jd in enumerate(jobs_doc):
        if not isinstance(jd, dict) or "tasks" not in jd or "arrival" not in jd:
            raise InstanceError(f"job entry {pos}: needs 'arrival' and 'tasks'")
        jid = jd.get("id", pos)
        if not isinstance(jid, int) or isinstance(jid, bool):
            raise InstanceError(f"job entry {pos}: id must be an integer")
        tasks = []
        if not isinstance(jd["tasks"], list):
            raise InstanceError(f"job {jid}: 'tasks' must be a list")
        for t, td in enumerate(jd["tasks"]):
            size = td.get("size") if isinstance(td, dict) else None
            if not isinstance(size, (int, float)) or isinstance(size, bool):
                raise InstanceError(f"job {jid} task {t}: size must be a number")
            if not (math.isfinite(size) and size > 0):
                raise InstanceError(f"job {jid} task {t}: size must be positive (got {size!r})")
            pre = td.get("preemptive", True)
            if not isinstance(pre, bool):
                raise InstanceError(f"job {jid} task {t}: preemptive must be true or false")
            tasks.append(Task(t, float(size), pre))
        arr = jd["arrival"]
        if not isinstance(arr, (int, float)) or isinstance(arr, bool):
            raise InstanceError(f"job {jid}: arrival must be a number")
        jobs.append(Job(jid, float(arr), tuple(tasks)))
    m = doc["machines"]
    if not isinstance(m, int) or isinstance(m, bool):
        raise InstanceError(f"machines must be a positive integer (got {m!r})")
    return Instance(m, tuple(jobs), par)


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), separators=(",", ":")) + "\n", encoding="utf-8")


def load_instance(path) -> Instance:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InstanceError(f"{path}: malformed JSON: {e}") from None
    return instance_from_dict(doc)
