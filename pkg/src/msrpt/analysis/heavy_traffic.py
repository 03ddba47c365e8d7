"""Stochastic experiments: heavy-traffic ratio curves, growth slopes, busy periods.

All estimates are built from independent replications; confidence
intervals are percentile bootstrap intervals over per-replication means.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .. import rng
from ..distributions import SizeDistribution
from ..fastsim import simulate_arrays
from ..schedulers import PolicyKind, PolicySpec
from ..workload_gen import TaskSplit, lam_for_rho, sample_arrays

WARMUP = 0.1
N_BOOT = 1000
CONFIDENCE = 0.95


class StabilityError(ValueError):
    """Requested load is at or above 1."""


def check_rho(rho: float) -> None:
    if not 0.0 < rho < 1.0:
        raise StabilityError(f"load rho={rho!r} is not in (0, 1); the queue would be unstable")


def bootstrap_ci(
    samples: Sequence[np.ndarray],
    statistic: Callable,
    seed: int,
    *key: int,
    paired: bool = False,
    n_resamples: int = N_BOOT,
) -> tuple[float, float]:
    """Percentile bootstrap CI of a vectorised statistic (signature f(*arrays, axis)).

    Degenerate inputs (fewer than two samples, or constant samples) give
    the point estimate as both endpoints.
    """
    arrays = [np.asarray(s, dtype=float) for s in samples]
    est = float(statistic(*arrays, axis=-1))
    if len(arrays[0]) < 2 or all(np.ptp(a) == 0 for a in arrays):
        return est, est
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", stats.DegenerateDataWarning)
        res = stats.bootstrap(
            tuple(arrays),
            statistic,
            paired=paired,
            vectorized=True,
            n_resamples=n_resamples,
            confidence_level=CONFIDENCE,
            method="percentile",
            rng=rng.stream(seed, "bootstrap", *key),
        )
    return float(res.confidence_interval.low), float(res.confidence_interval.high)


def mean_ci(x: Sequence[float], seed: int, *key: int) -> tuple[float, float, float]:
    """(mean, lo, hi) of replication means."""
    x = np.asarray(x, dtype=float)
    lo, hi = bootstrap_ci([x], np.mean, seed, *key)
    return float(np.mean(x)), lo, hi


def _ratio_of_means(a, b, axis=-1):
    return np.mean(a, axis=axis) / np.mean(b, axis=axis)


def _diff_of_means(a, b, axis=-1):
    return np.mean(a, axis=axis) - np.mean(b, axis=axis)


def replication_means(
    dist: SizeDistribution,
    split: TaskSplit,
    machines: int,
    rho: float,
    policies: Sequence[PolicySpec],
    reps: int,
    horizon_jobs: int,
    seed: int,
    warmup: float = WARMUP,
    parallel_tasks: bool = False,
    threads: int = 1,
) -> np.ndarray:
    """Post-warm-up mean flow per (replication, policy), shape (reps, len(policies)).

    Replication r uses seed ``seed + r`` for every load and policy, so the
    policies see the same jobs and neighbouring loads share random numbers.
    """
    check_rho(rho)
    lam = lam_for_rho(dist, rho, machines)

    def one(r: int) -> list[float]:
        arr = sample_arrays(dist, split, lam, horizon_jobs, machines, rng.replication_seed(seed, r), parallel_tasks)
        return [simulate_arrays(arr, p, warmup=warmup).mean_flow(warmup) for p in policies]

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(one, range(reps)))  # map keeps replication order
    else:
        rows = [one(r) for r in range(reps)]
    return np.array(rows, dtype=float).reshape(reps, len(policies))


@dataclass
class RatioPoint:
    rho: float
    lam: float
    reps: int
    mean_msrpt: float
    mean_srpt1n: float
    ratio: float
    ratio_lo: float
    ratio_hi: float
    gap: float
    gap_lo: float
    gap_hi: float

    def row(self) -> dict:
        return asdict(self)


RATIO_FIELDS = list(RatioPoint.__dataclass_fields__)


def ratio_point(rho: float, lam: float, a: np.ndarray, b: np.ndarray, seed: int, idx: int) -> RatioPoint:
    lo, hi = bootstrap_ci([a, b], _ratio_of_means, seed, idx, 0, paired=True)
    glo, ghi = bootstrap_ci([a, b], _diff_of_means, seed, idx, 1, paired=True)
    return RatioPoint(
        rho, lam, len(a), float(np.mean(a)), float(np.mean(b)),
        float(_ratio_of_means(a, b)), lo, hi, float(_diff_of_means(a, b)), glo, ghi,
    )


def heavy_traffic_ratio_curve(
    dist: SizeDistribution,
    split: TaskSplit,
    machines: int,
    rho_grid: Sequence[float],
    reps: int,
    horizon_jobs: int,
    seed: int,
    *,
    warmup: float = WARMUP,
    parallel_tasks: bool = False,
    threads: int = 1,
) -> list[RatioPoint]:
    """E[F] of M-SRPT over E[F] of SRPT on one speed-N server, per load.

    Both policies run on identical sampled instances; the CI is a paired
    percentile bootstrap over replication means.
    """
    for r in rho_grid:
        check_rho(r)
    if reps < 2:
        raise ValueError("at least two replications are needed for a confidence interval")
    pol = (PolicySpec(PolicyKind.M_SRPT), PolicySpec(PolicyKind.SRPT_1N))
    out = []
    for i, r in enumerate(rho_grid):
        m = replication_means(dist, split, machines, r, pol, reps, horizon_jobs, seed, warmup, parallel_tasks, threads)
        out.append(ratio_point(float(r), lam_for_rho(dist, r, machines), m[:, 0], m[:, 1], seed, i))
    return out


def nonincreasing_within_ci(points: Sequence[RatioPoint]) -> bool:
    """Each ratio is below its predecessor, or the two CIs overlap."""
    for p, q in zip(points, points[1:]):
        if q.ratio > p.ratio and q.ratio_lo > p.ratio_hi:
            return False
    return True


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    return float(stats.linregress(np.log(x), np.log(y)).slope)


def gap_slope(points: Sequence[RatioPoint]) -> float:
    """Slope of the additive gap fitted against ln(1/(1-rho))."""
    x = [math.log(1.0 / (1.0 - p.rho)) for p in points]
    return float(stats.linregress(x, [p.gap for p in points]).slope)


def single_server_means(
    dist: SizeDistribution,
    rho: float,
    reps: int,
    n_jobs: int,
    seed: int,
    policy: PolicySpec | None = None,
    warmup: float = WARMUP,
    threads: int = 1,
) -> np.ndarray:
    """Replication means of the flow time in an M/GI/1 queue (unit speed)."""
    policy = PolicySpec(PolicyKind.SRPT_1N) if policy is None else policy
    return replication_means(dist, TaskSplit(), 1, rho, (policy,), reps, n_jobs, seed, warmup, threads=threads)[:, 0]


def growth_slope(
    dist: SizeDistribution,
    rho_grid: Sequence[float],
    reps: int,
    n_jobs: int,
    seed: int,
    policy: PolicySpec | None = None,
    threads: int = 1,
) -> tuple[float, list[float]]:
    """Log-log slope of simulated mean flow against 1/(1-rho)."""
    means = [float(np.mean(single_server_means(dist, r, reps, n_jobs, seed, policy, threads=threads))) for r in rho_grid]
    return loglog_slope([1.0 / (1.0 - r) for r in rho_grid], means), means


def analytic_growth_slope(dist: SizeDistribution, rho_grid: Sequence[float]) -> float:
    """Log-log slope of the constant-free proxy 1/((1-rho) G^{-1}(rho))."""
    from .bounds import srpt_growth

    return loglog_slope([1.0 / (1.0 - r) for r in rho_grid], [srpt_growth(dist, r) for r in rho_grid])


@dataclass
class BusyPeriodFit:
    rho: float
    n_periods: int
    slope: float
    slope_stderr: float
    intercept: float
    expected_slope: float
    mean_length: float
    mean_work: float


def busy_period_regression(
    dist: SizeDistribution, rho: float, n_jobs: int, seed: int, warmup: float = WARMUP
) -> BusyPeriodFit:
    """Regress M/GI/1 busy-period length on the work that started it.

    Each busy period of a work-conserving single server that starts with
    work w lasts w/(1-rho) on average, so the fitted slope estimates
    1/(1-rho).
    """
    check_rho(rho)
    lam = rho / dist.mean
    arr = sample_arrays(dist, TaskSplit(), lam, n_jobs, 1, seed)
    res = simulate_arrays(arr, PolicySpec(PolicyKind.FCFS), warmup=warmup)
    k = int(len(res.bp_start) * warmup)
    L, W = res.bp_length[k:], res.bp_work[k:]
    fit = stats.linregress(W, L)
    return BusyPeriodFit(
        rho, len(L), float(fit.slope), float(fit.stderr), float(fit.intercept),
        1.0 / (1.0 - rho), float(np.mean(L)), float(np.mean(W)),
    )


@dataclass
class PsjfCheck:
    x: float
    formula: float
    time_avg: float
    arrival_avg: float
    rel_err_formula: float
    rel_err_pasta: float


def psjf_workload_check(
    dist: SizeDistribution,
    lam: float,
    xs: Sequence[float],
    n_jobs: int,
    reps: int,
    seed: int,
    warmup: float = WARMUP,
) -> list[PsjfCheck]:
    """Simulated PSJF W_<=x (time and arrival averages) against the closed form."""
    from .bounds import psjf_workload_form

    check_rho(lam * dist.mean)
    ti = np.zeros(len(xs))
    ar = np.zeros(len(xs))
    for r in range(reps):
        arr = sample_arrays(dist, TaskSplit(), lam, n_jobs, 1, rng.replication_seed(seed, r))
        res = simulate_arrays(arr, PolicySpec(PolicyKind.PSJF_1N), xgrid=xs, warmup=warmup)
        ti += res.w_time_avg
        ar += res.w_arrival_avg
    ti /= reps
    ar /= reps
    out = []
    for i, x in enumerate(xs):
        f = psjf_workload_form(dist, lam, x)
        out.append(PsjfCheck(float(x), f, float(ti[i]), float(ar[i]), abs(ti[i] - f) / f, abs(ar[i] - ti[i]) / ti[i]))
    return out
