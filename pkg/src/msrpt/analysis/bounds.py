"""Closed-form bound calculators."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from ..distributions import SizeDistribution


class BoundDomainError(ValueError):
    pass


def cr_upper_bound(alpha: float, beta: float) -> float:
    """Competitive-ratio bound 4 log2(alpha) + 2 beta + 8 for M-SRPT."""
    if not alpha >= 1:
        raise BoundDomainError(f"alpha must be >= 1 (got {alpha!r})")
    if not beta >= 0:
        raise BoundDomainError(f"beta must be >= 0 (got {beta!r})")
    return 4.0 * math.log2(alpha) + 2.0 * beta + 8.0


def busy_period_mean(w: float, rho: float) -> float:
    """Mean length of a busy period started by work w at load rho: w / (1 - rho)."""
    if not 0.0 <= rho < 1.0:
        raise BoundDomainError(f"rho must lie in [0, 1) (got {rho!r})")
    if w < 0:
        raise BoundDomainError(f"initial work must be nonnegative (got {w!r})")
    return w / (1.0 - rho)


def _log_load(rho: float) -> float:
    if not 0.0 < rho < 1.0:
        raise BoundDomainError(f"rho must lie in (0, 1) (got {rho!r})")
    return math.log(1.0 / (1.0 - rho))


def mm1_srpt_bounds(mu: float, rho: float) -> tuple[float, float]:
    """Bracket for the M/M/1 SRPT mean response time (natural log).

    lower = (1/(18e)) / (mu (1-rho) ln(1/(1-rho))), upper = 7 / (same).
    """
    if not mu > 0:
        raise BoundDomainError(f"mu must be positive (got {mu!r})")
    den = mu * (1.0 - rho) * _log_load(rho)
    return (1.0 / (18.0 * math.e)) / den, 7.0 / den


def srpt_growth(dist: SizeDistribution, rho: float) -> float:
    """Constant-free growth proxy 1 / ((1 - rho) G^{-1}(rho))."""
    if not 0.0 < rho < 1.0:
        raise BoundDomainError(f"rho must lie in (0, 1) (got {rho!r})")
    g = dist.G_inv(rho)
    if not (math.isfinite(g) and g > 0):
        raise BoundDomainError(f"G_inv({rho}) is not a positive number for {dist.spec()}")
    return 1.0 / ((1.0 - rho) * g)


def exp_max_expectation(n: int, mu: float) -> float:
    """E[max of n i.i.d. Exp(mu)] = H_n / mu."""
    if int(n) != n or n < 1:
        raise BoundDomainError(f"n must be a positive integer (got {n!r})")
    if not mu > 0:
        raise BoundDomainError(f"mu must be positive (got {mu!r})")
    return math.fsum(1.0 / k for k in range(1, int(n) + 1)) / mu


def psjf_workload_form(dist: SizeDistribution, lam: float, x: float) -> float:
    """Mean PSJF work from jobs of size <= x: lam m2(x) / (2 (1 - rho(x)))."""
    if x < 0:
        raise BoundDomainError(f"x must be nonnegative (got {x!r})")
    rx = lam * float(dist.partial_mean(x))
    if rx >= 1.0:
        raise BoundDomainError(f"rho(x) = {rx!r} >= 1: the size-<=x class is unstable")
    return lam * float(dist.partial_m2(x)) / (2.0 * (1.0 - rx))


def _mgf_domain_edge(mgf: Callable[[float], float], s0: float, s_cap: float) -> float:
    def ok(s):
        try:
            v = mgf(s)
        except (OverflowError, ValueError, ZeroDivisionError):
            return False
        return bool(np.isfinite(v)) and v > 0

    if not ok(s0):
        raise BoundDomainError("moment generating function is not finite on the starting grid point")
    lo, hi = s0, 2.0 * s0
    while hi < s_cap and ok(hi):
        lo, hi = hi, 2.0 * hi
    if hi >= s_cap and ok(min(hi, s_cap)):
        return s_cap
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return hi


def eta_mgf_bound(
    mean_total_tasks: float,
    mgf: Callable[[float], float],
    s_min: float = 1e-4,
    s_cap: float = 1e4,
    n_grid: int = 64,
) -> float:
    """min over s of (log E[n_t] + log m(s)) / s for the expected largest task.

    The domain edge s_max is found by doubling from s_min (capped at
    s_cap); the objective is scanned on n_grid geometric points in
    [s_min, s_max) and the best point refined by golden-section search.
    """
    if not mean_total_tasks > 0:
        raise BoundDomainError(f"mean number of tasks must be positive (got {mean_total_tasks!r})")
    s_max = _mgf_domain_edge(mgf, s_min, s_cap)
    if not s_max > s_min:
        raise BoundDomainError("empty moment generating function domain")
    grid = np.geomspace(s_min, s_max, n_grid + 1)[:-1]
    log_n = math.log(mean_total_tasks)

    def obj(s):
        return (log_n + math.log(mgf(s))) / s

    vals = np.array([obj(s) for s in grid])
    i = int(np.argmin(vals))
    best = float(vals[i])
    if 0 < i < n_grid - 1:
        try:
            res = optimize.minimize_scalar(obj, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden", tol=1e-12)
            if res.fun < best and grid[0] <= res.x < s_max:
                best = float(res.fun)
        except (ValueError, OverflowError):
            pass
    return best


def srpt_mg1_mean_response(dist: SizeDistribution, lam: float, n_knots: int = 4000) -> float:
    """M/G/1 SRPT mean response time from the Schrage-Miller formula.

    T(x) = lam (m2(x) + x^2 (1 - F(x))) / (2 (1 - rho(x))^2) + int_0^x dt / (1 - rho(t)),
    rho(x) = lam m1(x). The outer average uses the substitution x = F^{-1}(u)
    on a grid in u that is dense near 1, so heavy tails are handled.
    """
    rho = lam * dist.mean
    if not 0 < rho < 1:
        raise BoundDomainError(f"load {rho!r} outside (0, 1)")
    lo, hi = dist.support
    if lo == hi:
        # point mass: no job ever overtakes another, so this is M/D/1 FCFS
        return lam * lo * lo / (2.0 * (1.0 - rho)) + lo
    half = n_knots // 2
    u = np.unique(np.concatenate((np.linspace(0.0, 0.99, half), 1.0 - np.geomspace(1e-2, 1e-14, half))))
    if math.isfinite(hi):
        u = np.append(u[u < 1.0], 1.0)
    x = np.asarray(dist.ppf(u), dtype=float)
    x[0] = lo
    r = lam * np.asarray(dist.partial_mean(x), dtype=float)
    wait = lam * (np.asarray(dist.partial_m2(x)) + x * x * (1.0 - np.asarray(dist.cdf(x)))) / (2.0 * (1.0 - r) ** 2)
    resid = lo + integrate.cumulative_trapezoid(1.0 / (1.0 - r), x, initial=0.0)
    return float(integrate.trapezoid(wait + resid, u))
