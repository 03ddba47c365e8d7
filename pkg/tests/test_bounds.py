from __future__ import annotations

import math

import pytest
from scipy import integrate, optimize

from msrpt.analysis.bounds import (
    BoundDomainError,
    busy_period_mean,
    cr_upper_bound,
    eta_mgf_bound,
    exp_max_expectation,
    mm1_srpt_bounds,
    psjf_workload_form,
    srpt_growth,
    srpt_mg1_mean_response,
)
from msrpt.analysis.heavy_traffic import analytic_growth_slope
from msrpt.distributions import BoundedUniform, Deterministic, Exponential, Pareto, Weibull


@pytest.mark.parametrize("a,b,v", [(1, 0, 8), (8, 2, 24), (2, 1, 14)])
def test_cr_upper_bound(a, b, v):
    assert cr_upper_bound(a, b) == v


def test_cr_upper_bound_domain():
    with pytest.raises(BoundDomainError):
        cr_upper_bound(0.5, 0)
    with pytest.raises(BoundDomainError):
        cr_upper_bound(1, -1)


def test_busy_period_mean():
    assert busy_period_mean(1, 0.5) == 2.0
    assert busy_period_mean(3, 0.0) == 3.0
    # additivity: exact with dyadic inputs, up to rounding otherwise
    for w1, w2, r in [(1.0, 2.0, 0.5), (0.25, 0.5, 0.75), (3.0, 5.0, 0.875)]:
        assert busy_period_mean(w1, r) + busy_period_mean(w2, r) == busy_period_mean(w1 + w2, r)
    for w1, w2, r in [(1.0, 2.0, 0.3), (3.0, 5.0, 0.9)]:
        assert busy_period_mean(w1, r) + busy_period_mean(w2, r) == pytest.approx(busy_period_mean(w1 + w2, r), rel=1e-15)
    with pytest.raises(BoundDomainError):
        busy_period_mean(1, 1.0)


def test_mm1_srpt_bounds():
    lo, hi = mm1_srpt_bounds(1.0, 1 - 1 / math.e)
    # log(1/(1-rho)) = 1 and 1-rho = 1/e: lower = e/(18e) = 1/18, upper = 7e
    assert lo == pytest.approx(1 / 18) and hi == pytest.approx(7 * math.e)
    for r in (0.1, 0.5, 0.99):
        l1, h1 = mm1_srpt_bounds(1.0, r)
        l3, h3 = mm1_srpt_bounds(3.0, r)
        assert l1 < h1 and l3 == pytest.approx(l1 / 3) and h3 == pytest.approx(h1 / 3)
    with pytest.raises(BoundDomainError):
        mm1_srpt_bounds(1.0, 1.0)
    with pytest.raises(BoundDomainError):
        mm1_srpt_bounds(0.0, 0.5)


def test_exp_max_expectation():
    assert exp_max_expectation(1, 1) == 1
    assert exp_max_expectation(2, 1) == 1.5
    assert exp_max_expectation(4, 2) == pytest.approx(25 / 24)
    with pytest.raises(BoundDomainError):
        exp_max_expectation(0, 1)


def test_psjf_workload_form():
    assert psjf_workload_form(Exponential(1), 0.8, 0.0) == 0.0
    assert psjf_workload_form(Deterministic(1.0), 0.5, 2.0) == pytest.approx(0.5)
    d = Exponential(1.0)
    m2, _ = integrate.quad(lambda t: t * t * math.exp(-t), 0, 1)
    m1, _ = integrate.quad(lambda t: t * math.exp(-t), 0, 1)
    assert psjf_workload_form(d, 0.8, 1.0) == pytest.approx(0.8 * m2 / (2 * (1 - 0.8 * m1)), rel=1e-10)
    with pytest.raises(BoundDomainError):
        psjf_workload_form(Deterministic(1.0), 1.5, 2.0)


def test_eta_mgf_bound_exponential():
    # independent oracle: bounded scalar minimisation of (1 + log(1/(1-s)))/s on (0, 1)
    ref = optimize.minimize_scalar(lambda s: (1 - math.log(1 - s)) / s, bounds=(1e-6, 1 - 1e-12), method="bounded",
                                   options={"xatol": 1e-12}).fun
    v = eta_mgf_bound(math.e, Exponential(1.0).mgf)
    assert v == pytest.approx(ref, rel=1e-9)
    assert v == pytest.approx(3.146193220620583, rel=1e-12)


def test_eta_mgf_bound_point_mass():
    # the objective tends to c from above as s grows; only rounding in
    # log(exp(c s))/s can put the grid-edge value a hair below c
    c = 2.0
    v = eta_mgf_bound(1.0, Deterministic(c).mgf)
    assert v >= c - 1e-9 and v == pytest.approx(c, rel=1e-6)


def test_eta_mgf_bound_monotone_in_tasks():
    vals = [eta_mgf_bound(n, Exponential(1.0).mgf) for n in (1.5, 2, 5, 20, 100)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_eta_mgf_bound_empty_domain():
    with pytest.raises(BoundDomainError):
        eta_mgf_bound(2.0, Pareto(1, 4).mgf)
    with pytest.raises(BoundDomainError):
        eta_mgf_bound(0.0, Exponential(1).mgf)


def test_srpt_growth_bounded_is_inverse_load():
    d = BoundedUniform(1, 2)
    vals = [srpt_growth(d, r) * (1 - r) for r in (0.9, 0.95, 0.99, 0.999)]
    assert all(0.4 < v < 1.1 for v in vals)


def test_srpt_growth_exponential_log_form():
    d = Exponential(1.0)
    for r in (0.9, 0.99, 0.999):
        ratio = srpt_growth(d, r) * (1 - r) * math.log(1 / (1 - r))
        assert 0.5 < ratio < 2.0


def test_srpt_growth_pareto_slope_uses_signed_index():
    # with the tail's upper Matuszewska index a = -alpha_p, (a+2)/(a+1) = (alpha_p-2)/(alpha_p-1)
    d = Pareto(1.0, 4.0)
    a = d.upper_matuszewska
    slope = analytic_growth_slope(d, (0.9, 0.95, 0.99, 0.999))
    assert slope == pytest.approx((a + 2) / (a + 1), abs=0.05)


def test_srpt_mg1_mean_response():
    # M/M/1 SRPT at rho=0.8, cross-checked against long simulations
    assert srpt_mg1_mean_response(Exponential(1.0), 0.8) == pytest.approx(2.35279, rel=1e-4)
    # point mass: every job waits FIFO, so M/D/1
    assert srpt_mg1_mean_response(Deterministic(1.0), 0.5) == pytest.approx(1.5)
    # refining the knot grid leaves the value stable
    d = Weibull(1.0, 0.7)
    lam = 0.8 / d.mean
    assert srpt_mg1_mean_response(d, lam) == pytest.approx(srpt_mg1_mean_response(d, lam, 20_000), rel=2e-4)
    with pytest.raises(BoundDomainError):
        srpt_mg1_mean_response(Exponential(1.0), 1.0)
