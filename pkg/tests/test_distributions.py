from __future__ import annotations

import math

import numpy as np
import pytest

from msrpt import rng
from msrpt.distributions import (
    BoundedPareto,
    BoundedUniform,
    Deterministic,
    DistributionError,
    Exponential,
    Pareto,
    Weibull,
    ks_statistic,
    parse_distribution,
)

CATALOGUE = [
    "exp:mu=1",
    "exp:mu=2.5",
    "uniform:a=1,b=2",
    "weibull:mu=1,alpha=2",
    "weibull:mu=2,alpha=0.5",
    "pareto:xmin=1,alpha=4",
    "pareto:xmin=0.5,alpha=6",
    "bpareto:xmin=1,xmax=100,alpha=1.5",
]


@pytest.fixture(params=CATALOGUE)
def dist(request):
    return parse_distribution(request.param)


def test_density_integrates_to_one(dist):
    assert dist.pdf_integral() == pytest.approx(1.0, abs=1e-6)


def test_partial_moments_match_quadrature(dist):
    for y in (0.5, 1.0, 1.7, 3.0, 10.0):
        assert float(dist.partial_mean(y)) == pytest.approx(dist.partial_moment_quad(y, 1), rel=1e-7, abs=1e-10)
        assert float(dist.partial_m2(y)) == pytest.approx(dist.partial_moment_quad(y, 2), rel=1e-7, abs=1e-10)


def test_cdf_ppf_roundtrip(dist):
    u = np.linspace(0.01, 0.99, 25)
    assert np.allclose(dist.cdf(dist.ppf(u)), u, rtol=1e-9, atol=1e-12)


def test_ks_sample_matches_cdf(dist):
    n = 100_000
    x = dist.sample(rng.uniforms(11, "size", n))
    # Kolmogorov-Smirnov critical value at level 0.01
    assert ks_statistic(dist, x) < 1.628 / math.sqrt(n)


def test_G_inverse_roundtrip(dist):
    G = dist.G
    for u in (0.05, 0.3, 0.5, 0.9, 0.99):
        y = dist.G_inv(u)
        assert float(G(y)) == pytest.approx(u, rel=1e-9)
    g = np.random.default_rng(0)
    lo, hi = dist.support
    top = hi if math.isfinite(hi) else float(dist.ppf(0.999))
    for y in g.uniform(max(lo, 1e-3), top, 10):
        assert dist.G_inv(float(G(y))) == pytest.approx(y, rel=1e-8)


def test_G_monotone(dist):
    ys = np.linspace(0, 20, 200)
    g = np.asarray(dist.G(ys))
    assert np.all(np.diff(g) >= 0) and g[0] == 0 and g[-1] <= 1 + 1e-12


def test_deterministic_G_jump():
    d = Deterministic(2.0)
    assert float(d.G(1.999)) == 0.0 and float(d.G(2.0)) == 1.0
    for u in (1e-9, 0.5, 1 - 1e-9):
        assert d.G_inv(u) == 2.0
    assert d.mean == 2.0 and d.second_moment == 4.0
    assert np.all(d.sample(rng.uniforms(0, "size", 10)) == 2.0)


def test_exponential_G_inv_closed_form_against_bisection():
    d = Exponential(1.7)
    from msrpt.distributions import SizeDistribution

    for u in (0.1, 0.5, 0.9, 0.999):
        assert d.G_inv(u) == pytest.approx(SizeDistribution.G_inv(d, u), rel=1e-10)


def test_pareto_G_inv_closed_form_against_bisection():
    d = Pareto(1.0, 4.0)
    from msrpt.distributions import SizeDistribution

    for u in (0.1, 0.5, 0.9, 0.999):
        assert d.G_inv(u) == pytest.approx(SizeDistribution.G_inv(d, u), rel=1e-10)


@pytest.mark.parametrize("r", [0.9, 0.99, 0.999])
def test_exponential_G_inv_log_growth(r):
    ratio = Exponential(1.0).G_inv(r) / math.log(1 / (1 - r))
    assert 0.5 <= ratio <= 2.0


@pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
def test_G_inv_domain(u, dist):
    with pytest.raises(DistributionError):
        dist.G_inv(u)


def test_means():
    assert Exponential(2.0).mean == 0.5
    assert BoundedUniform(1, 2).mean == 1.5
    assert Pareto(1, 4).mean == pytest.approx(4 / 3)
    assert Weibull(1, 1).mean == pytest.approx(1.0)
    assert Weibull(1, 2).mean == pytest.approx(math.gamma(1.5))
    assert BoundedPareto(1, 100, 1.5).mean == pytest.approx(BoundedPareto(1, 100, 1.5).partial_moment_quad(100, 1))


def test_pareto_matuszewska_index():
    assert Pareto(1, 4).upper_matuszewska == -4
    assert Exponential(1).upper_matuszewska == -math.inf


@pytest.mark.parametrize(
    "bad",
    ["pareto:xmin=1,alpha=3", "exp:mu=0", "exp:mu=-1", "uniform:a=2,b=1", "det:c=0", "weibull:mu=0,alpha=2",
     "nope:x=1", "exp:lambda=1", "exp:mu=abc", "exp:mu", "bpareto:xmin=2,xmax=1,alpha=1"],
)
def test_parse_errors(bad):
    with pytest.raises(DistributionError):
        parse_distribution(bad)


def test_spec_roundtrip(dist):
    assert parse_distribution(dist.spec()) == dist


def test_mgf():
    assert Exponential(1).mgf(0.5) == pytest.approx(2.0)
    assert Exponential(1).mgf(1.0) == math.inf
    assert Deterministic(2).mgf(1.0) == pytest.approx(math.e**2)
    assert BoundedUniform(1, 2).mgf(1.0) == pytest.approx(math.e**2 - math.e)
    assert Pareto(1, 4).mgf(0.1) == math.inf
    w = Weibull(1, 2)
    # power series with E[X^k] = Gamma(1 + k/2) for this Weibull
    series = math.fsum(0.5**k * math.gamma(1 + k / 2) / math.factorial(k) for k in range(80))
    assert w.mgf(0.5) == pytest.approx(series, rel=1e-8)
