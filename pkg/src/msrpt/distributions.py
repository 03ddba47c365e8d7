"""Job-size laws with closed-form partial moments.

Every law exposes density, CDF, quantile function, mean, and the partial
moments m1(y) = int_0^y t f(t) dt and m2(y) = int_0^y t^2 f(t) dt that the
load function rho(y) and the PSJF workload formula need. Sampling is by
inversion of uniforms so that a given uniform stream maps to a fixed sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats


class DistributionError(ValueError):
    pass


def _arr(x):
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class SizeDistribution:
    """Base class; subclasses fill in the closed forms."""

    #: upper Matuszewska index of the tail 1 - F (-inf for light or bounded tails)
    upper_matuszewska = -math.inf
    kind = "base"

    # --- to be provided by subclasses -------------------------------------
    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def ppf(self, u):
        raise NotImplementedError

    def partial_mean(self, y):
        raise NotImplementedError

    def partial_m2(self, y):
        raise NotImplementedError

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def spec(self) -> str:
        raise NotImplementedError

    # --- generic ----------------------------------------------------------
    @property
    def mean(self) -> float:
        return float(self.partial_mean(math.inf))

    @property
    def second_moment(self) -> float:
        return float(self.partial_m2(math.inf))

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.support[1])

    def sample(self, u) -> np.ndarray:
        return self.ppf(u)

    def G(self, y):
        """Fraction of the load carried by jobs of size <= y."""
        return self.partial_mean(y) / self.mean

    def G_inv(self, u: float) -> float:
        """Left-continuous generalized inverse inf{y : G(y) >= u}, u in (0, 1)."""
        u = float(u)
        if not 0.0 < u < 1.0:
            raise DistributionError(f"G_inv needs u in (0, 1) (got {u!r})")
        lo, hi = self.support
        lo = max(lo, 0.0)
        if not math.isfinite(hi):
            hi = max(1.0, 2.0 * lo)
            while self.G(hi) < u:
                hi *= 2.0
                if hi > 1e300:
                    raise DistributionError("G_inv bracket search diverged")
        # bisection keeps G(lo) < u <= G(hi); it also finds jump points of G
        for _ in range(400):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi or hi - lo <= 1e-13 * hi:
                break
            if self.G(mid) >= u:
                hi = mid
            else:
                lo = mid
        return hi

    def partial_moment_quad(self, y: float, k: int = 1) -> float:
        """Quadrature cross-check of int_0^y t^k f(t) dt."""
        lo, hi = self.support
        b = min(y, hi)
        if b <= lo:
            return 0.0
        val, _ = integrate.quad(lambda t: t**k * self.pdf(t), lo, b, epsabs=1e-12, epsrel=1e-12, limit=500)
        return val

    def mgf(self, s: float) -> float:
        """E[exp(s X)] by quadrature; inf where the integral diverges."""
        lo, hi = self.support
        if s <= 0 or math.isfinite(hi):
            with np.errstate(over="ignore"):
                v, _ = integrate.quad(lambda x: float(self.pdf(x)) * math.exp(s * x), lo, hi, limit=200)
            return v
        # unbounded support: finite only for tails lighter than exponential
        x = lo + 1.0
        for _ in range(60):
            x *= 2.0
            if float(self.pdf(x)) * math.exp(min(s * x, 700.0)) > 1e300 or s * x > 700:
                break
            if float(self.pdf(x)) * math.exp(s * x) < 1e-300:
                v, _ = integrate.quad(lambda t: float(self.pdf(t)) * math.exp(s * t), lo, x, limit=200)
                return v
        return math.inf

    def pdf_integral(self) -> float:
        lo, hi = self.support
        val, _ = integrate.quad(lambda t: self.pdf(t), lo, hi, epsabs=1e-12, epsrel=1e-12, limit=500)
        return val


@dataclass(frozen=True)
class Deterministic(SizeDistribution):
    c: float = 1.0
    kind = "det"

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise DistributionError(f"det: c must be positive (got {self.c!r})")

    def pdf(self, x):
        # point mass: no density; zero keeps quadrature callers well-defined
        return np.zeros_like(_arr(x))[()]

    def cdf(self, x):
        return np.where(_arr(x) >= self.c, 1.0, 0.0)[()]

    def ppf(self, u):
        return np.full_like(_arr(u), self.c)[()]

    def partial_mean(self, y):
        return np.where(_arr(y) >= self.c, self.c, 0.0)[()]

    def partial_m2(self, y):
        return np.where(_arr(y) >= self.c, self.c * self.c, 0.0)[()]

    def G_inv(self, u):
        if not 0.0 < u < 1.0:
            raise DistributionError(f"G_inv needs u in (0, 1) (got {u!r})")
        return self.c

    def partial_moment_quad(self, y, k=1):
        return self.c**k if y >= self.c else 0.0

    def pdf_integral(self):
        return 1.0

    def mgf(self, s):
        return math.exp(s * self.c) if s * self.c < 709 else math.inf

    @property
    def support(self):
        return (self.c, self.c)

    def spec(self):
        return f"det:c={self.c!r}"


@dataclass(frozen=True)
class BoundedUniform(SizeDistribution):
    a: float = 1.0
    b: float = 2.0
    kind = "uniform"

    def __post_init__(self):
        if not (0 <= self.a < self.b < math.inf):
            raise DistributionError(f"uniform: need 0 <= a < b (got a={self.a!r}, b={self.b!r})")

    def pdf(self, x):
        x = _arr(x)
        return np.where((x >= self.a) & (x <= self.b), 1.0 / (self.b - self.a), 0.0)[()]

    def cdf(self, x):
        return np.clip((_arr(x) - self.a) / (self.b - self.a), 0.0, 1.0)[()]

    def ppf(self, u):
        return (self.a + _arr(u) * (self.b - self.a))[()]

    def partial_mean(self, y):
        z = np.clip(_arr(y), self.a, self.b)
        return ((z * z - self.a**2) / (2 * (self.b - self.a)))[()]

    def partial_m2(self, y):
        z = np.clip(_arr(y), self.a, self.b)
        return ((z**3 - self.a**3) / (3 * (self.b - self.a)))[()]

    def mgf(self, s):
        if s == 0:
            return 1.0
        try:
            return (math.exp(s * self.b) - math.exp(s * self.a)) / (s * (self.b - self.a))
        except OverflowError:
            return math.inf

    @property
    def support(self):
        return (self.a, self.b)

    def spec(self):
        return f"uniform:a={self.a!r},b={self.b!r}"


@dataclass(frozen=True)
class Exponential(SizeDistribution):
    mu: float = 1.0
    kind = "exp"

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise DistributionError(f"exp: mu must be positive (got {self.mu!r})")

    def pdf(self, x):
        x = _arr(x)
        return np.where(x >= 0, self.mu * np.exp(-self.mu * np.maximum(x, 0)), 0.0)[()]

    def cdf(self, x):
        return (-np.expm1(-self.mu * np.maximum(_arr(x), 0.0)))[()]

    def ppf(self, u):
        return (-np.log1p(-_arr(u)) / self.mu)[()]

    def partial_mean(self, y):
        z = self.mu * np.maximum(_arr(y), 0.0)
        with np.errstate(invalid="ignore"):
            tail = np.where(np.isinf(z), 0.0, np.exp(-z) * (1 + z))
        return ((1 - tail) / self.mu)[()]

    def partial_m2(self, y):
        z = self.mu * np.maximum(_arr(y), 0.0)
        with np.errstate(invalid="ignore"):
            tail = np.where(np.isinf(z), 0.0, np.exp(-z) * (z * z + 2 * z + 2))
        return ((2 - tail) / self.mu**2)[()]

    def G_inv(self, u):
        # G(y) = 1 - e^{-z}(1+z), z = mu*y  =>  z = -1 - W_{-1}(-(1-u)/e)
        if not 0.0 < u < 1.0:
            raise DistributionError(f"G_inv needs u in (0, 1) (got {u!r})")
        w = special.lambertw(-(1.0 - u) / math.e, -1).real
        return float((-1.0 - w) / self.mu)

    def mgf(self, s):
        return self.mu / (self.mu - s) if s < self.mu else math.inf

    @property
    def support(self):
        return (0.0, math.inf)

    def spec(self):
        return f"exp:mu={self.mu!r}"


@dataclass(frozen=True)
class Weibull(SizeDistribution):
    """F(x) = 1 - exp(-mu x^alpha)."""

    mu: float = 1.0
    alpha: float = 2.0
    kind = "weibull"

    def __post_init__(self):
        if not (self.mu > 0 and self.alpha > 0 and math.isfinite(self.mu) and math.isfinite(self.alpha)):
            raise DistributionError(f"weibull: need mu > 0, alpha > 0 (got mu={self.mu!r}, alpha={self.alpha!r})")

    def pdf(self, x):
        x = np.maximum(_arr(x), 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = self.mu * self.alpha * x ** (self.alpha - 1) * np.exp(-self.mu * x**self.alpha)
        return np.where(x > 0, v, 0.0)[()]

    def cdf(self, x):
        return (-np.expm1(-self.mu * np.maximum(_arr(x), 0.0) ** self.alpha))[()]

    def ppf(self, u):
        return ((-np.log1p(-_arr(u)) / self.mu) ** (1.0 / self.alpha))[()]

    def _partial(self, y, k):
        s = 1.0 + k / self.alpha
        z = self.mu * np.maximum(_arr(y), 0.0) ** self.alpha
        return (self.mu ** (-k / self.alpha) * special.gamma(s) * special.gammainc(s, z))[()]

    def partial_mean(self, y):
        return self._partial(y, 1)

    def partial_m2(self, y):
        return self._partial(y, 2)

    @property
    def support(self):
        return (0.0, math.inf)

    def spec(self):
        return f"weibull:mu={self.mu!r},alpha={self.alpha!r}"


@dataclass(frozen=True)
class Pareto(SizeDistribution):
    """F(x) = 1 - (xmin/x)^alpha for x >= xmin, alpha >= 4."""

    xmin: float = 1.0
    alpha: float = 4.0
    kind = "pareto"

    def __post_init__(self):
        if not (self.xmin > 0 and math.isfinite(self.xmin)):
            raise DistributionError(f"pareto: xmin must be positive (got {self.xmin!r})")
        if not self.alpha >= 4:
            raise DistributionError(f"pareto: alpha must be >= 4 (got {self.alpha!r})")

    @property
    def upper_matuszewska(self):
        return -self.alpha

    def pdf(self, x):
        x = _arr(x)
        with np.errstate(divide="ignore"):
            v = self.alpha * self.xmin**self.alpha / np.maximum(x, self.xmin) ** (self.alpha + 1)
        return np.where(x >= self.xmin, v, 0.0)[()]

    def cdf(self, x):
        x = np.maximum(_arr(x), self.xmin)
        return (1.0 - (self.xmin / x) ** self.alpha)[()]

    def ppf(self, u):
        return (self.xmin * (1.0 - _arr(u)) ** (-1.0 / self.alpha))[()]

    def _partial(self, y, k):
        z = np.maximum(_arr(y), self.xmin)
        a = self.alpha
        return (a * self.xmin**k / (a - k) * (1.0 - (self.xmin / z) ** (a - k)))[()]

    def partial_mean(self, y):
        return self._partial(y, 1)

    def partial_m2(self, y):
        return self._partial(y, 2)

    def G_inv(self, u):
        # G(y) = 1 - (xmin/y)^(alpha-1)
        if not 0.0 < u < 1.0:
            raise DistributionError(f"G_inv needs u in (0, 1) (got {u!r})")
        return self.xmin * (1.0 - u) ** (-1.0 / (self.alpha - 1.0))

    def mgf(self, s):
        return math.inf if s > 0 else super().mgf(s)

    @property
    def support(self):
        return (self.xmin, math.inf)

    def spec(self):
        return f"pareto:xmin={self.xmin!r},alpha={self.alpha!r}"


@dataclass(frozen=True)
class BoundedPareto(SizeDistribution):
    """Pareto(xmin, alpha) conditioned on x <= xmax."""

    xmin: float = 1.0
    xmax: float = 100.0
    alpha: float = 1.5
    kind = "bpareto"

    def __post_init__(self):
        if not (0 < self.xmin < self.xmax < math.inf):
            raise DistributionError(f"bpareto: need 0 < xmin < xmax (got {self.xmin!r}, {self.xmax!r})")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DistributionError(f"bpareto: alpha must be positive (got {self.alpha!r})")

    @property
    def _norm(self):
        return 1.0 - (self.xmin / self.xmax) ** self.alpha

    def pdf(self, x):
        x = _arr(x)
        inside = (x >= self.xmin) & (x <= self.xmax)
        v = self.alpha * self.xmin**self.alpha / np.clip(x, self.xmin, self.xmax) ** (self.alpha + 1) / self._norm
        return np.where(inside, v, 0.0)[()]

    def cdf(self, x):
        x = np.clip(_arr(x), self.xmin, self.xmax)
        return ((1.0 - (self.xmin / x) ** self.alpha) / self._norm)[()]

    def ppf(self, u):
        return (self.xmin * (1.0 - _arr(u) * self._norm) ** (-1.0 / self.alpha))[()]

    def _partial(self, y, k):
        z = np.clip(_arr(y), self.xmin, self.xmax)
        a, L = self.alpha, self.xmin
        c = a * L**a / self._norm
        if abs(a - k) < 1e-12:
            v = c * np.log(z / L)
        else:
            v = c * (L ** (k - a) - z ** (k - a)) / (a - k)
        return v[()]

    def partial_mean(self, y):
        return self._partial(y, 1)

    def partial_m2(self, y):
        return self._partial(y, 2)

    @property
    def support(self):
        return (self.xmin, self.xmax)

    def spec(self):
        return f"bpareto:xmin={self.xmin!r},xmax={self.xmax!r},alpha={self.alpha!r}"


_KINDS = {
    "det": (Deterministic, ("c",)),
    "uniform": (BoundedUniform, ("a", "b")),
    "exp": (Exponential, ("mu",)),
    "weibull": (Weibull, ("mu", "alpha")),
    "pareto": (Pareto, ("xmin", "alpha")),
    "bpareto": (BoundedPareto, ("xmin", "xmax", "alpha")),
}


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, eq, val = part.partition("=")
        if not eq:
            raise ValueError(f"expected key=value, got {part!r}")
        out[key.strip()] = val.strip()
    return out


def parse_distribution(text: str) -> SizeDistribution:
    """Parse specs such as ``exp:mu=1`` or ``pareto:xmin=1,alpha=4``."""
    name, _, rest = text.strip().partition(":")
    name = name.lower()
    if name not in _KINDS:
        raise DistributionError(f"unknown distribution {name!r} (known: {', '.join(_KINDS)})")
    cls, allowed = _KINDS[name]
    try:
        kv = parse_kv(rest)
    except ValueError as e:
        raise DistributionError(f"{text!r}: {e}") from None
    unknown = set(kv) - set(allowed)
    if unknown:
        raise DistributionError(f"{name}: unknown parameter(s) {sorted(unknown)} (allowed: {list(allowed)})")
    try:
        args = {k: float(v) for k, v in kv.items()}
    except ValueError:
        raise DistributionError(f"{text!r}: parameters must be numbers") from None
    return cls(**args)


def ks_statistic(dist: SizeDistribution, samples: np.ndarray) -> float:
    """Kolmogorov-Smirnov distance between samples and the law's CDF."""
    return float(stats.kstest(np.asarray(samples), lambda x: dist.cdf(x)).statistic)

