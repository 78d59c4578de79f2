"""Regeneration-period distributions and their derived laws.

Every distribution here lives on [0, inf) and exposes the same surface:
cdf, density (where it exists), generalized inverse, raw moments, moment
generating function, and the integrated survival function that the
equilibrium (stationary-age) law is built from.

Two derived constructions matter for the coupling machinery:

* ``equilibrium(d)`` -- the integrated-tail law with density (1-F(s))/mu,
  i.e. the stationary age distribution of the renewal process driven by d;
* ``overshoot(d, a)`` -- the residual-period law given elapsed age a,
  F_a(s) = (F(s+a) - F(a)) / (1 - F(a)).

Moments and mgf of derived laws are computed by quadrature against their
densities (one code path, oracle-testable); parametric families use
closed forms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from .quadrature import (DEFAULT_TOL, DivergentIntegral, adaptive_simpson,
                         integrate_segments, tail_integral)

__all__ = [
    "SpecError",
    "Distribution",
    "Exponential",
    "Gamma",
    "Weibull",
    "Uniform",
    "HyperExponential",
    "TabulatedCdf",
    "Equilibrium",
    "Overshoot",
    "DelaySpec",
    "DelayStart",
    "MomentSummary",
    "validate",
    "equilibrium",
    "overshoot",
    "evaluate",
    "from_spec",
    "parse_dist",
    "moment_summary",
]

_TAIL_EPS = 1e-14
_QUANTILE_TOL = 1e-12


class SpecError(ValueError):
    """A distribution or run specification violates its contract."""


def _bisect_nondecreasing(fn, target, lo, hi, tol):
    """Generalized inverse inf{x : fn(x) >= target} on a bracket.

    Maintains fn(hi) >= target > fn(lo); works for flats and jumps.
    """
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if fn(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


class Distribution:
    """Base class: a law on [0, inf) with an absolutely continuous part."""

    kind = "abstract"

    # -- core surface, overridden per family ------------------------------

    def cdf(self, s: float) -> float:
        raise NotImplementedError

    def pdf(self, s: float) -> float | None:
        """Density where the derivative of the cdf exists, else None."""
        raise NotImplementedError

    def quantile(self, y: float) -> float:
        """Generalized inverse inf{x : F(x) >= y} for y in [0, 1)."""
        raise NotImplementedError

    def integral_survival(self, s: float) -> float:
        """Integral of (1 - F(u)) du over [0, s]; equals the mean at s=inf."""
        raise NotImplementedError

    def mgf_abscissa(self) -> float:
        """Supremum of rates a with E exp(a X) finite (may be inf or 0)."""
        raise NotImplementedError

    def spec_dict(self) -> dict:
        raise NotImplementedError

    # -- shared behaviour --------------------------------------------------

    @cached_property
    def mean(self) -> float:
        return self.raw_moment(1)

    def raw_moment(self, k: float) -> float:
        raise NotImplementedError

    def mgf(self, a: float) -> float:
        raise NotImplementedError

    def atoms(self) -> tuple[tuple[float, float], ...]:
        """(position, mass) pairs of point masses; empty for a.c. laws."""
        return ()

    def ac_mass(self) -> float:
        return 1.0 - sum(m for _, m in self.atoms())

    def cdf_ac(self, s: float) -> float:
        """Cdf of the absolutely continuous part (atoms removed), unnormalized."""
        return self.cdf(s) - sum(m for pos, m in self.atoms() if pos <= s)

    def breakpoints(self) -> tuple[float, ...]:
        """Points where the density may be discontinuous or undefined."""
        return (0.0,)

    def support_upper(self) -> float:
        return math.inf

    def tail_cutoff(self, eps: float = _TAIL_EPS) -> float:
        """A point beyond which the survival function is below eps."""
        return self.quantile(1.0 - eps)

    def scale_hint(self) -> float:
        m = self.mean
        return m if (math.isfinite(m) and m > 0) else 1.0

    # -- vectorized variants (overridden where a closed form exists) ------

    def cdf_array(self, s: np.ndarray) -> np.ndarray:
        return np.array([self.cdf(float(v)) for v in np.asarray(s, float).ravel()]).reshape(np.shape(s))

    def quantile_array(self, y: np.ndarray) -> np.ndarray:
        return np.array([self.quantile(float(v)) for v in np.asarray(y, float).ravel()]).reshape(np.shape(y))

    # -- derived laws ------------------------------------------------------

    def equilibrium(self) -> "Distribution":
        return Equilibrium(self)

    def overshoot(self, a: float) -> "Distribution":
        if a < 0:
            raise SpecError("overshoot age must be nonnegative")
        if a == 0.0:
            return self
        if self.cdf(a) >= 1.0:
            raise SpecError(f"age {a!r} beyond support: F(a) = 1")
        return Overshoot(self, a)

    # -- identity ----------------------------------------------------------

    def __eq__(self, other):
        return isinstance(other, Distribution) and self.spec_dict() == other.spec_dict()

    def __hash__(self):
        return hash(json.dumps(self.spec_dict(), sort_keys=True))

    def __repr__(self):
        params = {k: v for k, v in self.spec_dict().items() if k != "kind"}
        inner = ", ".join(f"{k}={v!r}" for k, v in params.items())
        return f"{type(self).__name__}({inner})"


def _require_positive(name: str, value: float) -> float:
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise SpecError(f"{name} must be a positive finite number, got {value!r}")
    return value


class Exponential(Distribution):
    kind = "exponential"

    def __init__(self, rate: float):
        self.rate = _require_positive("rate", rate)

    def cdf(self, s):
        return -math.expm1(-self.rate * s) if s > 0 else 0.0

    def pdf(self, s):
        if s < 0:
            return 0.0
        return self.rate * math.exp(-self.rate * s)

    def quantile(self, y):
        _check_prob(y)
        return -math.log1p(-y) / self.rate

    def integral_survival(self, s):
        return self.cdf(s) / self.rate if s > 0 else 0.0

    def raw_moment(self, k):
        _check_order(k)
        return math.gamma(k + 1.0) / self.rate ** k

    def mgf(self, a):
        _check_rate(a)
        if a == 0.0:
            return 1.0
        if a >= self.rate:
            return math.inf
        return self.rate / (self.rate - a)

    def mgf_abscissa(self):
        return self.rate

    def equilibrium(self):
        # memoryless: the stationary age law is the law itself
        return self

    def overshoot(self, a):
        if a < 0:
            raise SpecError("overshoot age must be nonnegative")
        return self

    def cdf_array(self, s):
        s = np.asarray(s, float)
        return np.where(s > 0, -np.expm1(-self.rate * s), 0.0)

    def quantile_array(self, y):
        return -np.log1p(-np.asarray(y, float)) / self.rate

    def spec_dict(self):
        return {"kind": self.kind, "rate": self.rate}


def _reg_lower_gamma(a: float, x: float) -> float:
    """Regularized lower incomplete gamma; closed form for small integer a."""
    if x <= 0.0:
        return 0.0
    if a.is_integer() and 1 <= a <= 30:
        if x > 700.0:
            return 1.0
        # P(k, x) = 1 - exp(-x) sum_{j<k} x^j / j!
        term = 1.0
        total = 1.0
        for j in range(1, int(a)):
            term *= x / j
            total += term
        return -math.expm1(-x + math.log(total))
    return float(special.gammainc(a, x))


class Gamma(Distribution):
    kind = "gamma"

    def __init__(self, shape: float, rate: float):
        self.shape = _require_positive("shape", shape)
        self.rate = _require_positive("rate", rate)

    def cdf(self, s):
        return _reg_lower_gamma(self.shape, self.rate * s) if s > 0 else 0.0

    def pdf(self, s):
        if s < 0:
            return 0.0
        if s == 0.0:
            if self.shape > 1.0:
                return 0.0
            if self.shape == 1.0:
                return self.rate
            return None  # density blows up at the origin
        lg = (self.shape * math.log(self.rate) + (self.shape - 1.0) * math.log(s)
              - self.rate * s - math.lgamma(self.shape))
        return math.exp(lg)

    def quantile(self, y):
        _check_prob(y)
        return float(special.gammaincinv(self.shape, y)) / self.rate

    def tail_cutoff(self, eps=_TAIL_EPS):
        return float(special.gammainccinv(self.shape, eps)) / self.rate

    def integral_survival(self, s):
        if s <= 0:
            return 0.0
        partial_mean = self.mean * _reg_lower_gamma(self.shape + 1.0, self.rate * s)
        return s * (1.0 - self.cdf(s)) + partial_mean

    def raw_moment(self, k):
        _check_order(k)
        return math.exp(math.lgamma(self.shape + k) - math.lgamma(self.shape)) / self.rate ** k

    def mgf(self, a):
        _check_rate(a)
        if a == 0.0:
            return 1.0
        if a >= self.rate:
            return math.inf
        return (1.0 - a / self.rate) ** (-self.shape)

    def mgf_abscissa(self):
        return self.rate

    def cdf_array(self, s):
        s = np.asarray(s, float)
        return special.gammainc(self.shape, self.rate * np.maximum(s, 0.0))

    def quantile_array(self, y):
        return special.gammaincinv(self.shape, np.asarray(y, float)) / self.rate

    def spec_dict(self):
        return {"kind": self.kind, "shape": self.shape, "rate": self.rate}


class Weibull(Distribution):
    kind = "weibull"

    def __init__(self, shape: float, scale: float):
        self.shape = _require_positive("shape", shape)
        self.scale = _require_positive("scale", scale)

    def cdf(self, s):
        return -math.expm1(-((s / self.scale) ** self.shape)) if s > 0 else 0.0

    def pdf(self, s):
        if s < 0:
            return 0.0
        if s == 0.0:
            if self.shape > 1.0:
                return 0.0
            if self.shape == 1.0:
                return 1.0 / self.scale
            return None
        z = s / self.scale
        return (self.shape / self.scale) * z ** (self.shape - 1.0) * math.exp(-(z ** self.shape))

    def quantile(self, y):
        _check_prob(y)
        return self.scale * (-math.log1p(-y)) ** (1.0 / self.shape)

    def integral_survival(self, s):
        if s <= 0:
            return 0.0
        z = (s / self.scale) ** self.shape
        partial_mean = self.mean * float(special.gammainc(1.0 + 1.0 / self.shape, z))
        return s * (1.0 - self.cdf(s)) + partial_mean

    def raw_moment(self, k):
        _check_order(k)
        return self.scale ** k * math.gamma(1.0 + k / self.shape)

    def mgf(self, a):
        _check_rate(a)
        if a == 0.0:
            return 1.0
        absc = self.mgf_abscissa()
        if a >= absc:
            return math.inf
        # shape > 1 (or shape == 1 with a < 1/scale): integrate the density
        return _mgf_by_quadrature(self, a)

    def mgf_abscissa(self):
        if self.shape > 1.0:
            return math.inf
        if self.shape == 1.0:
            return 1.0 / self.scale
        return 0.0

    def cdf_array(self, s):
        s = np.asarray(s, float)
        return -np.expm1(-((np.maximum(s, 0.0) / self.scale) ** self.shape))

    def quantile_array(self, y):
        return self.scale * (-np.log1p(-np.asarray(y, float))) ** (1.0 / self.shape)

    def spec_dict(self):
        return {"kind": self.kind, "shape": self.shape, "scale": self.scale}


class Uniform(Distribution):
    kind = "uniform"

    def __init__(self, lo: float, hi: float):
        lo = float(lo)
        hi = float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo >= 0 and hi > lo):
            raise SpecError(f"uniform requires 0 <= lo < hi, got lo={lo!r}, hi={hi!r}")
        self.lo = lo
        self.hi = hi
        self.width = hi - lo

    def cdf(self, s):
        if s <= self.lo:
            return 0.0
        if s >= self.hi:
            return 1.0
        return (s - self.lo) / self.width

    def pdf(self, s):
        if self.lo <= s <= self.hi:
            return 1.0 / self.width
        return 0.0

    def quantile(self, y):
        _check_prob(y)
        return self.lo + y * self.width

    def integral_survival(self, s):
        if s <= self.lo:
            return max(s, 0.0)
        if s >= self.hi:
            return 0.5 * (self.lo + self.hi)
        u = s - self.lo
        return self.lo + u - u * u / (2.0 * self.width)

    def raw_moment(self, k):
        _check_order(k)
        return (self.hi ** (k + 1) - self.lo ** (k + 1)) / ((k + 1) * self.width)

    def mgf(self, a):
        _check_rate(a)
        if a == 0.0:
            return 1.0
        return (math.exp(a * self.hi) - math.exp(a * self.lo)) / (a * self.width)

    def mgf_abscissa(self):
        return math.inf

    def support_upper(self):
        return self.hi

    def tail_cutoff(self, eps=_TAIL_EPS):
        return self.hi

    def breakpoints(self):
        return (0.0, self.lo, self.hi)

    def overshoot(self, a):
        if a < 0:
            raise SpecError("overshoot age must be nonnegative")
        if a >= self.hi:
            raise SpecError(f"age {a!r} beyond support: F(a) = 1")
        return Uniform(max(self.lo - a, 0.0), self.hi - a)

    def cdf_array(self, s):
        return np.clip((np.asarray(s, float) - self.lo) / self.width, 0.0, 1.0)

    def quantile_array(self, y):
        return self.lo + np.asarray(y, float) * self.width

    def spec_dict(self):
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi}


class HyperExponential(Distribution):
    """Mixture of exponentials: sum_i w_i Exp(rate_i)."""

    kind = "hyperexponential"

    def __init__(self, weights: Sequence[float], rates: Sequence[float]):
        w = [float(x) for x in weights]
        r = [float(x) for x in rates]
        if len(w) != len(r) or not w:
            raise SpecError("hyperexponential needs matching nonempty weights and rates")
        if any(x <= 0 for x in w) or any(x <= 0 for x in r):
            raise SpecError("hyperexponential weights and rates must be positive")
        total = sum(w)
        if abs(total - 1.0) > 1e-9:
            raise SpecError(f"hyperexponential weights must sum to 1, got {total!r}")
        self.weights = tuple(x / total for x in w)
        self.rates = tuple(r)

    def cdf(self, s):
        if s <= 0:
            return 0.0
        return -sum(w * math.expm1(-r * s) for w, r in zip(self.weights, self.rates))

    def pdf(self, s):
        if s < 0:
            return 0.0
        return sum(w * r * math.exp(-r * s) for w, r in zip(self.weights, self.rates))

    def quantile(self, y):
        _check_prob(y)
        if y == 0.0:
            return 0.0
        hi = -math.log1p(-y) / min(self.rates)
        return _bisect_nondecreasing(self.cdf, y, 0.0, hi,
                                     _QUANTILE_TOL * max(1.0, self.scale_hint()))

    def tail_cutoff(self, eps=_TAIL_EPS):
        return -math.log(eps) / min(self.rates)

    def integral_survival(self, s):
        if s <= 0:
            return 0.0
        return -sum((w / r) * math.expm1(-r * s) for w, r in zip(self.weights, self.rates))

    def raw_moment(self, k):
        _check_order(k)
        return math.gamma(k + 1.0) * sum(w / r ** k for w, r in zip(self.weights, self.rates))

    def mgf(self, a):
        _check_rate(a)
        if a == 0.0:
            return 1.0
        if a >= min(self.rates):
            return math.inf
        return sum(w * r / (r - a) for w, r in zip(self.weights, self.rates))

    def mgf_abscissa(self):
        return min(self.rates)

    def equilibrium(self):
        mu = self.mean
        new_weights = tuple((w / r) / mu for w, r in zip(self.weights, self.rates))
        return HyperExponential(new_weights, self.rates)

    def cdf_array(self, s):
        s = np.maximum(np.asarray(s, float), 0.0)[..., None]
        w = np.asarray(self.weights)
        r = np.asarray(self.rates)
        return -np.sum(w * np.expm1(-r * s), axis=-1)

    def spec_dict(self):
        return {"kind": self.kind, "weights": list(self.weights), "rates": list(self.rates)}


class TabulatedCdf(Distribution):
    """Piecewise-linear cdf through (s, F(s)) breakpoints.

    The cdf is 0 left of the first breakpoint (a positive first value is an
    atom there), linear between breakpoints (density = slope), and must
    reach 1 at the last breakpoint: all mass lives on a bounded interval.
    """

    kind = "tabulated"

    def __init__(self, points: Sequence[Sequence[float]]):
        if not points:
            raise SpecError("tabulated points must be nonempty")
        xs = np.array([float(p[0]) for p in points])
        fs = np.array([float(p[1]) for p in points])
        if np.any(xs < 0):
            raise SpecError("tabulated breakpoints must be nonnegative")
        if np.any(np.diff(xs) <= 0):
            raise SpecError("tabulated breakpoints must be strictly increasing")
        if np.any(np.diff(fs) < 0) or np.any(fs < 0) or np.any(fs > 1):
            raise SpecError("tabulated cdf values must be nondecreasing within [0, 1]")
        if abs(fs[-1] - 1.0) > 1e-12:
            raise SpecError("tabulated cdf must reach 1 at the last breakpoint "
                            "(unbounded tails are not representable)")
        fs[-1] = 1.0
        self.xs = xs
        self.fs = fs
        with np.errstate(divide="ignore", invalid="ignore"):
            self.slopes = np.diff(fs) / np.diff(xs)
        # cumulative integral of the survival function at each breakpoint
        surv_mid = 1.0 - 0.5 * (fs[:-1] + fs[1:])
        self._surv_cum = np.concatenate([[0.0], np.cumsum(surv_mid * np.diff(xs))])

    def atoms(self):
        if self.fs[0] > 0.0:
            return ((float(self.xs[0]), float(self.fs[0])),)
        return ()

    def cdf(self, s):
        if s < self.xs[0]:
            return 0.0
        if s >= self.xs[-1]:
            return 1.0
        i = int(np.searchsorted(self.xs, s, side="right")) - 1
        return float(self.fs[i] + self.slopes[i] * (s - self.xs[i]))

    def pdf(self, s):
        if s < self.xs[0] or s > self.xs[-1]:
            return 0.0
        if s in self.xs:
            return None  # kink or atom
        i = int(np.searchsorted(self.xs, s, side="right")) - 1
        return float(self.slopes[i])

    def quantile(self, y):
        _check_prob(y)
        if y <= self.fs[0]:
            return float(self.xs[0]) if y > 0.0 else 0.0
        i = int(np.searchsorted(self.fs, y, side="left"))
        # invert the linear segment ending at breakpoint i
        if self.fs[i] == self.fs[i - 1]:
            return float(self.xs[i])
        t = (y - self.fs[i - 1]) / (self.fs[i] - self.fs[i - 1])
        return float(self.xs[i - 1] + t * (self.xs[i] - self.xs[i - 1]))

    def integral_survival(self, s):
        if s <= 0:
            return 0.0
        if s <= self.xs[0]:
            return float(s)
        head = float(self.xs[0])
        if s >= self.xs[-1]:
            return head + float(self._surv_cum[-1])
        i = int(np.searchsorted(self.xs, s, side="right")) - 1
        u = s - self.xs[i]
        surv_i = 1.0 - self.fs[i]
        return head + float(self._surv_cum[i] + surv_i * u - 0.5 * self.slopes[i] * u * u)

    def raw_moment(self, k):
        _check_order(k)
        total = sum(mass * pos ** k for pos, mass in self.atoms())
        kp1 = k + 1.0
        for i in range(len(self.slopes)):
            a, b = self.xs[i], self.xs[i + 1]
            total += self.slopes[i] * (b ** kp1 - a ** kp1) / kp1
        return float(total)

    def mgf(self, a):
        _check_rate(a)
        if a == 0.0:
            return 1.0
        total = sum(mass * math.exp(a * pos) for pos, mass in self.atoms())
        for i in range(len(self.slopes)):
            lo, hi = self.xs[i], self.xs[i + 1]
            total += self.slopes[i] * (math.exp(a * hi) - math.exp(a * lo)) / a
        return float(total)

    def mgf_abscissa(self):
        return math.inf  # bounded support

    def support_upper(self):
        return float(self.xs[-1])

    def tail_cutoff(self, eps=_TAIL_EPS):
        return float(self.xs[-1])

    def breakpoints(self):
        return (0.0,) + tuple(float(x) for x in self.xs)

    def ac_mass(self):
        return float(1.0 - self.fs[0])

    def cdf_array(self, s):
        s = np.asarray(s, float)
        idx = np.clip(np.searchsorted(self.xs, s, side="right") - 1, 0, len(self.slopes) - 1)
        vals = self.fs[idx] + self.slopes[idx] * (s - self.xs[idx])
        vals = np.where(s < self.xs[0], 0.0, vals)
        return np.where(s >= self.xs[-1], 1.0, vals)

    def spec_dict(self):
        return {"kind": self.kind,
                "points": [[float(x), float(f)] for x, f in zip(self.xs, self.fs)]}


class Equilibrium(Distribution):
    """Integrated-tail law of a base distribution: density (1-F(s))/mu."""

    kind = "equilibrium"

    def __init__(self, base: Distribution):
        if not (math.isfinite(base.mean) and base.mean > 0):
            raise SpecError("equilibrium requires a finite positive mean")
        self.base = base

    def cdf(self, s):
        if s <= 0:
            return 0.0
        return min(self.base.integral_survival(s) / self.base.mean, 1.0)

    def pdf(self, s):
        if s < 0:
            return 0.0
        return (1.0 - self.base.cdf(s)) / self.base.mean

    def quantile(self, y):
        _check_prob(y)
        if y == 0.0:
            return 0.0
        hi = self.base.scale_hint()
        for _ in range(200):
            if self.cdf(hi) >= y:
                break
            hi *= 2.0
        return _bisect_nondecreasing(self.cdf, y, 0.0, hi,
                                     _QUANTILE_TOL * max(1.0, self.base.scale_hint()))

    def integral_survival(self, s):
        if s <= 0:
            return 0.0
        end = min(s, self.tail_cutoff())
        val, _ = integrate_segments(lambda u: 1.0 - self.cdf(u), 0.0, end,
                                    self.base.breakpoints())
        return val

    def raw_moment(self, k):
        _check_order(k)
        return _moment_by_quadrature(self, k)

    def mgf(self, a):
        _check_rate(a)
        if a == 0.0:
            return 1.0
        if a > self.mgf_abscissa():
            return math.inf
        return _mgf_by_quadrature(self, a)

    def mgf_abscissa(self):
        return self.base.mgf_abscissa()

    def support_upper(self):
        return self.base.support_upper()

    def scale_hint(self):
        return self.base.scale_hint()

    def breakpoints(self):
        pts = set(self.base.breakpoints())
        pts.update(pos for pos, _ in self.base.atoms())
        return tuple(sorted(pts))

    def cdf_array(self, s):
        s = np.asarray(s, float)
        flat = s.ravel()
        out = np.array([self.cdf(float(v)) for v in flat])
        return out.reshape(s.shape)

    def quantile_array(self, y):
        return _vector_quantile(self, np.asarray(y, float))

    def spec_dict(self):
        return {"kind": self.kind, "base": self.base.spec_dict()}


class Overshoot(Distribution):
    """Residual-period law given elapsed age a: (F(s+a) - F(a)) / (1 - F(a))."""

    kind = "overshoot"

    def __init__(self, base: Distribution, age: float):
        age = float(age)
        surv = 1.0 - base.cdf(age)
        if surv <= 0.0:
            raise SpecError(f"age {age!r} beyond support: F(a) = 1")
        self.base = base
        self.age = age
        self._surv = surv
        self._cdf_at_age = base.cdf(age)

    def cdf(self, s):
        if s <= 0:
            return 0.0
        return min((self.base.cdf(s + self.age) - self._cdf_at_age) / self._surv, 1.0)

    def pdf(self, s):
        if s < 0:
            return 0.0
        f = self.base.pdf(s + self.age)
        return None if f is None else f / self._surv

    def quantile(self, y):
        _check_prob(y)
        target = self._cdf_at_age + y * self._surv
        return max(self.base.quantile(target) - self.age, 0.0)

    def integral_survival(self, s):
        if s <= 0:
            return 0.0
        base_part = (self.base.integral_survival(s + self.age)
                     - self.base.integral_survival(self.age))
        return base_part / self._surv

    def raw_moment(self, k):
        _check_order(k)
        return _moment_by_quadrature(self, k)

    def mgf(self, a):
        _check_rate(a)
        if a == 0.0:
            return 1.0
        if a > self.mgf_abscissa():
            return math.inf
        return _mgf_by_quadrature(self, a)

    def mgf_abscissa(self):
        return self.base.mgf_abscissa()

    def support_upper(self):
        up = self.base.support_upper()
        return up - self.age if math.isfinite(up) else up

    def scale_hint(self):
        return self.base.scale_hint()

    def tail_cutoff(self, eps=_TAIL_EPS):
        target = 1.0 - eps * self._surv
        if target >= 1.0:
            target = 1.0 - 1e-15
        return max(self.base.quantile(target) - self.age, 0.0)

    def breakpoints(self):
        pts = [max(p - self.age, 0.0) for p in self.base.breakpoints()]
        return tuple(sorted(set(pts)))

    def atoms(self):
        shifted = []
        for pos, mass in self.base.atoms():
            if pos > self.age:
                shifted.append((pos - self.age, mass / self._surv))
        return tuple(shifted)

    def cdf_array(self, s):
        s = np.asarray(s, float)
        vals = (self.base.cdf_array(s + self.age) - self._cdf_at_age) / self._surv
        return np.clip(np.where(s <= 0, 0.0, vals), 0.0, 1.0)

    def quantile_array(self, y):
        target = self._cdf_at_age + np.asarray(y, float) * self._surv
        return np.maximum(self.base.quantile_array(target) - self.age, 0.0)

    def spec_dict(self):
        return {"kind": self.kind, "base": self.base.spec_dict(), "age": self.age}


# -- quadrature-backed moments for derived laws ----------------------------

def _moment_by_quadrature(d: Distribution, k: float) -> float:
    def integrand(u):
        f = d.pdf(u)
        return 0.0 if f is None else u ** k * f

    cut = d.tail_cutoff()
    val, _ = integrate_segments(integrand, 0.0, cut, d.breakpoints())
    up = d.support_upper()
    if not math.isfinite(up):
        try:
            tail, _ = tail_integral(integrand, cut, d.scale_hint())
        except DivergentIntegral:
            return math.inf
        val += tail
    val += sum(mass * pos ** k for pos, mass in d.atoms())
    return val


def _mgf_by_quadrature(d: Distribution, a: float) -> float:
    def integrand(u):
        f = d.pdf(u)
        return 0.0 if f is None else math.exp(a * u) * f

    cut = d.tail_cutoff()
    val, _ = integrate_segments(integrand, 0.0, cut, d.breakpoints())
    up = d.support_upper()
    if not math.isfinite(up):
        try:
            tail, _ = tail_integral(integrand, cut, d.scale_hint())
        except (DivergentIntegral, OverflowError):
            return math.inf
        val += tail
    val += sum(mass * math.exp(a * pos) for pos, mass in d.atoms())
    return val


def _vector_quantile(d: Distribution, y: np.ndarray) -> np.ndarray:
    """Vectorized monotone bisection against d.cdf_array."""
    y = np.asarray(y, float)
    if y.size == 0:
        return np.zeros_like(y)
    ymax = float(np.max(y))
    hi0 = d.scale_hint()
    for _ in range(200):
        if d.cdf(hi0) >= ymax or hi0 >= d.tail_cutoff():
            break
        hi0 *= 2.0
    lo = np.zeros_like(y)
    hi = np.full_like(y, min(hi0, d.tail_cutoff()))
    tol = _QUANTILE_TOL * max(1.0, d.scale_hint())
    for _ in range(80):
        if float(np.max(hi - lo)) <= tol:
            break
        mid = 0.5 * (lo + hi)
        ge = d.cdf_array(mid) >= y
        hi = np.where(ge, mid, hi)
        lo = np.where(ge, lo, mid)
    return hi


# -- validation, specs, helpers ---------------------------------------------

def _check_prob(y):
    if not (0.0 <= y < 1.0):
        raise SpecError(f"probability argument must lie in [0, 1), got {y!r}")


def _check_order(k):
    if not k >= 1.0:
        raise SpecError(f"moment order must be >= 1, got {k!r}")


def _check_rate(a):
    if not a >= 0.0:
        raise SpecError(f"mgf rate must be nonnegative, got {a!r}")


def validate(d: "Distribution | dict") -> Distribution:
    """Check the standing condition: positive a.c. mass and finite mean.

    Accepts a Distribution or a spec dict; returns the (validated)
    distribution handle with its mean computed.
    """
    if isinstance(d, dict):
        d = from_spec(d)
    if d.ac_mass() <= 0.0:
        raise SpecError("condition (*) violated: distribution has no "
                        "absolutely continuous part")
    if d.cdf(0.0) > 0.0:
        raise SpecError("period law puts positive mass at zero")
    mu = d.mean
    if not (math.isfinite(mu) and mu > 0):
        raise SpecError(f"mean must be positive and finite, got {mu!r}")
    return d


def equilibrium(d: Distribution) -> Distribution:
    return d.equilibrium()


def overshoot(d: Distribution, a: float) -> Distribution:
    return d.overshoot(a)


def evaluate(d: Distribution, s: float) -> tuple[float, float | None]:
    """(F(s), density-or-None) at a point; s < 0 maps to (0, 0)."""
    if s < 0:
        return 0.0, 0.0
    return d.cdf(s), d.pdf(s)


_FAMILIES = {
    "exponential": lambda spec: Exponential(spec["rate"]),
    "exp": lambda spec: Exponential(spec["rate"]),
    "gamma": lambda spec: Gamma(spec["shape"], spec["rate"]),
    "weibull": lambda spec: Weibull(spec["shape"], spec["scale"]),
    "uniform": lambda spec: Uniform(spec["lo"], spec["hi"]),
    "hyperexponential": lambda spec: HyperExponential(spec["weights"], spec["rates"]),
    "hyperexp": lambda spec: HyperExponential(spec["weights"], spec["rates"]),
    "tabulated": lambda spec: TabulatedCdf(spec["points"]),
}


def from_spec(spec: dict) -> Distribution:
    """Build a distribution from its JSON form, e.g. {"kind": "gamma", ...}."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise SpecError("distribution spec must be an object with a 'kind' field")
    kind = spec["kind"]
    builder = _FAMILIES.get(kind)
    if builder is None:
        raise SpecError(f"unknown distribution kind {kind!r}")
    try:
        return builder(spec)
    except KeyError as missing:
        raise SpecError(f"distribution spec {kind!r} missing field {missing}") from None


_MINI_POSITIONAL = {
    "exp": ("rate",),
    "exponential": ("rate",),
    "gamma": ("shape", "rate"),
    "weibull": ("shape", "scale"),
    "uniform": ("lo", "hi"),
}


def parse_dist(text: str) -> Distribution:
    """Parse the quick CLI syntax family:params, e.g. "uniform:0,1".

    hyperexp uses weights@rates ("hyperexp:0.3,0.7@1,2"); tabulated laws
    need the JSON spec form.
    """
    if ":" not in text:
        raise SpecError(f"malformed distribution {text!r}: expected family:params")
    family, _, rest = text.partition(":")
    family = family.strip().lower()
    if family in ("hyperexp", "hyperexponential"):
        if "@" not in rest:
            raise SpecError("hyperexp syntax is weights@rates, e.g. hyperexp:0.3,0.7@1,2")
        wpart, _, rpart = rest.partition("@")
        weights = [float(x) for x in wpart.split(",") if x.strip()]
        rates = [float(x) for x in rpart.split(",") if x.strip()]
        return HyperExponential(weights, rates)
    names = _MINI_POSITIONAL.get(family)
    if names is None:
        raise SpecError(f"unknown distribution family {family!r} "
                        "(tabulated specs require the JSON config form)")
    try:
        values = [float(x) for x in rest.split(",") if x.strip() != ""]
    except ValueError:
        raise SpecError(f"malformed parameters in {text!r}") from None
    if len(values) != len(names):
        raise SpecError(f"{family} expects {len(names)} parameters {names}, got {len(values)}")
    return from_spec({"kind": family, **dict(zip(names, values))})


@dataclass(frozen=True)
class DelayStart:
    """Resolved first-cycle law plus the age convention at time zero.

    initial_age is a number for fixed starts; None marks the stationary
    start, whose age is drawn jointly with the first renewal.
    """

    dist: Distribution
    initial_age: float | None


@dataclass(frozen=True)
class DelaySpec:
    """How the first cycle differs from the rest.

    * fixed_age(a): the process has already been running for time a, so
      the first cycle is the residual law at age a;
    * law(d): an explicit first-cycle law, age 0 at time zero;
    * stationary(): first renewal from the equilibrium law with the age at
      time zero drawn from the matching residual construction, which makes
      the age process exactly stationary.
    """

    kind: str
    age: float = 0.0
    dist: Distribution | None = None

    @classmethod
    def fixed_age(cls, a: float) -> "DelaySpec":
        if a < 0:
            raise SpecError("fixed_age requires a >= 0")
        return cls(kind="fixed_age", age=float(a))

    @classmethod
    def law(cls, d: Distribution) -> "DelaySpec":
        return cls(kind="law", dist=d)

    @classmethod
    def stationary(cls) -> "DelaySpec":
        return cls(kind="stationary")

    def resolve(self, period: Distribution) -> DelayStart:
        if self.kind == "fixed_age":
            if period.cdf(self.age) >= 1.0:
                raise SpecError(f"fixed_age {self.age!r} beyond the period support")
            return DelayStart(period.overshoot(self.age), self.age)
        if self.kind == "law":
            if self.dist is None:
                raise SpecError("DelaySpec.law requires a distribution")
            return DelayStart(self.dist, 0.0)
        if self.kind == "stationary":
            return DelayStart(period.equilibrium(), None)
        raise SpecError(f"unknown delay kind {self.kind!r}")

    def spec_dict(self) -> dict:
        if self.kind == "fixed_age":
            return {"kind": "fixed_age", "age": self.age}
        if self.kind == "law":
            return {"kind": "law", "dist": self.dist.spec_dict()}
        return {"kind": "stationary"}

    @classmethod
    def from_text(cls, text: str) -> "DelaySpec":
        """Parse CLI delay syntax: fixed:A | law:family:params | stationary."""
        if text == "stationary":
            return cls.stationary()
        head, _, rest = text.partition(":")
        if head in ("fixed", "fixed_age", "age"):
            try:
                return cls.fixed_age(float(rest))
            except ValueError:
                raise SpecError(f"malformed delay age in {text!r}") from None
        if head == "law":
            return cls.law(parse_dist(rest))
        raise SpecError(f"malformed delay spec {text!r} "
                        "(expected fixed:A, law:family:params, or stationary)")


@dataclass
class MomentSummary:
    """Moments of a law, as consumed by the bound formulas."""

    mean: float
    raw_moments: dict = field(default_factory=dict)
    mgf_values: dict = field(default_factory=dict)
    quadrature_tol: float = DEFAULT_TOL

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "raw_moments": {str(k): v for k, v in sorted(self.raw_moments.items())},
            "mgf_values": {str(a): v for a, v in sorted(self.mgf_values.items())},
            "quadrature_tol": self.quadrature_tol,
        }


def moment_summary(d: Distribution, orders: Iterable[float] = (1,),
                   rates: Iterable[float] = ()) -> MomentSummary:
    moments = {float(k): d.raw_moment(k) for k in orders}
    mgfs = {float(a): d.mgf(a) for a in rates}
    return MomentSummary(mean=d.mean, raw_moments=moments, mgf_values=mgfs)
