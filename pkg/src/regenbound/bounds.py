"""Explicit convergence-rate constants and the total-variation bounds.

Polynomial mode: for moment order k >= 1 the coupling-time moment is
dominated by

    C = E z0^k * kappa * S1  +  E z1^k * (S2a + S2b),

    S1  = sum_{n>=1} (n+1)^(k-1) q^(n-1)
    S2a = sum_{n>=1} kappa n (n+2)^(k-1) q^(n-1)
    S2b = S1,                       q = 1 - kappa,

and the age law is within 2 C / t^k of its stationary law in total
variation.  Exponential mode: with P_a the exponentially weighted
residual mass and M0(a) the first-cycle mgf,

    C_exp = P_a * M0(a) / (1 - P_a),    bound  2 C_exp exp(-a t),

valid whenever P_a < 1.  Series are summed with a certified geometric
tail bound; powers go through log space so non-integer k is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .distributions import DelaySpec, Distribution, SpecError
from .splitting import SplitDecomposition

__all__ = [
    "BoundReport",
    "RateSearch",
    "poly_constant",
    "exp_constant",
    "find_rate",
    "tv_bound",
    "make_poly_report",
    "make_exp_report",
]

_SERIES_EPS = 1e-10
_RATE_DELTA = 1e-3


def _certified_series(term, ratio_bound, eps=_SERIES_EPS, max_terms=10_000_000):
    """Sum term(1) + term(2) + ... with a certified geometric tail.

    ratio_bound(n) must dominate term(n+1)/term(n) and be nonincreasing.
    Returns (total_including_tail, tail_bound, terms_used).
    """
    total = 0.0
    n = 0
    while n < max_terms:
        n += 1
        t = term(n)
        total += t
        if not math.isfinite(total):
            raise SpecError("series overflow; moment order too large for float arithmetic")
        r = ratio_bound(n)
        if r < 1.0:
            tail = t * r / (1.0 - r) if t > 0.0 else 0.0
            if tail <= eps * total:
                return total + tail, tail, n
    raise SpecError("series did not reach its tail certificate within the term budget")


def _pow_log(base: float, expo: float) -> float:
    # powers in log space so real (non-integer) exponents are uniform
    return math.exp(expo * math.log(base)) if expo != 0.0 else 1.0


def poly_constant(kappa: float, m0k: float, m1k: float, k: float,
                  eps: float = _SERIES_EPS) -> tuple[float, dict]:
    """Polynomial-mode constant; returns (C, truncation diagnostics)."""
    if not 0.0 < kappa <= 1.0:
        raise SpecError(f"kappa must lie in (0, 1], got {kappa!r} (series diverges at 0)")
    if not k >= 1.0:
        raise SpecError(f"moment order k must be >= 1, got {k!r}")
    for name, v in (("m0k", m0k), ("m1k", m1k)):
        if not (math.isfinite(v) and v >= 0.0):
            raise SpecError(f"{name} must be finite and nonnegative, got {v!r}")
    q = 1.0 - kappa
    logq = math.log(q) if q > 0.0 else None

    def geom(n):  # q^(n-1)
        if logq is None:
            return 1.0 if n == 1 else 0.0
        return math.exp((n - 1) * logq)

    def term_s1(n):
        return _pow_log(n + 1.0, k - 1.0) * geom(n)

    def ratio_s1(n):
        return q * _pow_log((n + 2.0) / (n + 1.0), k - 1.0)

    def term_s2a(n):
        return kappa * n * _pow_log(n + 2.0, k - 1.0) * geom(n)

    def ratio_s2a(n):
        return q * ((n + 1.0) / n) * _pow_log((n + 3.0) / (n + 2.0), k - 1.0)

    s1, tail1, n1 = _certified_series(term_s1, ratio_s1, eps)
    s2a, tail2a, n2a = _certified_series(term_s2a, ratio_s2a, eps)
    constant = m0k * kappa * s1 + m1k * (s2a + s1)
    diagnostics = {
        "terms_used": max(n1, n2a),
        "tail_bound": m0k * kappa * tail1 + m1k * (tail2a + tail1),
        "series_eps": eps,
    }
    return constant, diagnostics


def exp_constant(p_a: float, mgf0: float) -> float:
    """Exponential-mode constant P_a M0 / (1 - P_a); requires P_a < 1."""
    if not p_a >= 0.0:
        raise SpecError(f"P_a must be nonnegative, got {p_a!r}")
    if p_a >= 1.0:
        raise SpecError(f"rate not admissible: weighted residual mass {p_a!r} >= 1")
    if not math.isfinite(mgf0):
        raise SpecError("first-cycle mgf is infinite at this rate")
    return p_a * mgf0 / (1.0 - p_a)


@dataclass
class RateSearch:
    """Outcome of the admissible-rate search."""

    a: float
    p_a: float
    mgf0: float
    constant: float
    degenerate_overlap: bool = False
    diagnostic_floor: float | None = None  # Chernoff floor M0(a) M1(a) when kappa = 1


def find_rate(d: Distribution, split: SplitDecomposition, delay: DelaySpec,
              delta: float = _RATE_DELTA) -> RateSearch:
    """Largest rate a with weighted residual mass at most 1 - delta.

    Searches [0, abscissa) by bisection; with a finite mgf abscissa the
    candidate cap is abscissa * (1 - delta).  Raises when no positive rate
    is admissible (heavy tails, or overlap mass below delta).
    """
    start = delay.resolve(d)
    absc = min(d.mgf_abscissa(), start.dist.mgf_abscissa())
    if absc <= 0.0:
        raise SpecError("exponential mode unavailable: mgf diverges for every a > 0")
    if split.laplace_psi(0.0) > 1.0 - delta:
        raise SpecError("exponential mode unavailable: overlap mass below the "
                        "admissibility margin")

    def admissible(a: float) -> bool:
        return split.laplace_psi(a) <= 1.0 - delta

    if math.isfinite(absc):
        hi = absc * (1.0 - delta)
        if admissible(hi):
            return _rate_result(d, split, start.dist, hi)
        lo = 0.0
    else:
        lo, hi = 0.0, max(d.scale_hint(), 1e-6)
        for _ in range(200):
            if not admissible(hi):
                break
            lo = hi
            hi *= 2.0
        else:
            return _rate_result(d, split, start.dist, hi)
    for _ in range(70):
        mid = 0.5 * (lo + hi)
        if admissible(mid):
            lo = mid
        else:
            hi = mid
    if lo <= 0.0:
        raise SpecError("exponential mode unavailable: no positive admissible rate")
    return _rate_result(d, split, start.dist, lo)


def _rate_result(d, split, delay_dist, a) -> RateSearch:
    p_a = split.laplace_psi(a)
    mgf0 = delay_dist.mgf(a)
    constant = exp_constant(p_a, mgf0)
    floor = None
    if split.degenerate:
        # the literal constant is 0 here; keep an honest Chernoff floor
        mgf1 = d.mgf(a)
        floor = mgf0 * mgf1 if math.isfinite(mgf1) else math.inf
    return RateSearch(a=a, p_a=p_a, mgf0=mgf0, constant=constant,
                      degenerate_overlap=split.degenerate, diagnostic_floor=floor)


def tv_bound(mode: str, constant: float, t: float, *, k: float | None = None,
             a: float | None = None) -> tuple[float, float]:
    """Bound value at time t: (raw, clamped-to-2).

    Polynomial mode needs k (bound 2 C / t^k); exponential mode needs a
    (bound 2 C exp(-a t)).
    """
    if mode == "polynomial":
        if k is None:
            raise SpecError("polynomial bound requires k")
        if t < 0.0:
            raise SpecError("time must be nonnegative")
        raw = math.inf if t == 0.0 else 2.0 * constant / t ** k
    elif mode == "exponential":
        if a is None:
            raise SpecError("exponential bound requires a rate")
        if t < 0.0:
            raise SpecError("time must be nonnegative")
        raw = 2.0 * constant * math.exp(-a * t)
    else:
        raise SpecError(f"unknown bound mode {mode!r}")
    return raw, min(raw, 2.0)


@dataclass
class BoundReport:
    """A convergence-rate constant together with the inputs that made it."""

    mode: str
    constant: float
    kappa: float
    kappa_err: float
    k: float | None = None
    a: float | None = None
    inputs: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def tv_bound(self, t: float) -> tuple[float, float]:
        return tv_bound(self.mode, self.constant, t, k=self.k, a=self.a)

    def as_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "constant": self.constant,
            "kappa": self.kappa,
            "kappa_err": self.kappa_err,
            "inputs": self.inputs,
            "diagnostics": self.diagnostics,
        }
        if self.k is not None:
            out["k"] = self.k
        if self.a is not None:
            out["a"] = self.a
        return out


def make_poly_report(d: Distribution, split: SplitDecomposition, delay: DelaySpec,
                     k: float, *, conservative_kappa: bool = False) -> BoundReport:
    """Polynomial-mode report for period law d and the given delay.

    conservative_kappa widens the constant by the overlap-mass error bar
    (the constant is nonincreasing in kappa, so kappa - err is the safe side).
    """
    start = delay.resolve(d)
    m0k = start.dist.raw_moment(k)
    m1k = d.raw_moment(k)
    if not (math.isfinite(m0k) and math.isfinite(m1k)):
        raise SpecError(f"moment of order {k} is infinite; polynomial mode needs it finite")
    kappa = split.kappa
    if conservative_kappa:
        kappa = max(kappa - split.kappa_err, 1e-15)
    constant, diag = poly_constant(kappa, m0k, m1k, k)
    return BoundReport(
        mode="polynomial", constant=constant, k=k,
        kappa=split.kappa, kappa_err=split.kappa_err,
        inputs={"m0k": m0k, "m1k": m1k, "k": k, "kappa_used": kappa,
                "delay": delay.spec_dict()},
        diagnostics=diag,
    )


def make_exp_report(d: Distribution, split: SplitDecomposition, delay: DelaySpec,
                    a: "float | str" = "auto") -> BoundReport:
    """Exponential-mode report; a='auto' runs the admissible-rate search."""
    if a == "auto":
        found = find_rate(d, split, delay)
    else:
        a = float(a)
        if a <= 0.0:
            raise SpecError("exponential rate must be positive")
        start = delay.resolve(d)
        p_a = split.laplace_psi(a)
        if p_a >= 1.0:
            raise SpecError(f"rate not admissible: weighted residual mass {p_a:.6g} >= 1")
        mgf0 = start.dist.mgf(a)
        constant = exp_constant(p_a, mgf0)
        floor = None
        if split.degenerate:
            mgf1 = d.mgf(a)
            floor = mgf0 * mgf1 if math.isfinite(mgf1) else math.inf
        found = RateSearch(a=a, p_a=p_a, mgf0=mgf0, constant=constant,
                           degenerate_overlap=split.degenerate, diagnostic_floor=floor)
    diag = {"p_a": found.p_a, "mgf0": found.mgf0}
    if found.degenerate_overlap:
        diag["degenerate_overlap"] = True
        diag["diagnostic_floor_constant"] = found.diagnostic_floor
    return BoundReport(
        mode="exponential", constant=found.constant, a=found.a,
        kappa=split.kappa, kappa_err=split.kappa_err,
        inputs={"p_a": found.p_a, "mgf0": found.mgf0, "a": found.a,
                "delay": delay.spec_dict()},
        diagnostics=diag,
    )
