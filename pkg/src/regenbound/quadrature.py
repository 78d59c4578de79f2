"""Adaptive quadrature helpers for smooth integrands between breakpoints.

All distribution integrands in this package are smooth away from a known,
finite set of breakpoints, so adaptive Simpson with absolute-error control
is both simple and reliable.  Improper integrals over [start, inf) are
truncated segment by segment with an explicit divergence flag.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable

__all__ = [
    "adaptive_simpson",
    "integrate_segments",
    "tail_integral",
    "DivergentIntegral",
]

DEFAULT_TOL = 1e-10
_MAX_DEPTH = 52


class DivergentIntegral(Exception):
    """Raised when a tail integral shows no sign of converging."""


def _simpson(f, a, fa, b, fb, m, fm):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive(f, a, fa, b, fb, m, fm, whole, tol, depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = _simpson(f, a, fa, m, fm, lm, flm)
    right = _simpson(f, m, fm, b, fb, rm, frm)
    err = left + right - whole
    if depth <= 0 or abs(err) <= 15.0 * tol:
        return left + right + err / 15.0, abs(err) / 15.0
    lv, le = _adaptive(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
    rv, re = _adaptive(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    return lv + rv, le + re


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Integrate f on [a, b] to absolute tolerance tol.

    Returns (value, error_estimate).  The integrand must be finite on the
    open interval; endpoint values are sampled a hair inside the interval
    so integrable endpoint singularities (e.g. gamma shape < 1 at 0) do
    not poison the rule.
    """
    if not b > a:
        return 0.0, 0.0
    h = b - a
    eps = 1e-12 * max(1.0, abs(a), abs(b))
    fa = f(a)
    fb = f(b)
    if not math.isfinite(fa):
        fa = f(a + min(eps, 0.25 * h))
    if not math.isfinite(fb):
        fb = f(b - min(eps, 0.25 * h))
    m = 0.5 * (a + b)
    fm = f(m)
    whole = _simpson(f, a, fa, b, fb, m, fm)
    return _adaptive(f, a, fa, b, fb, m, fm, whole, tol, _MAX_DEPTH)


def integrate_segments(f: Callable[[float], float], a: float, b: float,
                       breakpoints: Iterable[float] = (),
                       tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Integrate f on [a, b], splitting at the given breakpoints."""
    pts = sorted({a, b, *(p for p in breakpoints if a < p < b)})
    total = 0.0
    err = 0.0
    n = max(1, len(pts) - 1)
    for lo, hi in zip(pts[:-1], pts[1:]):
        v, e = adaptive_simpson(f, lo, hi, tol / n)
        total += v
        err += e
    return total, err


def tail_integral(f: Callable[[float], float], start: float, scale: float,
                  tol: float = DEFAULT_TOL, growth: float = 1.5,
                  max_segments: int = 400) -> tuple[float, float]:
    """Integrate f on [start, inf) by geometrically growing segments.

    Stops once a segment contributes less than tol in absolute value and
    contributions are shrinking.  Raises DivergentIntegral when segment
    contributions stop decreasing (four in a row) or the running total
    blows past 1e15.
    """
    total = 0.0
    err = 0.0
    lo = start
    width = max(scale, 1e-6)
    prev = math.inf
    rising = 0
    for _ in range(max_segments):
        hi = lo + width
        v, e = adaptive_simpson(f, lo, hi, tol)
        total += v
        err += e
        if abs(total) > 1e15:
            raise DivergentIntegral(f"integral exceeds 1e15 by s={hi:g}")
        if abs(v) >= prev and abs(v) > tol:
            rising += 1
            if rising >= 4:
                raise DivergentIntegral(f"segment contributions not decreasing at s={hi:g}")
        else:
            rising = 0
        if abs(v) < tol and abs(v) < prev:
            return total, err
        prev = abs(v)
        lo = hi
        width *= growth
    raise DivergentIntegral("tail integral did not converge within segment budget")
