import math

import pytest

from regenbound.quadrature import (DivergentIntegral, adaptive_simpson,
                                   integrate_segments, tail_integral)


def test_polynomial_exact():
    val, err = adaptive_simpson(lambda x: x ** 3, 0.0, 2.0, 1e-12)
    assert abs(val - 4.0) < 1e-10


def test_exponential_segment():
    val, _ = adaptive_simpson(math.exp, 0.0, 1.0, 1e-12)
    assert abs(val - (math.e - 1.0)) < 1e-10


def test_breakpoint_splitting():
    # kinked integrand: |x - 0.5| on [0, 1]
    f = lambda x: abs(x - 0.5)
    val, _ = integrate_segments(f, 0.0, 1.0, [0.5], tol=1e-12)
    assert abs(val - 0.25) < 1e-10


def test_endpoint_singularity_is_tolerated():
    # integrable singularity at 0: 1/(2 sqrt(x)) integrates to 1 on [0, 1]
    f = lambda x: math.inf if x == 0 else 0.5 / math.sqrt(x)
    val, _ = adaptive_simpson(f, 0.0, 1.0, 1e-10)
    assert abs(val - 1.0) < 1e-5


def test_tail_convergent():
    val, _ = tail_integral(lambda x: math.exp(-x), 0.0, 1.0, tol=1e-12)
    assert abs(val - 1.0) < 1e-9


def test_tail_divergence_flagged():
    with pytest.raises(DivergentIntegral):
        tail_integral(lambda x: 1.0 / (1.0 + x), 0.0, 1.0)
    with pytest.raises((DivergentIntegral, OverflowError)):
        tail_integral(lambda x: math.exp(0.5 * x), 0.0, 1.0)
