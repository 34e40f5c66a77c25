import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from clusterlab.fitting import exponent_target, fit_loglog, fit_slope


def test_exact_line():
    f = fit_slope([(0, 1), (1, 3), (2, 5), (3, 7)])
    assert f.slope == pytest.approx(2.0, abs=1e-14)
    assert f.intercept == pytest.approx(1.0, abs=1e-14)
    assert f.max_residual < 1e-14


def test_quarter_power_loglog():
    lams = [16, 64, 256]
    f = fit_loglog(lams, [l ** 0.25 for l in lams])
    assert abs(f.slope - 0.25) <= 1e-12


def test_fit_errors():
    with pytest.raises(ValueError):
        fit_slope([(0, 1), (1, 2)])
    with pytest.raises(ValueError):
        fit_slope([(1, 1), (1, 2), (1, 3)])
    with pytest.raises(ValueError):
        fit_slope([(0, 1), (1, math.nan), (2, 3)])
    with pytest.raises(ValueError):
        fit_loglog([1, 2, 3], [1, 0, 2])


def test_exponent_targets():
    assert exponent_target("gamma", 6) == Fraction(2, 9)
    assert exponent_target("delta", "inf") == Fraction(1, 2)
    assert exponent_target("delta", math.inf) == Fraction(1, 2)
    assert exponent_target("gamma", 8) == exponent_target("delta", 8) == Fraction(1, 4)
    assert exponent_target("gamma", 2) == 0
    with pytest.raises(ValueError):
        exponent_target("gamma", 1)
    with pytest.raises(ValueError):
        exponent_target("beta", 4)


@given(st.integers(2, 200))
def test_gamma_delta_order(q):
    # gamma dominates below the crossover, delta above it
    g, d = exponent_target("gamma", q), exponent_target("delta", q)
    assert isinstance(g, Fraction)
    if q < 8:
        assert g > d
    elif q > 8:
        assert d > g
    else:
        assert g == d


@given(st.floats(-3, 3), st.floats(-5, 5),
       st.lists(st.floats(-10, 10), min_size=3, max_size=12, unique=True))
def test_recovers_any_line(a, b, xs):
    if np.ptp(xs) < 1e-3:
        return
    f = fit_slope([(x, a * x + b) for x in xs])
    assert f.slope == pytest.approx(a, abs=1e-8)
    assert f.max_residual < 1e-8
