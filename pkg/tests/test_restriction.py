import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from clusterlab import restriction as R


def test_value_at_origin():
    full = R.make_full_circle()
    assert full.extension(0.0, 0.0) == pytest.approx(2 * math.pi, abs=1e-12)
    for j in (1, 3, 6):
        arc = R.make_arc(j, normalize=False)
        assert arc.extension(0.0, 0.0) == pytest.approx(2.0 ** -j, abs=1e-15)


def test_extension_matches_adaptive_quadrature():
    arc = R.make_arc(2, n_nodes=64, density=lambda t: 1 + t, normalize=False)
    d = arc.delta
    for x in [(3.0, -1.0), (40.0, 7.5)]:
        re = integrate.quad(lambda t: (1 + t) * math.cos(x[0] * math.cos(t) + x[1] * math.sin(t)), -d / 2, d / 2,
                            epsabs=1e-14)[0]
        im = integrate.quad(lambda t: (1 + t) * math.sin(x[0] * math.cos(t) + x[1] * math.sin(t)), -d / 2, d / 2,
                            epsabs=1e-14)[0]
        assert arc.extension(*x) == pytest.approx(re + 1j * im, abs=1e-12)


@given(st.integers(1, 6), st.floats(-30, 30), st.floats(-30, 30))
def test_rescaling_identity(j, y1, y2):
    arc = R.make_arc(j)
    d = arc.delta
    F = arc.rescaled(np.array([y1]), np.array([y2]))[0, 0]
    x1, x2 = y1 / d**2, y2 / d
    assert F == pytest.approx(np.exp(-1j * x1) * arc.extension(x1, x2), abs=1e-9)
    assert abs(F) <= arc.arc_length * np.max(np.abs(arc.density)) + 1e-12


def test_normalized_density():
    for j in (1, 4):
        arc = R.make_arc(j)
        assert np.sum(arc.weights * np.abs(arc.density) ** 2) == pytest.approx(1.0, abs=1e-14)


def test_guards():
    with pytest.raises(ValueError):
        R.make_arc(0)
    with pytest.raises(ValueError):
        R.make_arc(2, n_nodes=8)
    with pytest.raises(ValueError):
        R.extension_lq_norm(R.make_arc(2), 8, box=4.0)
    with pytest.raises(ValueError):
        R.knapp_no_gain_check(2)
    with pytest.raises(ValueError):
        R.knapp_no_gain_check(7)


def test_full_circle_norm_against_quadrature():
    out = R.full_circle_norm(8, box=32.0)
    ref = integrate.quad(lambda r: (math.sqrt(2 * math.pi) * abs(special.j0(r))) ** 8
                         * 2 * math.pi * r, 0, 32, limit=400)[0] ** (1 / 8)
    assert out["norm"] == pytest.approx(ref, rel=1e-8)
    assert 0 < out["tail"] < 0.1
    assert out["value_at_0"] == pytest.approx(math.sqrt(2 * math.pi))


def test_knapp_contrast():
    out = R.knapp_no_gain_check(6)
    assert abs(out["q8_slope"] + 1 / 8) <= 0.05
    assert abs(out["q6_slope"]) <= 0.05
    for q in (6, 8):
        fc = out["full_circle"][q]
        assert np.isfinite(fc["norm"]) and fc["norm"] > 0


def test_box_convergence():
    # doubling the box changes the q = 8 norm by less than the tail bound
    a = R.extension_lq_norm(R.make_arc(3), 8, box=32.0)
    b = R.extension_lq_norm(R.make_arc(3), 8, box=64.0)
    assert abs(b["norm"] ** 8 / a["norm"] ** 8 - 1) <= 2 * a["tail"] + 1e-3
