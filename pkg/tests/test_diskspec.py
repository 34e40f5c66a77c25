import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from clusterlab import diskspec as d
from clusterlab.fitting import exponent_target, fit_loglog

# frozen from an mpmath besseljzero run (50 digits)
J01 = 2.404825557695773
J11 = 3.831705970207512


def test_first_zeros_frozen():
    assert d.bessel_zero(0, 1) == pytest.approx(J01, abs=1e-14)
    assert d.bessel_zero(1, 1) == pytest.approx(J11, abs=1e-14)
    assert abs(special.jv(0, d.bessel_zero(0, 1))) <= 1e-12


@pytest.mark.parametrize("m,k", [(0, 5), (3, 2), (17, 4), (60, 1), (61, 3), (150, 2)])
def test_zeros_match_mpmath(m, k):
    ref = float(mpmath.besseljzero(m, k))
    assert d.bessel_zero(m, k) == pytest.approx(ref, rel=1e-13)
    # mpmath counts the trivial zero of J_0' at 0; the scan skips it
    refn = float(mpmath.besseljzero(m, k + (m == 0), derivative=1))
    assert d.bessel_zero(m, k, "neumann") == pytest.approx(refn, rel=1e-12)


@given(st.integers(0, 80), st.integers(1, 6))
def test_zero_order_and_interlacing(m, k):
    z = d.bessel_zero(m, k)
    assert abs(special.jv(m, z)) <= 1e-12
    assert d.bessel_zero(m, k + 1) > z
    # j_{m,k} < j_{m+1,k} < j_{m,k+1}
    assert z < d.bessel_zero(m + 1, k) < d.bessel_zero(m, k + 1)


def test_bad_arguments():
    with pytest.raises(ValueError):
        d.bessel_zero(-1, 1)
    with pytest.raises(ValueError):
        d.bessel_zero(2, 0)
    with pytest.raises(ValueError):
        d.bessel_zero(2, 1, "robin")
    with pytest.raises(ValueError):
        d.mode_lq_ratio(d.make_mode(1, 1), 1.5)
    with pytest.raises(ValueError):
        d.mode_eval(d.make_mode(1, 1), 1.2, 0.0)


@pytest.mark.parametrize("m,k,bc", [(0, 1, "dirichlet"), (7, 3, "dirichlet"), (40, 1, "dirichlet"),
                                    (2, 2, "neumann")])
def test_mode_normalization(m, k, bc):
    mode = d.make_mode(m, k, bc)
    val, _ = integrate.quad(lambda r: mode.radial(r) ** 2 * r, 0, 1, limit=200, epsabs=1e-14)
    assert 2 * math.pi * val == pytest.approx(1.0, abs=1e-10)


def test_mode_values():
    mode = d.make_mode(0, 1)
    assert d.mode_eval(mode, 0.0, 0.3) == pytest.approx(mode.norm, rel=1e-15)
    for m, k in [(0, 1), (5, 2), (33, 1)]:
        assert abs(d.mode_eval(d.make_mode(m, k), 1.0, 0.7)) <= 1e-12


def test_whispering_peak_airy_scaling():
    mode = d.make_mode(50, 1)
    r = np.linspace(0.5, 1, 200001)
    rstar = r[np.argmax(np.abs(mode.radial(r)))]
    assert 1 - rstar == pytest.approx(d.airy_offset(50), rel=1e-3)
    # Airy scaling: (1 - r*) m^{2/3} approaches a constant
    c50 = d.airy_offset(50) * 50 ** (2 / 3)
    c200 = d.airy_offset(200) * 200 ** (2 / 3)
    assert c200 == pytest.approx(c50, rel=0.05)


def test_concentration_width_basic():
    w, cap = d.concentration_width(d.make_mode(0, 1), 0.9)
    assert 0.6 < w <= 1.0 and cap == pytest.approx(0.9, abs=1e-10)
    assert d.concentration_width(d.make_mode(5, 1), 1.0)[0] == 1.0
    with pytest.raises(ValueError):
        d.concentration_width(d.make_mode(5, 1), 0.0)


def test_whispering_width_slope():
    f = d.whispering_width_sweep()
    assert abs(f.slope + 2 / 3) <= 0.08


def test_lq_q2_and_monotone():
    for m, k in [(0, 3), (20, 1), (3, 4)]:
        mode = d.make_mode(m, k)
        assert d.mode_lq_ratio(mode, 2) == pytest.approx(1.0, abs=1e-12)
        # area-normalized norms increase with q
        vals = [d.mode_lq_ratio(mode, q) * math.pi ** (0.5 - 1 / q) for q in (2, 3, 4, 6, 8, 16)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
        sup = d.mode_lq_ratio(mode, math.inf) * math.sqrt(math.pi)
        assert sup >= vals[-1]


def test_lq_slope_q6():
    f = d.whispering_lq_sweep(6)
    assert abs(f.slope - float(exponent_target("gamma", 6))) <= 0.05


def test_radial_sup_slope():
    f = d.radial_sup_sweep()
    assert abs(f.slope - 0.5) <= 0.05


def test_cluster_contains_ground_state():
    c = d.cluster_members(2.0)
    assert any(md.m == 0 and md.k == 1 for md in c.modes)
    assert all(2.0 <= md.zero <= 3.0 for md in c.modes)


def test_cluster_window_and_weyl_count():
    lams = [50, 75, 100, 125, 150, 175, 200]
    counts = d.weyl_counts(lams)
    f = np.polyfit(lams, counts, 1)
    pred = np.polyval(f, 100)
    assert abs(counts[2] - pred) <= 0.2 * pred
    # two-term Weyl law for the unit disk: N(lam) ~ lam^2/4 - lam/2
    assert abs(counts[2] - (100 / 2 - 0.25)) <= 0.2 * 50
    c = d.cluster_members(100.0)
    assert all(100 <= md.zero <= 101 for md in c.modes)
    assert c.certificate["interlacing"]


def test_cluster_gram_identity():
    g = d.ClusterGrid(d.cluster_members(30.0))
    G = g.gram()
    assert np.max(np.abs(G - np.eye(G.shape[0]))) <= 1e-8
    # orthogonality across angular orders is exact in the FFT field
    f = g.field(np.eye(G.shape[0])[0])
    assert g.lq(f, 2) == pytest.approx(1.0, abs=1e-8)


@given(st.integers(0, 2**31 - 1))
def test_cluster_q2_norm_is_one(seed):
    g = d.ClusterGrid(d.cluster_members(20.0))
    rng = np.random.default_rng(seed)
    n = len(g.cluster.modes)
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    c /= np.linalg.norm(c)
    assert g.lq(g.field(c), 2) == pytest.approx(1.0, abs=1e-8)


def test_single_mode_cluster_matches_mode_ratio():
    # window [2, 3] holds only j_{0,1}
    c = d.cluster_members(2.0)
    assert len(c.modes) == 1
    out = d.cluster_opnorm(2.0, 6, trials=2)
    assert out["value"] == pytest.approx(d.mode_lq_ratio(c.modes[0], 6), rel=1e-6)


def test_cluster_opnorm_errors():
    with pytest.raises(ValueError):
        d.cluster_opnorm(30.0, 4, trials=0)
    with pytest.raises(ValueError):
        d.cluster_members(1.0)
    with pytest.raises(ValueError):
        d.cluster_members(30.0).normalized(np.zeros(len(d.cluster_members(30.0).modes)))
