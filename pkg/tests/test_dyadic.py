import functools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from clusterlab import dyadic as dy


@functools.lru_cache(maxsize=None)
def _family(lam):
    return dy.build_angular_family(lam)


def _plane(lam, n, xi2, xi3):
    # grid resolving 4 lam with (xi2, xi3) on the frequency lattice
    h = math.pi / (4 * lam) * 0.9
    L = n * h
    kap = 2 * math.pi / L
    x = h * np.arange(n)
    X2, X3 = np.meshgrid(x, x, indexing="ij")
    k2, k3 = kap * round(xi2 / kap), kap * round(xi3 / kap)
    return np.exp(1j * (k2 * X2 + k3 * X3)), (h, h), (k2, k3)


def test_n_lambda():
    assert dy.n_lambda(64) == 2
    assert dy.n_lambda(512) == 3
    assert dy.n_lambda(513) == 4


def test_family_at_64():
    fam = dy.build_angular_family(64)
    assert sorted(c.index for c in fam) == [-1, 1, 2]
    total = sum(c(np.array(0.0), np.array(64.0)) for c in fam)
    assert abs(total - 1) <= 1e-12
    b1 = [c for c in fam if c.index == 1][0]
    assert b1(np.array(32.0 + 1e-9), np.array(64.0)) == 0


@pytest.mark.parametrize("lam", [64, 256, 1024, 4096])
def test_certification(lam):
    rep = dy.certify_family(dy.build_angular_family(lam))
    assert rep["partition_error"] <= 1e-12
    assert rep["mirror_error"] == 0


def test_cap_support():
    lam = 4096.0
    fam = dy.build_angular_family(lam)
    cap = [c for c in fam if c.index == c.n][0]
    b = lam ** (2 / 3)
    xi2 = np.linspace(-2 * b, 2 * b, 4001)
    v = cap(xi2, np.full_like(xi2, lam))
    assert np.all(v[np.abs(xi2) > b] == 0)


@given(st.floats(-1, 1), st.floats(0.5, 2.0), st.sampled_from([64.0, 300.0, 1024.0]))
def test_partition_pointwise(u2, u3, lam):
    fam = _family(lam)
    xi2, xi3 = np.array(u2 * lam / 8), np.array(u3 * lam)
    vals = [float(c(xi2, xi3)) for c in fam]
    assert all(0 <= v <= 1 for v in vals)
    assert abs(sum(vals) - 1) <= 1e-12
    assert sum(v > 0 for v in vals) <= 2


@given(st.floats(-0.5, 0.5), st.floats(0.25, 4.0))
def test_mirror_symmetry(u2, u3):
    lam = 1024.0
    for c in _family(lam):
        m = dy.CutoffFamily("angular", lam, -c.index, c.n) if abs(c.index) < c.n else c
        assert m(np.array(-u2 * lam), np.array(u3 * lam)) == c(np.array(u2 * lam), np.array(u3 * lam))


def test_apply_multiplier_cases():
    lam = 1024.0
    fam = dy.build_angular_family(lam)
    cap = [c for c in fam if c.index == c.n][0]
    f, h, _ = _plane(lam, 128, 0.0, lam)
    np.testing.assert_allclose(dy.apply_multiplier(cap, f, h), f, atol=1e-12)
    b3 = [c for c in fam if c.index == 3][0]
    g, h, (k2, _) = _plane(lam, 256, lam / 2, lam)
    assert b3(np.array(k2), np.array(lam)) == 0
    assert np.max(np.abs(dy.apply_multiplier(b3, g, h))) <= 1e-12


def test_reconstruction_on_covered_set():
    lam = 256.0
    h = (0.9 * math.pi / (4 * lam),) * 2
    f = dy.random_covered_field(lam, (128, 128), h, seed=3)
    total = sum(dy.apply_multiplier(c, f, h) for c in dy.build_angular_family(lam))
    assert np.linalg.norm(total - f) <= 1e-10 * np.linalg.norm(f)


def test_square_function_ratio():
    lam = 1024.0
    f, h, _ = _plane(lam, 128, 0.0, lam)  # interior of the cap
    assert dy.almost_orthogonality_check(lam, f, h) == pytest.approx(1.0, abs=1e-10)
    hh = (0.9 * math.pi / (4 * lam),) * 2
    for seed in range(3):
        g = dy.random_covered_field(lam, (128, 128), hh, seed=seed)
        assert 0.7 <= dy.almost_orthogonality_check(lam, g, hh) <= 1.5
    with pytest.raises(ValueError):
        dy.almost_orthogonality_check(lam, np.zeros((16, 16)), hh)


def test_nyquist_guard():
    with pytest.raises(ValueError):
        dy.check_nyquist((64, 64), (1.0, 1.0), 64.0)
    c = dy.build_angular_family(64)[0]
    with pytest.raises(ValueError):
        dy.apply_multiplier(c, np.ones((16, 16)), (1.0, 1.0))


def test_family_guards():
    with pytest.raises(ValueError):
        dy.build_angular_family(4)
    with pytest.raises(ValueError):
        dy.build_angular_family(8)  # N = 1
    with pytest.raises(ValueError):
        dy.CutoffFamily("angular", 64.0, 5, 2)(np.zeros(1), np.zeros(1))


def test_aux_separations():
    lam = 4096.0
    fam = dy.build_angular_family(lam)
    for c in fam:
        if 0 < c.index < c.n:
            sep = dy.aux_separation(c, fam)
            assert sep["one_minus_phi_to_beta"] >= 0.99 * sep["required"]
            assert sep["one_minus_psi_to_phi"] >= 0.99 * sep["required"]
            assert sep["psi_to_far_beta"] >= sep["required"] or math.isinf(sep["psi_to_far_beta"])


def test_shell_and_conic():
    rad = np.linspace(0, 100, 2001)
    total = sum(dy.shell_cutoff(k, rad) for k in range(0, 8))
    np.testing.assert_allclose(total, 1.0, atol=1e-14)
    assert np.all(dy.shell_cutoff(3, np.array([3.9, 16.1])) == 0)
    assert dy.conic_cutoff(1.0, 0.0, 1.0) == 1.0
    assert dy.conic_cutoff(10.0, 0.0, 1.0) == 0.0


def test_dict_roundtrip():
    c = dy.build_angular_family(256)[1]
    assert dy.CutoffFamily.from_dict(c.to_dict()) == c
