import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clusterlab import hamflow as hf

THETA, MU = 0.25, 64.0


@pytest.fixture(scope="module")
def disk():
    return hf.RescaledSymbol("disk", THETA, MU)


def _seeds(n=24, s=0.25, seed=0):
    return hf.make_seeds(THETA, n, 0.0, s, MU, seed=seed)


def test_flat_matches_closed_form():
    sym = hf.RescaledSymbol("flat", THETA, MU)
    z, k = _seeds()
    fm = hf.variational_flow(sym, z, k, 0.0, 0.3)
    ref = hf.flat_closed_form(z, k, 0.0, 0.3)
    assert np.max(np.abs(fm.z - ref.z)) <= 1e-8
    assert np.max(np.abs(fm.zeta - k)) == 0
    assert np.max(np.abs(fm.J - ref.J)) <= 1e-8
    # d_zeta z = -(s - r) times the projector orthogonal to zeta over |zeta|
    u = k / np.linalg.norm(k, axis=1)[:, None]
    P = (np.eye(2)[None] - u[:, :, None] * u[:, None, :]) / np.linalg.norm(k, axis=1)[:, None, None]
    np.testing.assert_allclose(ref.dzeta_z, -0.3 * P, atol=1e-15)
    np.testing.assert_array_equal(ref.dz_z, np.tile(np.eye(2), (len(z), 1, 1)))
    np.testing.assert_array_equal(ref.dz_zeta, 0 * ref.dz_zeta)


def test_flat_second_derivatives_vanish():
    # the flat flow is affine in z; only zeta-derivatives of J survive
    sym = hf.RescaledSymbol("flat", THETA, MU)
    z, k = _seeds(6)
    vanish = {"dz_z-I", "dzeta_zeta-I", "dz_zeta", "d2z_z", "d2z_zeta", "dzdzeta_z", "dzdzeta_zeta"}
    for r in hf.flow_derivative_report(sym, z, k, 0.0, 0.2):
        if r["estimate"] in vanish:
            assert r["value"] <= 1e-6, r


def test_disk_symplectic_and_det(disk):
    z, k = _seeds(40)
    fm = hf.variational_flow(disk, z, k, 0.0, 0.25)
    assert fm.det_error() <= 1e-8
    assert fm.symplectic_error() <= 1e-8


def test_group_law(disk):
    z, k = _seeds(16)
    a = hf.flow(disk, z, k, 0.0, 0.2)
    b = hf.flow(disk, a.z, a.zeta, 0.2, 0.3)
    c = hf.flow(disk, z, k, 0.0, 0.3)
    assert np.max(np.abs(np.c_[b.z - c.z, b.zeta - c.zeta])) <= 1e-8
    back = hf.flow(disk, c.z, c.zeta, 0.3, 0.0)
    assert np.max(np.abs(np.c_[back.z - z, back.zeta - k])) <= 1e-8


def test_ray_slope_tracks_theta(disk):
    z, k = _seeds(8, s=0.1)
    k = np.c_[np.full(8, THETA), np.ones(8)]
    sl = np.abs(hf.slope_along(disk, z, k, 0.0, 0.1))
    assert np.all(sl >= THETA / 2) and np.all(sl <= 2 * THETA)


@settings(max_examples=25)
@given(st.floats(-0.3, 0.3), st.floats(0.05, 0.7), st.floats(0.5, 4.0), st.floats(0.2, 5.0))
def test_homogeneity(x2, t, z3, scale):
    sym = hf.RescaledSymbol("disk", THETA, MU)
    z = np.array([[x2, 0.0]])
    k = np.array([[t * z3, z3]])
    d1 = sym.derivs(0.0, z, k)
    d2 = sym.derivs(0.0, z, scale * k)
    assert d2["q"][0] == pytest.approx(scale * d1["q"][0], rel=1e-12)
    np.testing.assert_allclose(d2["q_zeta"], d1["q_zeta"], rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(d2["q_zetazeta"] * scale, d1["q_zetazeta"], rtol=1e-9, atol=1e-12)


def test_derivatives_against_finite_differences(disk):
    z = np.array([[0.05, 0.3]])
    k = np.array([[0.3, 1.1]])
    d = disk.derivs(0.0, z, k)
    h = 1e-6
    for i in range(2):
        e = np.zeros((1, 2))
        e[0, i] = h
        fd = (disk.value(0.0, z, k + e) - disk.value(0.0, z, k - e)) / (2 * h)
        assert d["q_zeta"][0, i] == pytest.approx(fd[0], abs=1e-8)
        fd2 = (disk.derivs(0.0, z, k + e)["q_zeta"] - disk.derivs(0.0, z, k - e)["q_zeta"]) / (2 * h)
        np.testing.assert_allclose(d["q_zetazeta"][0, :, i], fd2[0], atol=1e-7)
    e = np.array([[h, 0.0]])
    fd = (disk.value(0.0, z + e, k) - disk.value(0.0, z - e, k)) / (2 * h)
    assert d["q_z"][0, 0] == pytest.approx(fd[0], abs=1e-7)
    assert d["q_z"][0, 1] == 0  # q does not depend on x3


def test_symbol_bounds_scale(disk):
    # at |zeta| ~ mu the zeta-Hessian is O(1/mu)
    rng = np.random.default_rng(2)
    t = rng.uniform(0.1, 0.6, 50)
    k = MU * np.c_[t, np.ones(50)]
    z = np.c_[rng.uniform(-0.3, 0.3, 50), np.zeros(50)]
    d = disk.derivs(0.0, z, k)
    assert np.max(np.abs(d["q"])) <= 2 * MU
    assert np.max(np.abs(d["q_zeta"])) <= 2
    assert np.max(np.abs(d["q_zetazeta"])) * MU <= 10


def test_jacobian_linear_bound(disk):
    ratios = []
    for span in (0.05, 0.1, 0.2):
        z, k = hf.make_seeds(THETA, 16, 0.0, span, MU)
        fm = hf.variational_flow(disk, z, k, 0.0, span)
        ratios.append(np.max(np.abs(fm.dz_z - np.eye(2))) / span)
    assert max(ratios) <= 2 * min(ratios) + 1e-3


def test_corollary_discrepancy_monotone():
    z, k = _seeds(16)
    vals = [hf.corollary_discrepancy(hf.RescaledSymbol("disk", THETA, MU, c0=c0), z, k, 0.0, 0.25)
            for c0 in (0.1, 0.05, 0.025)]
    assert vals[0] > vals[1] > vals[2]


def test_guards(disk):
    z, k = _seeds(2)
    with pytest.raises(ValueError):
        hf.flow(disk, z, k, 0.0, 1.5)
    with pytest.raises(ValueError):
        hf.flow(disk, z, k[:1], 0.0, 0.1)
    with pytest.raises(ValueError):
        hf.RescaledSymbol("disk", 0.01, MU)
    with pytest.raises(ValueError):
        hf.RescaledSymbol("sphere", THETA, MU)
    with pytest.raises(ValueError):
        disk.derivs(0.0, z, -k)
    with pytest.raises(ValueError):
        hf.flow_derivative_report(disk, z, k, 0.0, 0.1, eps=1e-6)


def test_flowmap_json_roundtrip(disk):
    z, k = _seeds(3)
    fm = hf.variational_flow(disk, z, k, 0.0, 0.1)
    back = hf.FlowMap.from_json(fm.to_json())
    np.testing.assert_array_equal(back.J, fm.J)
    np.testing.assert_array_equal(back.z, fm.z)
    assert back.stats == fm.stats


def test_periodic_mode_custom_profile():
    sym = hf.RescaledSymbol("custom-perturbation", 0.5, MU)
    z, k = hf.make_seeds(0.5, 8, 0.0, 0.2, MU)
    fm = hf.variational_flow(sym, z, k, 0.0, 0.2)
    assert fm.symplectic_error() <= 1e-8
