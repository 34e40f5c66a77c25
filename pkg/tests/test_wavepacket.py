import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from clusterlab import wavepacket as wp


@pytest.mark.parametrize("c", [1 / 16, 0.1, 0.25])
def test_window_normalization(c):
    w = wp.make_window(c)
    # radial Plancherel: ||g||^2 = (2 pi)^{-2} int ghat^2 = (2 pi)^{-1} int_0^c ghat(r)^2 r dr
    val = integrate.quad(lambda r: w.ghat(np.array([r]))[0] ** 2 * r, 0, c, epsrel=1e-13, limit=200)[0]
    assert math.sqrt(val / (2 * math.pi)) == pytest.approx(1 / (2 * math.pi), abs=1e-10)
    assert w.record["g_l2"] == pytest.approx(1 / (2 * math.pi), abs=1e-12)


def test_window_real_radial_compact():
    w = wp.make_window(0.25)
    g = w.spatial_grid(512, 0.5)
    assert np.max(np.abs(g.imag)) <= 1e-12 * np.max(np.abs(g))
    core = g[1:, 1:]
    np.testing.assert_allclose(core, core[::-1, ::-1], atol=1e-14)
    assert np.all(w.ghat(np.array([0.25, 0.3, 1.0])) == 0)
    assert w.g(np.array([0.0, 3.0]))[0] == pytest.approx(np.max(np.abs(g.real)), rel=1e-3)
    with pytest.raises(ValueError):
        wp.make_window(0.5)


def _setup(mu=64.0):
    w = wp.make_window()
    grid, fam = wp.sample_family(mu, w, seed=1)
    return w, grid, fam


def test_zero_maps_to_zero():
    w, grid, fam = _setup()
    F = wp.forward(np.zeros((grid.n, grid.n)), 64.0, w, grid, p=np.array([[0, 0], [3, 1]]))
    assert np.all(F.G == 0)
    assert np.all(wp.adjoint(F, w) == 0)


def test_plane_wave_modulus():
    mu = 64.0
    w, grid, _ = _setup(mu)
    eta_idx = np.array([2, 5])
    X2, X3 = grid.mesh()
    f = np.exp(1j * grid.kappa * (eta_idx[0] * X2 + eta_idx[1] * X3))
    F = wp.forward(f, mu, w, grid)
    for i in range(0, F.p.shape[0], 7):
        d = grid.kappa * np.hypot(*(F.p[i] - eta_idx)) / math.sqrt(mu)
        expect = w.ghat(np.array([d]))[0] / math.sqrt(mu)
        mod = np.abs(F.values(i))
        assert np.max(np.abs(mod - expect)) <= 1e-10 * expect + 1e-15


@pytest.mark.parametrize("mu", [16.0, 64.0, 256.0])
def test_isometry_and_reconstruction(mu):
    for row in wp.isometry_report(mu, wp.make_window(), seed=0):
        assert row["isometry_err"] <= 1e-6
        assert row["reconstruction_err"] <= 1e-6


def test_frame_constant_near_one():
    w, grid, _ = _setup()
    assert abs(wp.frame_constant(64.0, w, grid) - 1) <= 1e-6


def test_adjointness_random():
    mu = 64.0
    w, grid, fam = _setup(mu)
    rng = np.random.default_rng(5)
    f = fam["random"]
    F = wp.forward(f, mu, w, grid)
    H = wp.PhaseSpaceField(mu=F.mu, c=F.c, grid=F.grid, K=F.K, m=F.m, p=F.p,
                           G=rng.standard_normal(F.G.shape) + 1j * rng.standard_normal(F.G.shape))
    lhs = F.inner(H)
    rhs = complex(np.vdot(wp.adjoint(H, w), f)) * grid.h ** 2
    assert abs(lhs - rhs) <= 1e-8 * abs(lhs)


@settings(max_examples=10)
@given(st.integers(0, 10_000), st.floats(-2, 2), st.floats(-2, 2))
def test_linearity(seed, a, b):
    mu = 16.0
    w = wp.make_window()
    grid, fam = wp.sample_family(mu, w, seed=seed)
    f, g = fam["gaussian"], fam["random"]
    p = wp.forward(f + g, mu, w, grid).p
    Ff = wp.forward(f, mu, w, grid, p=p)
    Fg = wp.forward(g, mu, w, grid, p=p)
    Fs = wp.forward(a * f + b * g, mu, w, grid, p=p, check=False)
    assert np.allclose(Fs.G, a * Ff.G + b * Fg.G, atol=1e-12 * (1 + np.abs(Ff.G).max() + np.abs(Fg.G).max()))


def test_under_resolved_and_grid_errors():
    w, grid, fam = _setup()
    X2, _ = grid.mesh()
    top = np.exp(1j * math.pi / grid.h * X2 * 0.9)
    with pytest.raises(ValueError):
        wp.forward(top, 64.0, w, grid)
    with pytest.raises(ValueError):
        wp.forward(np.zeros((4, 4)), 64.0, w, grid)
    with pytest.raises(ValueError):
        wp.forward(fam["gaussian"], 64.0, w, grid, m=3)


def test_npz_roundtrip(tmp_path):
    w, grid, fam = _setup(16.0)
    F = wp.forward(fam["gaussian"], 16.0, w, grid)
    F.to_npz(tmp_path / "f.npz")
    back = wp.PhaseSpaceField.from_npz(tmp_path / "f.npz")
    assert np.array_equal(back.G, F.G) and np.array_equal(back.p, F.p)
    assert back.inner(F) == pytest.approx(F.norm() ** 2)


def _bump(grid, centre, mu, w):
    X2, X3 = grid.mesh()
    s = 4.0 / (w.c * math.sqrt(mu))
    d2 = (X2 - centre) ** 2 + (X3 - grid.L / 2) ** 2
    return np.exp(-d2 / (2 * s * s)).astype(complex)


def test_weighted_bounds():
    mu = 64.0
    w, grid, fam = _setup(mu)
    f0 = fam["gaussian"]
    assert wp.weighted_bound_check(f0, mu, 0, w, grid) == pytest.approx(1.0, abs=1e-6)
    # centred at x2 = 0 (torus origin) and at x2 = 1
    f = np.roll(f0, -grid.n // 2, axis=0)
    assert wp.weighted_bound_check(f, mu, 2, w, grid) <= 5
    shift = int(round(1.0 / grid.h))
    f1 = np.roll(f, shift, axis=0)
    assert wp.weighted_bound_check(f1, mu, -2, w, grid) <= 5
    with pytest.raises(ValueError):
        wp.weighted_bound_check(f, mu, 4, w, grid)
    with pytest.raises(ZeroDivisionError):
        wp.weighted_bound_check(np.zeros_like(f), mu, 1, w, grid)


def test_tt_star_peak_and_support():
    mu = 64.0
    w = wp.make_window()
    K0 = abs(wp.tt_star_kernel(mu, w, np.zeros((1, 2)), np.zeros((1, 2)))[0])
    # diagonal value (2 pi)^{-2} int ghat^2 = ||g||^2 = (2 pi)^{-2}
    assert K0 == pytest.approx((2 * math.pi) ** -2, rel=1e-6)
    rng = np.random.default_rng(0)
    dx = rng.normal(size=(20, 2)) / math.sqrt(mu)
    dxi = rng.normal(size=(20, 2)) * 0.5 * w.c * math.sqrt(mu)
    assert np.all(np.abs(wp.tt_star_kernel(mu, w, dx, dxi)) <= K0 * (1 + 1e-12))
    far = np.array([[2.01 * w.c * mu, 0.0]])
    assert wp.tt_star_kernel(mu, w, np.zeros((1, 2)), far)[0] == 0


def test_tt_star_decay_slope():
    out = wp.tt_star_kernel_decay(64.0, wp.make_window(), axis="x")
    assert out["slope"] <= -4
