"""Wave packet transform with a compactly Fourier-supported window.

    T_mu f(x', xi') = mu^{1/2} int e^{-i<xi', y'-x'>} g(mu^{1/2}(y'-x')) f(y') dy'

is realized on the torus ``[0, L)^2``.  On the Fourier side, for fixed
``xi'`` the transform is ``f_hat(eta) * mu^{-1/2} g_hat(mu^{-1/2}(xi' - eta))``
so only lattice frequencies within ``c mu^{1/2}`` of ``xi'`` contribute.
``xi'`` runs over the dual lattice ``(2 pi / L) Z^2`` itself, and the stored
samples are the demodulated envelopes ``G = e^{-i<xi', x'>} T_mu f``.  These
are trigonometric polynomials of radius ``c mu^{1/2}`` and are held exactly on
a coarse ``m x m`` grid in ``x'``.

With this choice ``T* T`` is the Fourier multiplier
``S(eta) = sum_{xi'} h_xi^2 mu^{-1} g_hat(mu^{-1/2}(xi' - eta))^2``.  It is
independent of ``eta``, and it equals 1 up to the lattice Riemann-sum error of
``int g_hat^2``, which is at most a few 1e-7 once ``h_xi <= c mu^{1/2} / 12``.
The adjoint is the exact transpose of the forward map for the discrete inner
products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

_PER_RADIUS = 12  # lattice points per window radius c mu^{1/2}


def _bump_sq_integral() -> float:
    f = lambda r: math.exp(-2.0 / (1.0 - r * r)) * 2 * math.pi * r if r < 1 else 0.0
    return integrate.quad(f, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)[0]


@dataclass(frozen=True)
class Window:
    """Radial window with ``g_hat(z) = A exp(-1/(1 - |z/c|^2))`` on ``|z| < c``."""

    c: float
    amplitude: float
    record: dict = field(default_factory=dict)

    def ghat(self, zeta_abs) -> np.ndarray:
        t = np.asarray(zeta_abs, dtype=float) / self.c
        out = np.zeros_like(t)
        inside = t < 1
        out[inside] = self.amplitude * np.exp(-1.0 / (1.0 - t[inside] ** 2))
        return out

    def g(self, r, n_quad: int = 400) -> np.ndarray:
        """Spatial window ``(2 pi)^{-1} int_0^c g_hat(rho) J0(rho r) rho drho``."""
        x, w = np.polynomial.legendre.leggauss(n_quad)
        rho = 0.5 * self.c * (x + 1)
        w = 0.5 * self.c * w
        r = np.asarray(r, dtype=float)
        vals = special.j0(np.multiply.outer(r, rho)) @ (w * rho * self.ghat(rho))
        return vals / (2 * math.pi)

    def spatial_grid(self, n: int, h: float) -> np.ndarray:
        """``g`` on an ``n x n`` grid of spacing ``h`` centred at the origin,
        by inverse 2-D FFT of sampled ``g_hat`` (complex, for symmetry checks)."""
        k = 2 * math.pi * np.fft.fftfreq(n, d=h)
        K2, K3 = np.meshgrid(k, k, indexing="ij")
        gh = self.ghat(np.hypot(K2, K3))
        out = np.fft.ifft2(gh) / h**2
        return np.fft.fftshift(out)

    def as_dict(self) -> dict:
        return {"c": self.c, "amplitude": self.amplitude, **self.record}


def make_window(c: float = 1.0 / 16) -> Window:
    """Window of Fourier radius ``c`` with ``||g||_2 = 1/(2 pi)``."""
    if not (0 < c <= 0.25):
        raise ValueError("window radius c must lie in (0, 1/4]")
    I = _bump_sq_integral() * c * c
    A = 1.0 / math.sqrt(I)
    # Plancherel: ||g||^2 = (2 pi)^{-2} int g_hat^2 = (2 pi)^{-2}
    ghat_l2 = A * A * I
    rec = {"ghat_l2_sq": ghat_l2, "g_l2": math.sqrt(ghat_l2) / (2 * math.pi)}
    return Window(c=c, amplitude=A, record=rec)


@dataclass(frozen=True)
class TorusGrid:
    """Periodic grid ``[0, L)^2`` with ``n`` points per axis; axes are (x2, x3)."""

    L: float
    n: int

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def kappa(self) -> float:
        return 2 * math.pi / self.L

    def axis(self) -> np.ndarray:
        return self.h * np.arange(self.n)

    def centered_axis(self) -> np.ndarray:
        x = self.axis()
        return np.where(x >= self.L / 2, x - self.L, x)

    def mesh(self):
        x = self.axis()
        return np.meshgrid(x, x, indexing="ij")


def torus_for(mu: float, w: Window, n: int) -> TorusGrid:
    """Torus whose dual lattice resolves the window with ``_PER_RADIUS`` points."""
    return TorusGrid(L=2 * math.pi * _PER_RADIUS / (w.c * math.sqrt(mu)), n=n)


def _radius_index(mu: float, w: Window, grid: TorusGrid) -> int:
    return int(math.floor(w.c * math.sqrt(mu) / grid.kappa))


def _offsets(K: int) -> np.ndarray:
    r = np.arange(-K, K + 1)
    A, B = np.meshgrid(r, r, indexing="ij")
    return np.stack([A.ravel(), B.ravel()], axis=1)


@dataclass
class PhaseSpaceField:
    """Demodulated samples ``G[p, a, b]`` of ``T_mu f`` at ``xi' = kappa * p``."""

    mu: float
    c: float
    grid: TorusGrid
    K: int
    m: int
    p: np.ndarray
    G: np.ndarray

    @property
    def h_xi(self) -> float:
        return self.grid.kappa

    @property
    def h_x(self) -> float:
        return self.grid.L / self.m

    @property
    def xi(self) -> np.ndarray:
        return self.grid.kappa * self.p

    def x_axis(self) -> np.ndarray:
        return self.h_x * np.arange(self.m)

    def values(self, idx) -> np.ndarray:
        """``T_mu f(x', xi'_idx)`` on the coarse x' grid (re-modulated)."""
        x = self.x_axis()
        X2, X3 = np.meshgrid(x, x, indexing="ij")
        xi = self.xi[idx]
        return np.exp(1j * (xi[0] * X2 + xi[1] * X3)) * self.G[idx]

    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.G) ** 2)) * self.h_xi**2 * self.h_x**2)

    def inner(self, other: "PhaseSpaceField") -> complex:
        _check_same(self, other)
        return complex(np.vdot(other.G, self.G)) * self.h_xi**2 * self.h_x**2

    def to_npz(self, path) -> None:
        np.savez(path, mu=self.mu, c=self.c, L=self.grid.L, n=self.grid.n, K=self.K, m=self.m,
                 p=self.p, G=self.G)

    @classmethod
    def from_npz(cls, path) -> "PhaseSpaceField":
        d = np.load(path)
        return cls(mu=float(d["mu"]), c=float(d["c"]), grid=TorusGrid(float(d["L"]), int(d["n"])),
                   K=int(d["K"]), m=int(d["m"]), p=d["p"], G=d["G"])


def _check_same(a: PhaseSpaceField, b: PhaseSpaceField) -> None:
    if (a.mu, a.c, a.grid, a.K, a.m) != (b.mu, b.c, b.grid, b.K, b.m) or not np.array_equal(a.p, b.p):
        raise ValueError("phase-space fields live on different grids")


def _ghat_mu(mu: float, w: Window, grid: TorusGrid, nu: np.ndarray) -> np.ndarray:
    z = grid.kappa * np.hypot(nu[:, 0], nu[:, 1]) / math.sqrt(mu)
    return w.ghat(z) / math.sqrt(mu)


def check_resolution(f: np.ndarray, tol: float = 1e-12) -> None:
    """Require negligible spectral energy in the outer quarter of each axis."""
    F = np.abs(np.fft.fft2(f)) ** 2
    tot = F.sum()
    if tot == 0:
        return
    n2, n3 = F.shape
    k2 = np.abs(np.fft.fftfreq(n2)) > 0.375
    k3 = np.abs(np.fft.fftfreq(n3)) > 0.375
    frac = {"x2": F[k2, :].sum() / tot, "x3": F[:, k3].sum() / tot}
    worst = max(frac, key=frac.get)
    if frac[worst] > tol:
        raise ValueError(f"input under-resolved along {worst}: {frac[worst]:.2e} of the energy "
                         "sits in the outer quarter of the spectrum")


def default_m(K: int, oversample: float = 1.0) -> int:
    m = int(math.ceil(oversample * (2 * K + 1)))
    return 1 << (m - 1).bit_length()


def spectral_support(fhat: np.ndarray, rel_tol: float = 1e-13) -> np.ndarray:
    """Integer lattice indices (centred) where ``|fhat| > rel_tol * max``."""
    a = np.abs(fhat)
    if a.max() == 0:
        return np.zeros((0, 2), dtype=int)
    n2, n3 = fhat.shape
    i2, i3 = np.nonzero(a > rel_tol * a.max())
    c2 = np.where(i2 > n2 // 2, i2 - n2, i2)
    c3 = np.where(i3 > n3 // 2, i3 - n3, i3)
    return np.stack([c2, c3], axis=1)


def xi_lattice(support: np.ndarray, K: int, box: Optional[Tuple[int, int, int, int]] = None) -> np.ndarray:
    """All lattice points within index distance ``K`` of ``support`` (sorted),
    optionally clipped to an index box ``(lo2, hi2, lo3, hi3)``."""
    if support.size == 0:
        return np.zeros((0, 2), dtype=int)
    lo = support.min(axis=0) - K
    hi = support.max(axis=0) + K
    occ = np.zeros(tuple(hi - lo + 1), dtype=bool)
    occ[support[:, 0] - lo[0], support[:, 1] - lo[1]] = True
    # dilate by the disk of radius K
    from scipy import ndimage
    r = np.arange(-K, K + 1)
    disk = (r[:, None] ** 2 + r[None, :] ** 2) <= K * K
    occ = ndimage.binary_dilation(occ, structure=disk)
    i2, i3 = np.nonzero(occ)
    p = np.stack([i2 + lo[0], i3 + lo[1]], axis=1)
    if box is not None:
        keep = (p[:, 0] >= box[0]) & (p[:, 0] <= box[1]) & (p[:, 1] >= box[2]) & (p[:, 1] <= box[3])
        p = p[keep]
    return p


def forward(f: np.ndarray, mu: float, w: Window, grid: TorusGrid, p: Optional[np.ndarray] = None,
            m: Optional[int] = None, check: bool = True) -> PhaseSpaceField:
    """``T_mu f`` for ``f`` sampled on ``grid`` (shape ``(n, n)``).

    ``p`` selects the xi' lattice points (default: every point whose window
    touches the spectral support of ``f``).
    """
    f = np.asarray(f, dtype=complex)
    if f.shape != (grid.n, grid.n):
        raise ValueError(f"field shape {f.shape} does not match grid n={grid.n}")
    if check:
        check_resolution(f)
    K = _radius_index(mu, w, grid)
    if K < 2:
        raise ValueError("torus too small for the window: fewer than 2 lattice points per radius")
    m = default_m(K) if m is None else int(m)
    if m < 2 * K + 1:
        raise ValueError(f"x' grid m={m} cannot hold envelopes of radius {K} (need {2 * K + 1})")
    fhat = grid.h**2 * np.fft.fft2(f)
    if p is None:
        p = xi_lattice(spectral_support(fhat), K)
    nu = _offsets(K)
    gm = _ghat_mu(mu, w, grid, nu)
    keep = gm > 0
    nu, gm = nu[keep], gm[keep]
    n = grid.n
    coef = fhat[(p[:, None, 0] + nu[None, :, 0]) % n, (p[:, None, 1] + nu[None, :, 1]) % n]
    coef *= gm / grid.L**2
    emb = np.zeros((p.shape[0], m, m), dtype=complex)
    emb[:, nu[:, 0] % m, nu[:, 1] % m] = coef
    G = np.fft.ifft2(emb, axes=(1, 2)) * (m * m)
    return PhaseSpaceField(mu=mu, c=w.c, grid=grid, K=K, m=m, p=np.asarray(p), G=G)


def adjoint(F: PhaseSpaceField, w: Window) -> np.ndarray:
    """``T_mu^* F`` on the torus grid of ``F`` (exact transpose of ``forward``)."""
    grid = F.grid
    if abs(F.c - w.c) > 1e-15 or _radius_index(F.mu, w, grid) != F.K:
        raise ValueError("phase-space grid does not match the window support")
    nu = _offsets(F.K)
    gm = _ghat_mu(F.mu, w, grid, nu)
    keep = gm > 0
    nu, gm = nu[keep], gm[keep]
    m = F.m
    D = np.fft.fft2(F.G, axes=(1, 2)) * (F.h_x**2 * F.h_xi**2)
    D = D[:, nu[:, 0] % m, nu[:, 1] % m] * (gm / grid.L**2)
    n = grid.n
    H = np.zeros((n, n), dtype=complex)
    np.add.at(H, ((F.p[:, None, 0] + nu[None, :, 0]) % n, (F.p[:, None, 1] + nu[None, :, 1]) % n), D)
    return np.fft.ifft2(H) * (n * n)


def l2(f: np.ndarray, grid: TorusGrid) -> float:
    return math.sqrt(float(np.sum(np.abs(f) ** 2)) * grid.h**2)


def frame_constant(mu: float, w: Window, grid: TorusGrid) -> float:
    """``S = sum_nu h_xi^2 mu^{-1} g_hat(...)^2``; ``T* T = S`` exactly on full lattices."""
    K = _radius_index(mu, w, grid)
    gm = _ghat_mu(mu, w, grid, _offsets(K))
    return float(np.sum(gm**2) * grid.kappa**2)


# ---------------------------------------------------------------- test family

def sample_family(mu: float, w: Window, seed: int = 0, n: Optional[int] = None):
    """Gaussian, modulated Gaussian and random band-limited inputs on the torus.

    Widths scale with the window size ``1/(c mu^{1/2})`` so that the xi'
    lattice stays desk-sized; the modulation is ``mu (1/16, 1/4)``.
    """
    s = 4.0 / (w.c * math.sqrt(mu))
    L = 2 * math.pi * _PER_RADIUS / (w.c * math.sqrt(mu))
    eta = np.array([mu / 16, mu / 4])
    kap = 2 * math.pi / L
    eta = kap * np.round(eta / kap)
    if n is None:
        kmax = np.abs(eta).max() + 9.0 / s
        n = 1 << int(math.ceil(math.log2(2 * kmax / kap * 1.4 + 8)))
    grid = TorusGrid(L=L, n=n)
    X2, X3 = grid.mesh()
    d2 = (X2 - L / 2) ** 2 + (X3 - L / 2) ** 2
    gauss = np.exp(-d2 / (2 * s * s)).astype(complex)
    modulated = gauss * np.exp(1j * (eta[0] * X2 + eta[1] * X3))
    rng = np.random.default_rng(seed)
    k = np.fft.fftfreq(n, d=grid.h) * 2 * math.pi
    K2, K3 = np.meshgrid(k, k, indexing="ij")
    kr = np.hypot(K2, K3)
    band = 1.5 / s
    amp = np.where(kr < band, np.exp(-1.0 / np.maximum(1 - (kr / band) ** 2, 1e-300)), 0.0)
    spec = amp * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    rand = np.fft.ifft2(spec)
    return grid, {"gaussian": gauss, "modulated": modulated, "random": rand}


def isometry_report(mu: float, w: Window, seed: int = 0) -> list:
    """Isometry and reconstruction errors over the test family at ``mu``."""
    grid, fam = sample_family(mu, w, seed)
    rows = []
    for name, f in fam.items():
        F = forward(f, mu, w, grid)
        nf = l2(f, grid)
        rec = adjoint(F, w)
        rows.append({"mu": mu, "input": name, "isometry_err": abs(F.norm() / nf - 1),
                     "reconstruction_err": l2(rec - f, grid) / nf, "xi_points": int(F.p.shape[0])})
    return rows


# ---------------------------------------------------------------- weighted bounds

def _x2_profile(F: PhaseSpaceField, x2: np.ndarray) -> np.ndarray:
    """``sum_xi' h_xi^2 int |G(x2, x3, xi')|^2 dx3`` as a function of x2."""
    K, m, L = F.K, F.m, F.grid.L
    C = np.fft.fft2(F.G, axes=(1, 2)) / (m * m)
    r = np.arange(-K, K + 1)
    C = C[:, r[:, None] % m, r[None, :] % m]             # (P, nu2, nu3)
    M = 1 << (4 * K + 2).bit_length()
    Cp = np.zeros((C.shape[0], M, C.shape[2]), dtype=complex)
    Cp[:, : 2 * K + 1, :] = C
    S = np.fft.fft(Cp, axis=1)
    R = np.fft.ifft(np.sum(np.abs(S) ** 2, axis=(0, 2))) # R[d] = sum C[nu2] conj C[nu2 - d]
    d = np.arange(-2 * K, 2 * K + 1)
    Rd = R[d % M] * (L * F.h_xi**2)
    ph = np.exp(1j * F.grid.kappa * np.outer(x2, d))
    return np.real(ph @ Rd)


def weighted_bound_check(f: np.ndarray, mu: float, N: int, w: Window, grid: TorusGrid,
                         F: Optional[PhaseSpaceField] = None) -> float:
    """``||<mu^{1/2} x2>^N T f|| / ||<mu^{1/2} x2>^N f||`` with periodic ``x2``."""
    if not (-3 <= N <= 3):
        raise ValueError("N must lie in [-3, 3]")
    if not np.any(f):
        raise ZeroDivisionError("weighted ratio undefined for f = 0")
    if F is None:
        F = forward(f, mu, w, grid)
    nfine = int(math.ceil(grid.L * 8 * math.sqrt(mu)))  # 8 points per mu^{-1/2}
    xf = grid.L * np.arange(nfine) / nfine
    xc = np.where(xf >= grid.L / 2, xf - grid.L, xf)
    wt = (1 + mu * xc**2) ** N
    top = float(np.sum(_x2_profile(F, xf) * wt) * grid.L / nfine)
    # f side: trig interpolation of int |f|^2 dx3 is not band-limited in general,
    # so refine f along x2 by zero padding before weighting
    fx = np.fft.fft(np.asarray(f, dtype=complex), axis=0)
    n = grid.n
    pad = np.zeros((nfine, n), dtype=complex) if nfine > n else None
    if pad is not None:
        half = n // 2
        pad[:half] = fx[:half]
        pad[-(n - half):] = fx[half:]
        ff = np.fft.ifft(pad, axis=0) * (nfine / n)
        prof = np.sum(np.abs(ff) ** 2, axis=1) * grid.h
        xs = np.where(np.arange(nfine) / nfine * grid.L >= grid.L / 2,
                      np.arange(nfine) / nfine * grid.L - grid.L, np.arange(nfine) / nfine * grid.L)
        bot = float(np.sum(prof * (1 + mu * xs**2) ** N) * grid.L / nfine)
    else:
        xs = grid.centered_axis()
        prof = np.sum(np.abs(f) ** 2, axis=1) * grid.h
        bot = float(np.sum(prof * (1 + mu * xs**2) ** N) * grid.h)
    return math.sqrt(top / bot)


# ---------------------------------------------------------------- TT* kernel

def tt_star_kernel(mu: float, w: Window, dx: np.ndarray, dxi: np.ndarray, n_quad: int = 256) -> np.ndarray:
    """``K(y', eta'; x', xi')`` of ``T T*`` for offsets ``dx = y' - x'``,
    ``dxi = eta' - xi'`` (arrays of shape ``(P, 2)``), up to the unimodular
    factor ``e^{i<xi', y'-x'>}``:

        (2 pi)^{-2} int e^{i mu^{1/2} <k, dx>} g_hat(k) g_hat(k - mu^{-1/2} dxi) dk.
    """
    dx = np.atleast_2d(np.asarray(dx, dtype=float))
    dxi = np.atleast_2d(np.asarray(dxi, dtype=float))
    c = w.c
    t = c * (2 * (np.arange(n_quad) + 0.5) / n_quad - 1)  # midpoint rule, spectrally accurate
    hk = 2 * c / n_quad
    K2, K3 = np.meshgrid(t, t, indexing="ij")
    a = w.ghat(np.hypot(K2, K3))
    out = np.empty(dx.shape[0], dtype=complex)
    for i in range(dx.shape[0]):
        v = dxi[i] / math.sqrt(mu)
        if np.hypot(*v) >= 2 * c:
            out[i] = 0.0
            continue
        b = w.ghat(np.hypot(K2 - v[0], K3 - v[1]))
        u = math.sqrt(mu) * dx[i]
        e2 = np.exp(1j * u[0] * t)
        e3 = np.exp(1j * u[1] * t)
        out[i] = e2 @ (a * b) @ e3 * hk * hk / (4 * math.pi**2)
    return out


def tt_star_kernel_decay(mu: float, w: Window, pairs: Optional[Sequence] = None,
                         axis: str = "x", blocks: int = 8, per_block: int = 16) -> dict:
    """Fit ``log|K|`` against ``log(1 + mu^{-1/2}|dxi| + mu^{1/2}|dx|)``.

    ``K`` oscillates and has isolated zeros, so the default samples are dense
    along one axis and the fit uses the block maxima (upper envelope).  The
    ``x`` axis covers ``mu^{1/2}|dx| in [20/c, 80/c]``, the ``xi`` axis
    ``mu^{-1/2}|dxi| in [0.2c, 1.9c]``.  Explicit ``pairs`` of
    ``(dx, dxi)`` are fitted point by point.
    """
    from .fitting import fit_slope
    if mu < 16:
        raise ValueError("mu must be at least 16")
    if pairs is None:
        if axis == "x":
            u = np.geomspace(20.0 / w.c, 80.0 / w.c, blocks * per_block)
            dx = np.stack([u / math.sqrt(mu), np.zeros_like(u)], axis=1)
            dxi = np.zeros_like(dx)
        elif axis == "xi":
            v = np.linspace(0.2, 1.9, blocks * per_block) * w.c
            dxi = np.stack([v * math.sqrt(mu), np.zeros_like(v)], axis=1)
            dx = np.zeros_like(dxi)
        else:
            raise ValueError(f"unknown axis {axis!r}")
    else:
        dx = np.array([p[0] for p in pairs], dtype=float)
        dxi = np.array([p[1] for p in pairs], dtype=float)
    n_quad = int(min(1024, max(256, 2 * math.sqrt(mu) * np.abs(dx).max() * w.c + 64)))
    K = np.abs(tt_star_kernel(mu, w, dx, dxi, n_quad=n_quad))
    if np.all(K < 1e-14):
        raise ValueError("degenerate sampling: every |K| is below 1e-14")
    s = 1 + np.hypot(*dxi.T) / math.sqrt(mu) + math.sqrt(mu) * np.hypot(*dx.T)
    if pairs is None:
        Kb = K.reshape(blocks, per_block)
        j = np.argmax(Kb, axis=1) + per_block * np.arange(blocks)
        s_fit, K_fit = s[j], K[j]
    else:
        s_fit, K_fit = s, K
    good = K_fit >= 1e-14
    fit = fit_slope(list(zip(np.log(s_fit[good]), np.log(K_fit[good]))))
    peak = abs(tt_star_kernel(mu, w, np.zeros((1, 2)), np.zeros((1, 2)))[0])
    return {"slope": fit.slope, "fit": fit, "abs_K": K, "scale": s, "peak": peak,
            "max_sampled": float(K.max())}
