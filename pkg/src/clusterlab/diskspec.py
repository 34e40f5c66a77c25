"""Eigenmodes of the unit disk, spectral clusters and their L^q growth.

Modes are ``u(r, t) = N J_|m|(lam r) e^{i m t}`` with ``lam`` a zero of
``J_|m|`` (Dirichlet) or of ``J_|m|'`` (Neumann).  Signed angular orders
are allowed so that a cluster spans the full eigenspaces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, special

from .fitting import ExponentFit, fit_loglog

BCS = ("dirichlet", "neumann")
SCAN_STEP = 0.25  # below half the smallest gap between consecutive zeros


def _radial_fn(bc: str):
    if bc == "dirichlet":
        return special.jv, lambda n, x: special.jvp(n, x, 1)
    if bc == "neumann":
        return (lambda n, x: special.jvp(n, x, 1)), (lambda n, x: special.jvp(n, x, 2))
    raise ValueError(f"unknown boundary condition {bc!r}")


def _scan_start(m: int, bc: str) -> float:
    # no zeros of J_m below m (m >= 1); the zero of J_m' at 0 is excluded
    return max(float(m), 0.5)


def _refine(f, df, a: float, b: float, m: int) -> float:
    fa, fb = f(m, a), f(m, b)
    try:
        z = optimize.brentq(lambda x: f(m, x), a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    except (RuntimeError, ValueError) as exc:
        raise RuntimeError(f"zero bracketing failed for order {m} on [{a}, {b}] "
                           f"(f(a)={fa:.3e}, f(b)={fb:.3e}): {exc}") from exc
    d = df(m, z)
    if d != 0:
        step = f(m, z) / d
        if abs(step) < 1e-10:
            z -= step
    return float(z)


@lru_cache(maxsize=4096)
def _zeros_below(m: int, xmax: float, bc: str) -> Tuple[float, ...]:
    f, df = _radial_fn(bc)
    x = _scan_start(m, bc)
    if x >= xmax:
        return ()
    grid = np.arange(x, xmax + SCAN_STEP, SCAN_STEP)
    vals = f(m, grid)
    out = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        a, b = grid[i], grid[i + 1]
        if vals[i] == 0:
            z = float(a)
        elif vals[i + 1] == 0:
            continue
        else:
            z = _refine(f, df, a, b, m)
        if z <= xmax and (not out or z - out[-1] > 1e-9):
            out.append(z)
    return tuple(out)


def zeros_upto(m: int, xmax: float, bc: str = "dirichlet") -> Tuple[float, ...]:
    """All positive zeros of ``J_m`` (or ``J_m'``) not exceeding ``xmax``."""
    if m < 0:
        raise ValueError("order must be >= 0")
    # quantize the cache key upward so nearby calls share a scan
    key = math.ceil(xmax / 8.0) * 8.0
    return tuple(z for z in _zeros_below(int(m), key, bc) if z <= xmax)


def bessel_zero(m: int, k: int, bc: str = "dirichlet") -> float:
    """k-th positive zero of ``J_m`` (dirichlet) or ``J_m'`` (neumann)."""
    if m < 0 or k < 1:
        raise ValueError("need m >= 0 and k >= 1")
    _radial_fn(bc)
    xmax = max(m, 1) + (k + 2) * math.pi + 2.0 * max(m, 1) ** (1 / 3) + 4.0
    while True:
        zs = zeros_upto(m, xmax, bc)
        if len(zs) >= k:
            return zs[k - 1]
        xmax *= 1.5


@dataclass(frozen=True)
class DiskMode:
    """``N J_|m|(lam r) e^{i m t}``; ``m`` may be negative."""

    m: int
    k: int
    zero: float
    bc: str = "dirichlet"

    @property
    def lam(self) -> float:
        return self.zero

    @property
    def order(self) -> int:
        return abs(self.m)

    @property
    def norm(self) -> float:
        """L^2(disk) normalizer from the closed-form radial integrals."""
        n, z = self.order, self.zero
        if self.bc == "dirichlet":
            return 1.0 / (math.sqrt(math.pi) * abs(special.jv(n + 1, z)))
        return 1.0 / math.sqrt(math.pi * (1.0 - n * n / (z * z)) * special.jv(n, z) ** 2)

    def radial(self, r) -> np.ndarray:
        return self.norm * special.jv(self.order, self.zero * np.asarray(r, dtype=float))

    def as_row(self) -> dict:
        return {"m": self.m, "k": self.k, "zero": self.zero, "bc": self.bc}


def make_mode(m: int, k: int, bc: str = "dirichlet") -> DiskMode:
    return DiskMode(m=int(m), k=int(k), zero=bessel_zero(abs(int(m)), int(k), bc), bc=bc)


def mode_eval(mode: DiskMode, r, theta) -> np.ndarray:
    """Evaluate the mode at polar points (broadcast)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > 1 + 1e-14):
        raise ValueError("points must lie in the closed unit disk")
    return mode.radial(r) * np.exp(1j * mode.m * np.asarray(theta, dtype=float))


# ---------------------------------------------------------------------------
# radial quadrature

def gauss_radial(n: int, a: float = 0.0, b: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def composite_gauss(a: float, b: float, panels: int, order: int = 16):
    edges = np.linspace(a, b, panels + 1)
    x, w = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    return (mid + half * x).ravel(), (half * w).ravel()


def radial_points(lam: float, n_r: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    n = int(math.ceil(6 * lam)) + 16 if n_r is None else int(n_r)
    if n * 2 * math.pi / max(lam, 1.0) < 10:
        raise ValueError(f"{n} radial nodes give fewer than 10 points per wavelength at lam = {lam:.4g}")
    return gauss_radial(n)


def _boundary_mass(mode: DiskMode, w: float) -> float:
    if w <= 0:
        return 0.0
    panels = int(math.ceil(w * mode.zero / 2.0)) + 2
    r, wt = composite_gauss(1.0 - w, 1.0, panels)
    return float(2 * math.pi * np.sum(wt * mode.radial(r) ** 2 * r))


def concentration_width(mode: DiskMode, mass: float = 0.9) -> Tuple[float, float]:
    """Smallest ``w`` such that the annulus ``[1 - w, 1]`` carries ``mass``.

    Returns ``(w, captured)`` where ``captured`` is the quadrature value of
    the mass in the returned annulus.
    """
    if not (0 < mass <= 1):
        raise ValueError("mass must lie in (0, 1]")
    total = _boundary_mass(mode, 1.0)
    if abs(total - 1.0) > 1e-8:
        raise RuntimeError(f"radial quadrature failed: total mass {total:.12f}")
    if mass == 1:
        return 1.0, total
    w = optimize.brentq(lambda t: _boundary_mass(mode, t) - mass, 1e-9, 1.0, xtol=1e-13)
    return float(w), _boundary_mass(mode, w)


def radial_sup(profile, lam: float, per_wavelength: int = 40) -> Tuple[float, float]:
    """sup over [0, 1] of |profile(r)| with refinement.

    Returns ``(sup, refinement_change)``: the grid maximum is polished by a
    bounded scalar search and the change is reported.
    """
    n = int(per_wavelength * max(lam, 1.0) / (2 * math.pi)) + 64
    r = np.linspace(0.0, 1.0, n)
    v = np.abs(profile(r))
    i = int(np.argmax(v))
    lo, hi = r[max(i - 1, 0)], r[min(i + 1, n - 1)]
    res = optimize.minimize_scalar(lambda t: -abs(profile(np.array([t]))[0]), bounds=(lo, hi),
                                   method="bounded", options={"xatol": 1e-13})
    best = max(v[i], -res.fun)
    return float(best), float(best - v[i])


def mode_lq_ratio(mode: DiskMode, q: float, n_r: Optional[int] = None) -> float:
    """``||u||_q / ||u||_2`` by Gauss quadrature in r (|u| does not depend on
    the angle, so the trapezoid rule in angle is exact)."""
    if q < 2:
        raise ValueError("q must be >= 2")
    r, w = radial_points(mode.zero, n_r)
    prof = np.abs(mode.radial(r))
    l2 = math.sqrt(2 * math.pi * np.sum(w * prof**2 * r))
    if math.isinf(q):
        sup, _ = radial_sup(mode.radial, mode.zero)
        return sup / l2
    lq = (2 * math.pi * np.sum(w * prof**q * r)) ** (1.0 / q)
    return float(lq / l2)


def whispering_width_sweep(ms: Sequence[int] = (25, 50, 100, 200), mass: float = 0.9) -> ExponentFit:
    lams, ws = [], []
    for m in ms:
        mode = make_mode(m, 1)
        lams.append(mode.zero)
        ws.append(concentration_width(mode, mass)[0])
    return fit_loglog(lams, ws)


def whispering_lq_sweep(q: float, ms: Sequence[int] = (25, 50, 100, 200)) -> ExponentFit:
    lams, vals = [], []
    for m in ms:
        mode = make_mode(m, 1)
        lams.append(mode.zero)
        vals.append(mode_lq_ratio(mode, q))
    return fit_loglog(lams, vals)


def radial_sup_sweep(ks: Sequence[int] = (10, 20, 40, 80)) -> ExponentFit:
    lams, vals = [], []
    for k in ks:
        mode = make_mode(0, k)
        lams.append(mode.zero)
        vals.append(mode_lq_ratio(mode, math.inf))
    return fit_loglog(lams, vals)


def airy_offset(m: int) -> float:
    """``1 - r*`` for the first whispering mode, r* the radial maximum,
    predicted from the first zero of J_m' and J_m: ``(j_{m,1} - j'_{m,1}) / j_{m,1}``."""
    return (bessel_zero(m, 1) - bessel_zero(m, 1, "neumann")) / bessel_zero(m, 1)


# ---------------------------------------------------------------------------
# clusters

@dataclass
class SpectralCluster:
    """Modes with eigenvalue in ``[lam, lam + 1]``."""

    window: Tuple[float, float]
    modes: List[DiskMode]
    coefficients: Optional[np.ndarray] = None
    certificate: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.modes)

    def normalized(self, coeffs) -> "SpectralCluster":
        c = np.asarray(coeffs, dtype=complex)
        if c.shape != (len(self.modes),):
            raise ValueError("coefficient vector has the wrong length")
        nrm = np.linalg.norm(c)
        if nrm == 0:
            raise ValueError("zero coefficient vector")
        return SpectralCluster(self.window, self.modes, c / nrm, self.certificate)


def cluster_members(lam: float, bc: str = "dirichlet") -> SpectralCluster:
    """Every (m, k), m signed, with eigenvalue in ``[lam, lam + 1]``.

    Completeness: zeros are found by a sign scan with a step below half the
    minimal zero gap, and the per-order counts of zeros below ``lam + 1`` are
    checked against interlacing (``n_{m+1} in {n_m - 1, n_m}``).
    """
    if lam < 2:
        raise ValueError("lam must be >= 2")
    hi = lam + 1.0
    modes = []
    counts = []
    m = 0
    while True:
        zs = zeros_upto(m, hi, bc)
        counts.append(len(zs))
        if not zs:
            break
        for k, z in enumerate(zs, start=1):
            if lam <= z <= hi:
                modes.append(DiskMode(m, k, z, bc))
                if m > 0:
                    modes.append(DiskMode(-m, k, z, bc))
        m += 1
    ok = all(counts[i + 1] in (counts[i] - 1, counts[i]) for i in range(len(counts) - 1))
    if not ok:
        raise RuntimeError(f"interlacing check failed: counts {counts}")
    modes.sort(key=lambda d: (d.zero, d.m))
    cert = {"max_order": m - 1, "counts_below_top": counts, "interlacing": ok, "scan_step": SCAN_STEP}
    return SpectralCluster((float(lam), hi), modes, None, cert)


class ClusterGrid:
    """Tensor quadrature (Gauss in r, uniform in angle) for cluster fields.

    Fields are built by grouping coefficients by angular order and using an
    FFT in the angle.
    """

    def __init__(self, cluster: SpectralCluster, n_r: Optional[int] = None, n_theta: Optional[int] = None):
        if not cluster.modes:
            raise ValueError("empty cluster")
        self.cluster = cluster
        lam = cluster.window[1]
        self.r, self.w = radial_points(lam, n_r)
        mmax = max(abs(md.m) for md in cluster.modes)
        need = max(8 * mmax, 64)
        self.n_theta = int(2 ** math.ceil(math.log2(need))) if n_theta is None else int(n_theta)
        if self.n_theta < 8 * mmax:
            raise ValueError("angular grid has fewer than 8 m points")
        self.radial = np.array([md.radial(self.r) for md in cluster.modes])  # (modes, n_r)
        self.ms = np.array([md.m for md in cluster.modes])
        self.area_w = (2 * math.pi / self.n_theta) * self.w * self.r  # per (r, theta) cell

    def field(self, coeffs) -> np.ndarray:
        """Samples of ``sum_i c_i u_i`` on the (r, theta) grid."""
        c = np.asarray(coeffs, dtype=complex)
        spec = np.zeros((self.r.size, self.n_theta), dtype=complex)
        contrib = c[:, None] * self.radial
        np.add.at(spec.T, self.ms % self.n_theta, contrib)
        return np.fft.ifft(spec, axis=1) * self.n_theta

    def lq(self, values: np.ndarray, q: float) -> float:
        a = np.abs(values)
        if math.isinf(q):
            return float(a.max())
        return float(np.sum(self.area_w[:, None] * a**q) ** (1.0 / q))

    def gram(self) -> np.ndarray:
        n = len(self.cluster.modes)
        G = np.zeros((n, n), dtype=complex)
        same = self.ms[:, None] == self.ms[None, :]
        rad = (self.radial * self.w * self.r) @ self.radial.T * 2 * math.pi
        G[same] = rad[same]
        return G

    def diagonal(self) -> np.ndarray:
        """Radial profile of sum_i |u_i(r)|^2 on the quadrature nodes."""
        return np.sum(self.radial**2, axis=0)


def _sup_field(cgrid: ClusterGrid, coeffs) -> float:
    """sup of |sum c_i u_i| with a local polish of the grid maximum."""
    vals = cgrid.field(coeffs)
    i, j = np.unravel_index(np.argmax(np.abs(vals)), vals.shape)
    c = np.asarray(coeffs, dtype=complex)
    modes = cgrid.cluster.modes

    def neg(p):
        r = min(max(p[0], 0.0), 1.0)
        return -abs(sum(ci * md.radial(r) * np.exp(1j * md.m * p[1]) for ci, md in zip(c, modes)))

    res = optimize.minimize(neg, x0=[cgrid.r[i], 2 * math.pi * j / cgrid.n_theta], method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 400})
    return float(max(abs(vals[i, j]), -res.fun))


def cluster_opnorm(lam: float, q: float, trials: int = 8, seed: int = 0, bc: str = "dirichlet",
                   cgrid: Optional[ClusterGrid] = None) -> dict:
    """Certified lower bound for ``||chi_lam||_{L^2 -> L^q}``.

    Candidates: ``trials`` random unit coefficient vectors, the mode of the
    window with the largest angular order (whispering), and the coherent
    point focus ``c_i ~ conj(u_i(x0))`` at the maximizer ``x0`` of the
    projection kernel's diagonal.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    cluster = cluster_members(lam, bc)
    if not cluster.modes:
        raise ValueError(f"empty cluster at lam = {lam}")
    g = ClusterGrid(cluster) if cgrid is None else cgrid
    rng = np.random.default_rng(seed)
    n = len(cluster.modes)

    def value(c):
        c = c / np.linalg.norm(c)
        if math.isinf(q):
            return _sup_field(g, c)
        return g.lq(g.field(c), q)

    best = {"random": 0.0}
    for _ in range(trials):
        c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        best["random"] = max(best["random"], value(c))
    iw = int(np.argmax([abs(md.m) * 1e6 - md.k for md in cluster.modes]))
    ew = np.zeros(n, dtype=complex)
    ew[iw] = 1.0
    best["whispering"] = value(ew)
    diag = g.diagonal()
    i0 = int(np.argmax(diag))
    cf = g.radial[:, i0].astype(complex)  # x0 = (r0, angle 0)
    best["focus"] = value(cf)
    winner = max(best, key=best.get)
    return {"lam": float(lam), "q": q, "members": n, "value": best[winner], "winner": winner,
            "candidates": best}


def cluster_norm_sweep(q: float, lams: Sequence[float], trials: int = 8, seed: int = 0) -> Tuple[List[dict], ExponentFit]:
    rows = [cluster_opnorm(l, q, trials=trials, seed=seed + i) for i, l in enumerate(lams)]
    return rows, fit_loglog([r["lam"] for r in rows], [r["value"] for r in rows])


def weyl_counts(lams: Sequence[float], bc: str = "dirichlet") -> List[int]:
    return [len(cluster_members(l, bc)) for l in lams]
