"""Wave packet kernel of the rescaled flow and its dispersive decay.

The kernel is

    K(r, x'; s, y') = mu int e^{i<zeta, x'-z> - i<zeta_sr, y'-z_sr>}
                      g(mu^{1/2}(x'-z)) g(mu^{1/2}(y'-z_sr)) beta_theta(zeta) dz dzeta,

with ``(z_sr, zeta_sr)`` the image of ``(z, zeta)`` under the flow from
``x1 = r`` to ``x1 = s``.  The symbol does not depend on x3 and is
homogeneous of degree one, so ``zeta3`` is conserved, ``z_sr - z`` does not
depend on ``z3`` and the flow depends on ``zeta`` only through the slope
``t = zeta2/zeta3``.  Two integrals are then done in closed form:

* ``z3``: the two windows correlate along x3,
  ``int g(a1, w) g(a2, w + e) dw = (2 pi)^{-1} int g1(a1, k) g1(a2, k) e^{ike} dk``
  with ``g1`` the partial Fourier transform of ``g`` in its second slot;
* ``zeta3`` and ``k``: both enter the ``y3`` dependence only through the
  frequency ``Lambda = zeta3 - mu^{1/2} k``.  Putting ``zeta3`` and
  ``mu^{1/2} k`` on one lattice of spacing ``delta`` makes ``K(., y3)`` an
  exact band-limited sum, evaluated on a whole ``y3`` line by one FFT.

What remains is a trapezoid rule in ``(z2, t)`` against a flow table
interpolated by bicubic splines.  The cutoff is

    beta_theta(zeta) = R(zeta3/mu) A(zeta2/zeta3),

with ``R`` a plateau on ``[1/4, 2]`` and ``A`` an angular plateau (dyadic
``t/theta in [1/4, 2]`` kept below the hyperbolic blend, the cap ``|t| <= mu^{-1/2}``, or a sector).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import interpolate, optimize

from .fitting import ExponentFit, fit_loglog
from .hamflow import RescaledSymbol, flow
from .smooth import plateau
from .wavepacket import Window, make_window

RADIAL = (0.25, 0.5, 1.5, 2.0)


@dataclass(frozen=True)
class AngularCutoff:
    """Angular factor ``A(t)``, ``t = zeta2/zeta3``.

    ``kind`` is ``"dyadic"`` (``t/theta`` in ``[1/4, 2]``, cut at ``t_max``), ``"cap"``
    (``|t| <= theta``, used for ``theta = mu^{-1/2}``) or ``"sector"``
    (``|t - center| <= width``).
    """

    kind: str
    theta: float
    center: float = 0.0
    width: float = 0.0
    t_max: float = 0.75

    def __post_init__(self):
        if self.kind not in ("dyadic", "cap", "sector"):
            raise ValueError(f"unknown cutoff kind {self.kind!r}")
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.kind == "sector" and self.width <= 0:
            raise ValueError("sector cutoff needs a positive width")

    @property
    def support(self) -> tuple:
        if self.kind == "dyadic":
            return 0.25 * self.theta, min(2.0 * self.theta, self.t_max)
        if self.kind == "cap":
            return -self.theta, self.theta
        return self.center - self.width, self.center + self.width

    @property
    def centre(self) -> float:
        """Representative slope (used for the bound model)."""
        return {"dyadic": self.theta, "cap": 0.0, "sector": self.center}[self.kind]

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "dyadic":
            th, top = self.theta, min(2.0 * self.theta, self.t_max)
            return plateau(t, 0.25 * th, 0.5 * th, min(th, 2 * top / 3), top)
        u = t / self.theta if self.kind == "cap" else (t - self.center) / self.width
        return plateau(u, -1.0, -0.5, 0.5, 1.0)


def default_cutoff(theta: float, mu: float) -> AngularCutoff:
    """Dyadic cutoff, or the cap when ``theta`` is at its floor ``mu^{-1/2}``."""
    if theta <= mu ** -0.5 * (1 + 1e-9):
        return AngularCutoff("cap", mu ** -0.5)
    return AngularCutoff("dyadic", theta)


def radial_cutoff(tau) -> np.ndarray:
    return plateau(tau, *RADIAL)


def partial_window(w: Window, a: np.ndarray, kappa: np.ndarray, n_quad: int = 64) -> np.ndarray:
    """``g1(a, kappa) = int g(a, x3) e^{-i kappa x3} dx3``, shape ``(len(a), len(kappa))``.

    Equals ``pi^{-1} int_0^{sqrt(c^2 - kappa^2)} g_hat(|(k1, kappa)|) cos(k1 a) dk1``.
    """
    x, wq = np.polynomial.legendre.leggauss(n_quad)
    a = np.asarray(a, dtype=float)
    out = np.zeros((a.size, len(kappa)))
    for j, k in enumerate(kappa):
        top = math.sqrt(max(w.c**2 - k * k, 0.0))
        if top == 0:
            continue
        k1 = 0.5 * top * (x + 1)
        ww = 0.5 * top * wq * w.ghat(np.hypot(k1, k))
        out[:, j] = np.cos(np.outer(a, k1)) @ ww / math.pi
    return out


@dataclass
class KernelLine:
    """``K(r, x'; s, (y2, y3))`` on a periodic ``y3`` line."""

    y2: float
    y3: np.ndarray
    values: np.ndarray

    @property
    def h(self) -> float:
        return float(self.y3[1] - self.y3[0])

    def row_mass(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.h)

    def edge_fraction(self) -> float:
        """Share of ``int |K|`` in the outer half of the period."""
        n = self.y3.size
        a = np.abs(self.values)
        outer = np.r_[a[: n // 4], a[n - n // 4:]]
        return float(np.sum(outer) / max(np.sum(a), 1e-300))


@dataclass
class KernelLab:
    """Quadrature set-up for ``K(r, (x2, x3); s, .)``.

    Parameters
    ----------
    sym : RescaledSymbol
        Supplies ``theta``, ``mu`` and the flow.
    r, s : float
        Flow times; ``|s - r| <= 2``.
    x2, x3 : float
        Source point.  ``K`` depends on ``x3`` only through ``y3 - x3``.
    c : float
        Window radius.  The default 1/4 keeps the ``z2`` range inside the
        affine collar; cost grows like ``c^{-3}``.
    cutoff : AngularCutoff, optional
    reach : float
        Windows are truncated at ``reach / c`` in ``mu^{1/2}`` units.
    refine : float
        Multiplies the number of ``z2`` and ``t`` nodes.
    y2_range : tuple, optional
        ``y2`` window the ``t`` resolution must cover (default: the flow
        image of ``x2`` widened by ``reach / (c mu^{1/2})``).
    """

    sym: RescaledSymbol
    r: float
    s: float
    x2: float = 0.0
    x3: float = 0.0
    c: float = 0.25
    cutoff: Optional[AngularCutoff] = None
    reach: float = 10.0
    refine: float = 1.0
    y2_range: Optional[tuple] = None
    table: Optional[dict] = None
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if abs(self.s - self.r) > 2 + 1e-12:
            raise ValueError("|s - r| must not exceed 2")
        self.mu = float(self.sym.mu)
        self.theta = float(self.sym.theta)
        if self.cutoff is None:
            self.cutoff = default_cutoff(self.theta, self.mu)
        if self.cutoff.support[1] > self.sym.blend[0] + 1e-12:
            raise ValueError("angular cutoff reaches the elliptic blend of the symbol")
        self.window = make_window(self.c)
        m12 = math.sqrt(self.mu)
        self._spread = self.reach / (self.c * m12)
        if self.table is None:
            self._build_flow_table()
        self._spline = self.table
        t_lo, t_hi = self.cutoff.support
        # target line: y2 range and y3 period
        if self.y2_range is None:
            img = self._spline["z2"](self.x2, np.linspace(t_lo, t_hi, 33), grid=True).ravel()
            self.y2_range = (float(img.min() - self._spread), float(img.max() + self._spread))
        d3 = self._spline["d3"](self.x2, np.linspace(t_lo, t_hi, 33), grid=True).ravel()
        self.y3_centre = self.x3 + float(np.mean(d3))
        psi_span = 2.0 * max(abs(t_lo), abs(t_hi)) * max(abs(self.y2_range[0] - self.x2),
                                                         abs(self.y2_range[1] - self.x2))
        half = 2.0 * self._spread + float(np.ptp(d3)) + psi_span
        self.period = 4.0 * half
        self.delta = 2 * math.pi / self.period
        # frequency lattices
        kmax = int(math.floor(self.c * m12 / self.delta))
        self.k_idx = np.arange(-kmax, kmax + 1)
        self.kappa = self.k_idx * self.delta / m12
        m_lo = int(math.ceil(RADIAL[0] * self.mu / self.delta))
        m_hi = int(math.floor(RADIAL[3] * self.mu / self.delta))
        self.m_idx = np.arange(m_lo, m_hi + 1)
        zeta3 = self.m_idx * self.delta
        self._radial = zeta3 * radial_cutoff(zeta3 / self.mu)
        # quadrature in (z2, t)
        hz = 1.0 / (3 * self.c * m12) / self.refine
        nz = int(math.ceil(self._spread / hz))
        self.z2 = self.x2 + hz * np.arange(-nz, nz + 1)
        self.hz = hz
        self._nodes = {}
        zz = self.z2
        tt = np.linspace(t_lo, t_hi, 65)
        self._img = self._spline["z2"](self.x2, tt, grid=True).ravel()
        self._shift_ptp = float(np.ptp(self._spline["z2"](zz, tt, grid=True) - zz[:, None], axis=0).max())
        # partial windows tabulated in a
        a_max = 1.5 * self.reach / self.c + m12 * (abs(self.y2_range[0]) + abs(self.y2_range[1])
                                                  + self._spread + 2)
        ha = 1.0 / (32 * self.c)
        na = int(math.ceil(a_max / ha))
        a_grid = ha * np.arange(-na, na + 1)
        tab = partial_window(self.window, a_grid, self.kappa)
        self._g1 = interpolate.CubicSpline(a_grid, tab, axis=0, extrapolate=False)
        self.stats.update(z2_nodes=int(self.z2.size),
                          zeta3_nodes=int(self.m_idx.size), kappa_nodes=int(self.k_idx.size),
                          period=self.period)

    # -- flow -------------------------------------------------------------

    def _build_flow_table(self):
        t_lo, t_hi = self.cutoff.support
        pad = 0.1 * (t_hi - t_lo)
        tz = np.linspace(t_lo - pad, min(t_hi + pad, self.sym.blend[0]), 25)
        zz = np.linspace(self.x2 - 1.1 * self._spread, self.x2 + 1.1 * self._spread, 33)
        Z2, T = np.meshgrid(zz, tz, indexing="ij")
        P = Z2.size
        z0 = np.stack([Z2.ravel(), np.zeros(P)], axis=1)
        zeta0 = np.stack([T.ravel(), np.ones(P)], axis=1)
        if self.s == self.r:
            zs, zetas = z0, zeta0
        else:
            fm = flow(self.sym, z0, zeta0, self.r, self.s, tol=1e-9, max_span=2.0)
            zs, zetas = fm.z, fm.zeta
            self.stats["flow_steps"] = fm.stats["steps"]
        shape = Z2.shape
        self.table = {
            "z2": interpolate.RectBivariateSpline(zz, tz, zs[:, 0].reshape(shape)),
            "d3": interpolate.RectBivariateSpline(zz, tz, zs[:, 1].reshape(shape)),
            "w2": interpolate.RectBivariateSpline(zz, tz, (zetas[:, 0] / zetas[:, 1]).reshape(shape)),
        }

    def t_nodes(self, y2: float) -> int:
        """Trapezoid nodes in ``t`` for target ``y2``.

        The ``t``-derivative of the phase is ``zeta3 (x2 - y2 + z2_sr - z2)`` up
        to curvature terms, so 6 points per period of
        ``2 mu max_t |y2 - image(t)|`` suffice.
        """
        t_lo, t_hi = self.cutoff.support
        dist = float(np.max(np.abs(y2 - self._img))) + self._shift_ptp + 1.0 / self.mu
        rate = RADIAL[3] * self.mu * dist
        return int(math.ceil(max(48, 6 * rate * (t_hi - t_lo) / (2 * math.pi)) * self.refine))

    def _flow_at_nodes(self, nt: int):
        if nt in self._nodes:
            return self._nodes[nt]
        sp = self._spline
        t = np.linspace(*self.cutoff.support, nt + 1)
        ht = float(t[1] - t[0])
        Z2, T = np.meshgrid(self.z2, t, indexing="ij")
        wA = (self.hz * ht) * self.cutoff(T)
        keep = wA > 0
        nodes = {"z2": Z2[keep], "t": T[keep], "w": wA[keep],
                 "zs2": sp["z2"](self.z2, t, grid=True)[keep],
                 "d3": sp["d3"](self.z2, t, grid=True)[keep],
                 "w2": sp["w2"](self.z2, t, grid=True)[keep]}
        if len(self._nodes) > 8:
            self._nodes.clear()
        self._nodes[nt] = nodes
        return nodes

    def image(self, t: float) -> tuple:
        """Flow image ``(x'_sr, nu_sr)`` of ``(x', (t, 1))``."""
        z2 = self._spline["z2"](self.x2, t).item()
        d3 = self._spline["d3"](self.x2, t).item()
        w2 = self._spline["w2"](self.x2, t).item()
        nu = np.array([w2, 1.0]) / math.hypot(w2, 1.0)
        return np.array([z2, self.x3 + d3]), nu

    # -- kernel -----------------------------------------------------------

    def _spectrum(self, y2: float) -> np.ndarray:
        m12 = math.sqrt(self.mu)
        nd = self._flow_at_nodes(self.t_nodes(y2))
        z2, zs2, t, d3 = nd["z2"], nd["zs2"], nd["t"], nd["d3"]
        a1 = m12 * (self.x2 - z2)
        a2 = m12 * (y2 - zs2)
        psi = t * (self.x2 - z2) - nd["w2"] * (y2 - zs2)
        P = psi + self.x3 + d3
        Q = self.x3 + d3
        g1 = np.nan_to_num(self._g1(a1)) * np.nan_to_num(self._g1(a2))
        wA = nd["w"]
        zeta3 = self.m_idx * self.delta
        H = np.zeros((zeta3.size, self.k_idx.size), dtype=complex)
        block = max(1, int(2**22 // zeta3.size))
        for i in range(0, P.size, block):
            sl = slice(i, i + block)
            Y = g1[sl] * np.exp(-1j * np.outer(Q[sl], self.k_idx * self.delta))
            X = (wA[sl][:, None] * self._radial) * np.exp(1j * np.outer(P[sl], zeta3))
            H += X.T @ Y
        # S_j = sum_k H[j + k, k]; j runs over m - k
        nm, nk = H.shape
        j_lo = self.m_idx[0] - self.k_idx[-1]
        S = np.zeros(nm + nk - 1, dtype=complex)
        for col in range(nk):
            off = (self.m_idx[0] - self.k_idx[col]) - j_lo
            S[off:off + nm] += H[:, col]
        return j_lo, S * (self.delta**2 / (2 * math.pi))

    def line(self, y2: float) -> KernelLine:
        """``K`` along ``y3`` at fixed ``y2`` (one period of the lattice sum)."""
        j_lo, S = self._spectrum(float(y2))
        n = 1 << int(math.ceil(math.log2(4 * S.size)))
        hy = self.period / n
        y3 = self.y3_centre + hy * (np.arange(n) - n // 2)
        j = j_lo + np.arange(S.size)
        # K(y3_l) = sum_j S_j e^{-i j delta y3_l}
        coef = S * np.exp(-1j * j * self.delta * y3[0])
        buf = np.zeros(n, dtype=complex)
        buf[: S.size] = coef
        vals = np.fft.fft(buf) * np.exp(-1j * j_lo * self.delta * (y3 - y3[0]))
        return KernelLine(y2=float(y2), y3=y3, values=vals)

    def values(self, y2: float, y3) -> np.ndarray:
        """``K`` at arbitrary ``y3`` for fixed ``y2`` (direct lattice sum)."""
        j_lo, S = self._spectrum(float(y2))
        j = j_lo + np.arange(S.size)
        y3 = np.atleast_1d(np.asarray(y3, dtype=float))
        return np.exp(-1j * np.outer(y3, j * self.delta)) @ S


@dataclass
class KernelSample:
    """Kernel values at ``pairs`` with the pointwise bound model per pair."""

    mu: float
    theta: float
    r: float
    s: float
    pairs: list
    values: np.ndarray
    bound: np.ndarray
    theta_bar: float
    N: int
    converged: Optional[bool] = None
    refinement_change: Optional[float] = None

    @property
    def ratio(self) -> np.ndarray:
        return np.abs(self.values) / self.bound

    def rows(self) -> list:
        """CSV rows ``(mu, theta, r, s, x2, x3, y2, y3, |K|, bound, ratio)``."""
        return [[self.mu, self.theta, self.r, self.s, *x, *y, float(abs(v)), float(b), float(abs(v) / b)]
                for (x, y), v, b in zip(self.pairs, self.values, self.bound)]


def theta_bar_for(theta: float, mu: float, span: float) -> float:
    """Largest admissible sector width: ``min(theta, (mu |s - r|)^{-1/2})``, at least ``mu^{-1/2}``."""
    tb = theta if span == 0 else min(theta, (mu * abs(span)) ** -0.5)
    return max(tb, mu ** -0.5)


def assemble_kernel(sym: RescaledSymbol, r: float, s: float, pairs: Sequence, c: float = 0.25,
                    cutoff: Optional[AngularCutoff] = None, refine: float = 1.0, N: int = 4,
                    check: bool = False) -> KernelSample:
    """``K(r, x'; s, y')`` at ``pairs = [(x', y'), ...]`` with ``x' = (x2, x3)``.

    Pairs sharing ``x2`` reuse one set-up and pairs sharing ``(x2, y2)`` one
    spectrum.  With ``check`` every value is recomputed with 1.5 times the
    ``(z2, t)`` nodes.

    Raises
    ------
    ArithmeticError
        If refinement changes a value by more than 5% of the largest value.
    """
    if not (16 <= sym.mu <= 256):
        raise ValueError("kernel assembly supports mu in [16, 256]")
    pairs = [(tuple(map(float, x)), tuple(map(float, y))) for x, y in pairs]
    thb = theta_bar_for(sym.theta, sym.mu, s - r)

    def evaluate(refine_):
        out = np.zeros(len(pairs), dtype=complex)
        bnd = np.zeros(len(pairs))
        labs = {}
        for x2 in sorted({x[0] for x, _ in pairs}):
            base = labs_base.get(x2)
            labs[x2] = KernelLab(sym, r, s, x2=x2, c=c, cutoff=cutoff, refine=refine_,
                                 y2_range=None if base is None else base.y2_range,
                                 table=None if base is None else base.table)
        for i, (x, y) in enumerate(pairs):
            lab = labs[x[0]]
            out[i] = lab.values(y[0], [y[1] - x[1]])[0]
            bnd[i] = pointwise_bound(lab, np.array([[y[0], y[1] - x[1]]]), N=N, theta_bar=thb)[0]
        return out, bnd, labs

    labs_base: dict = {}
    vals, bnd, labs_base = evaluate(refine)
    ks = KernelSample(mu=sym.mu, theta=sym.theta, r=r, s=s, pairs=pairs, values=vals, bound=bnd,
                      theta_bar=thb, N=N)
    if check:
        fine, _, _ = evaluate(1.5 * refine)
        rel = float(np.max(np.abs(fine - vals)) / max(np.max(np.abs(vals)), 1e-300))
        ks.refinement_change = rel
        ks.converged = rel <= 0.05
        if not ks.converged:
            raise ArithmeticError(f"kernel quadrature not converged: refinement changed values by {rel:.1%}")
    return ks


# ---------------------------------------------------------------------------
# row mass

def _lab_for(sym, r, s, c, refine, y2_range=None, cutoff=None, x2=0.0, table=None):
    return KernelLab(sym, r, s, x2=x2, c=c, refine=refine, y2_range=y2_range, cutoff=cutoff,
                     table=table)


def schur_row_mass(sym: RescaledSymbol, r: float, s: float, c: float = 0.25, x2: float = 0.0,
                   n_scan: int = 24, check: bool = True, cutoff: Optional[AngularCutoff] = None) -> dict:
    """``sup_{y2} int |K(r, x'; s, y')| dy3`` at ``x' = (x2, 0)``.

    The sup is located by a coarse scan over the flow image of ``x'`` and a
    bounded local maximization.  With ``check`` the line is recomputed with
    1.5 times the ``(z2, t)`` nodes at the maximizer.

    Raises
    ------
    ArithmeticError
        If refinement changes the row mass by more than 5%.
    ValueError
        If more than 10% of the line mass sits in the outer half of the period.
    """
    lab = _lab_for(sym, r, s, c, 1.0, cutoff=cutoff, x2=x2)
    lo, hi = lab.y2_range
    inner = 1.0 / (sym.mu * max(sym.theta, sym.mu ** -0.5))
    step = max(inner, (hi - lo) / n_scan)
    grid = np.arange(lo + 0.5 * lab._spread, hi - 0.5 * lab._spread + step, step)
    masses = np.array([lab.line(y).row_mass() for y in grid])
    i = int(np.argmax(masses))
    res = optimize.minimize_scalar(lambda y: -lab.line(y).row_mass(),
                                   bounds=(grid[i] - step, grid[i] + step), method="bounded",
                                   options={"xatol": 0.05 * inner})
    y_star = float(res.x) if -res.fun >= masses[i] else float(grid[i])
    ln = lab.line(y_star)
    mass = ln.row_mass()
    edge = ln.edge_fraction()
    if check and edge > 0.1:
        raise ValueError(f"y3 line too short: {edge:.2%} of the mass at the edges")
    out = {"mass": mass, "y2": y_star, "edge_fraction": edge, "scan": list(zip(grid.tolist(), masses.tolist())),
           "stats": dict(lab.stats)}
    if check:
        fine = _lab_for(sym, r, s, c, 1.5, y2_range=lab.y2_range, cutoff=lab.cutoff, x2=x2,
                        table=lab.table)
        m2 = fine.line(y_star).row_mass()
        rel = abs(m2 - mass) / mass
        out["refinement_change"] = rel
        if rel > 0.05:
            raise ArithmeticError(f"kernel quadrature not converged: refinement changed the row mass by {rel:.1%}")
    return out


def dispersive_sweep(mu: float, theta: float, factors: Sequence[float] = (0, 1, 4, 16),
                     c: float = 0.25, c0: float = 0.1, profile: str = "disk", r: float = 0.0,
                     check: bool = True) -> dict:
    """Row mass at ``|s - r| = f / (mu theta^2)`` and the fit of
    ``log mass`` against ``log(1 + mu theta^2 |s - r|)``."""
    sym = RescaledSymbol(profile, theta, mu, c0=c0, c=c)
    rows = []
    for f in factors:
        span = f / (mu * theta**2)
        rm = schur_row_mass(sym, r, r + span, c=c, check=check)
        rows.append({"factor": f, "span": span, "mass": rm["mass"], "y2": rm["y2"],
                     "normalized": rm["mass"] / (mu * theta),
                     "refinement_change": rm.get("refinement_change"),
                     "edge_fraction": rm["edge_fraction"]})
    fit: ExponentFit = fit_loglog([1 + r_["factor"] for r_ in rows], [r_["mass"] for r_ in rows])
    return {"mu": mu, "theta": theta, "rows": rows, "fit": fit}


# ---------------------------------------------------------------------------
# pointwise bound model

def pointwise_bound(lab: KernelLab, y: np.ndarray, N: int = 4, theta_bar: Optional[float] = None) -> np.ndarray:
    """``mu^2 thb (1 + mu thb |y' - x'_sr| + mu |<nu_sr, y' - x'_sr>|)^{-N}``.

    ``x'_sr, nu_sr`` are the flow image of ``x'`` with the representative
    slope of the cutoff; ``thb`` defaults to ``min(theta, (mu |s-r|)^{-1/2})``.
    """
    mu = lab.mu
    if theta_bar is None:
        theta_bar = theta_bar_for(lab.theta, mu, lab.s - lab.r)
    xs, nu = lab.image(lab.cutoff.centre)
    d = np.atleast_2d(y) - xs
    dist = np.hypot(d[:, 0], d[:, 1])
    return mu**2 * theta_bar * (1 + mu * theta_bar * dist + mu * np.abs(d @ nu)) ** (-N)


def fit_bound_constant(sym: RescaledSymbol, r: float, s: float, n_pairs: int = 200, seed: int = 0,
                       N: int = 4, c: float = 0.25) -> dict:
    """Largest ``|K| / bound`` over random ``y'`` near the flow image of ``x' = 0``."""
    thb = theta_bar_for(sym.theta, sym.mu, s - r)
    cut = AngularCutoff("sector", thb, center=sym.theta, width=0.5 * thb) \
        if thb > sym.mu ** -0.5 * (1 + 1e-9) else AngularCutoff("cap", sym.mu ** -0.5)
    lab = KernelLab(sym, r, s, c=c, cutoff=cut)
    xs, nu = lab.image(cut.centre)
    rng = np.random.default_rng(seed)
    lo, hi = lab.y2_range
    y2s = rng.uniform(lo, hi, int(math.ceil(n_pairs / 10)))
    ratios = []
    for y2 in y2s:
        y3 = xs[1] + rng.uniform(-1, 1, 10) * 4.0 / sym.mu + nu[0] / nu[1] * (xs[0] - y2)
        K = lab.values(y2, y3)
        Y = np.stack([np.full(y3.shape, y2), y3], axis=1)
        b = pointwise_bound(lab, Y, N=N, theta_bar=thb)
        ratios.extend(np.abs(K) / b)
    ratios = np.array(ratios[:n_pairs])
    return {"C": float(ratios.max()), "median": float(np.median(ratios)), "theta_bar": thb,
            "pairs": len(ratios)}


# ---------------------------------------------------------------------------
# weighted Calderon check

def lipschitz_weight(r: np.ndarray, rng: np.random.Generator, n_pieces: int = 8,
                     offset=(1.0, 100.0)) -> np.ndarray:
    """Random piecewise-linear ``M >= 1`` with slopes in ``[-1, 1]``."""
    L = r[-1] - r[0]
    br = np.sort(rng.uniform(r[0], r[-1], n_pieces - 1))
    knots = np.r_[r[0], br, r[-1]]
    slopes = rng.uniform(-1, 1, n_pieces)
    vals = np.r_[0.0, np.cumsum(slopes * np.diff(knots))]
    M = rng.uniform(*offset) + np.interp(r, knots, vals)
    return np.maximum(M, 1.0)


def _check_weight(M: np.ndarray, h: float) -> None:
    if np.any(M < 1 - 1e-12):
        raise ValueError("weight must satisfy M >= 1")
    if np.any(np.abs(np.diff(M)) > h * (1 + 1e-9)):
        raise ValueError("weight is not 1-Lipschitz")


def _conv_op(n: int, h: float):
    k = h / (1.0 + (h * np.arange(-(n - 1), n)) ** 2)
    size = 1 << int(math.ceil(math.log2(3 * n)))
    kh = np.fft.rfft(k, size)

    def apply(f):
        return np.fft.irfft(np.fft.rfft(f, size) * kh, size)[n - 1: 2 * n - 1]
    return apply


def weighted_norm(M: np.ndarray, h: float, iters: int = 200, rtol: float = 1e-10) -> float:
    """Norm of ``f -> <.>^{-2} * f`` on ``L^2(M dr)`` over the grid (power iteration)."""
    n = M.size
    T = _conv_op(n, h)
    sq = np.sqrt(M)
    A = lambda v: sq * T(v / sq)
    At = lambda v: T(sq * v) / sq  # T is symmetric
    v = np.random.default_rng(1).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = At(A(v))
        new = float(np.linalg.norm(w))
        v = w / new
        if abs(new - lam) <= rtol * new:
            break
        lam = new
    return math.sqrt(new)


def calderon_weighted_check(length: float = 200.0, h: float = 0.25, trials: int = 100, seed: int = 0,
                            weights: Optional[Sequence[np.ndarray]] = None) -> dict:
    """Max weighted norm of the ``<r>^{-2}`` convolution over random Lipschitz weights.

    Returns the max and the unweighted (``M = 1``) norm on the same grid.
    """
    n = int(round(length / h)) + 1
    r = h * np.arange(n) - length / 2
    rng = np.random.default_rng(seed)
    if weights is None:
        weights = [lipschitz_weight(r, rng) for _ in range(trials)]
    norms = []
    for M in weights:
        M = np.asarray(M, dtype=float)
        _check_weight(M, h)
        norms.append(weighted_norm(M, h))
    base = weighted_norm(np.ones(n), h)
    return {"max": float(max(norms)), "unweighted": base, "ratio": float(max(norms)) / base,
            "length": length, "h": h, "trials": len(norms), "norms": norms}
