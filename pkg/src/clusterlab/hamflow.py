"""Hamiltonian flow of the rescaled symbol and its variational equations.

Phase-space points are ``(z, zeta)`` with ``z = (x2, x3)``; the flow
parameter is ``x1``.  The flow convention is

    dz/dx1 = -d_zeta q,     dzeta/dx1 = d_z q,

so in the flat case ``q = |zeta|`` the trajectory is
``z - (s - r) zeta/|zeta|`` and ``d_zeta z = -(s - r) Hess|zeta|``.

The symbol used for flows is the degree-one homogeneous surrogate

    q(x, zeta) = chi(t) sqrt(zeta3^2 - zeta2^2) a_theta(x) + (1 - chi(t)) |zeta|,

where ``t = zeta2/zeta3`` and ``chi = 1 - ramp(|t|, 0.75, 0.9)``.  Here
``a_theta(x) = S[a(theta x)]`` is the coefficient ``(g^{11})^{-1/2}``
viewed at scale theta and truncated in x2 at angular frequency ``c mu^{1/2}``.
``q`` does not depend on x3.

Two realizations of the truncation are available:

* ``collar`` (disk only): inside the collar ``a(theta x) = 1 - theta|x2|/R``.
  The multiplier is flat at k = 0, so S fixes affine functions and only the
  kink needs work:
  ``S|x|(x) = (2/pi) int_0^inf (1 - phi(k) cos kx) / k^2 dk``.  This and its
  derivatives are evaluated by Gauss quadrature on the support of phi.
* ``periodic``: the blended model coefficient sampled on a periodic x2 box
  and filtered by FFT.  The result is an exact trigonometric polynomial that
  depends on x1.  At desk-scale mu the cutoff is comparable to the blend
  scale 1/theta, so this mode rings.  It is the only choice for x1-dependent
  profiles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import (PROFILES, disk_radius_for, inverse_metric_at, smooth_cutoff_multiplier,
                       symbol_formula)
from .smooth import ramp_derivs

OMEGA = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])


def kink_truncation(x, cutoff: float, n: int = 96) -> tuple:
    """``S|x|`` and its first two derivatives for the multiplier
    ``phi(k) = 1 - ramp(|k|, 0.75 cutoff, cutoff)``."""
    x = np.asarray(x, dtype=float)
    g, w = np.polynomial.legendre.leggauss(n)
    k0 = 0.75 * cutoff
    m = int(n + 2 * cutoff * np.max(np.abs(x), initial=0.0))
    g1, w1 = np.polynomial.legendre.leggauss(m)
    ka = 0.5 * k0 * (g1 + 1)
    wa = 0.5 * k0 * w1
    kb = k0 + 0.5 * (cutoff - k0) * (g + 1)
    wb = 0.5 * (cutoff - k0) * w
    phib = smooth_cutoff_multiplier(kb, cutoff)
    X = x[..., None]
    s0 = (np.sum(wa * 2 * np.sin(ka * X / 2) ** 2 / ka**2, axis=-1)
          + np.sum(wb * (1 - phib * np.cos(kb * X)) / kb**2, axis=-1) + 1.0 / cutoff)
    s1 = np.sum(wa * np.sin(ka * X) / ka, axis=-1) + np.sum(wb * phib * np.sin(kb * X) / kb, axis=-1)
    s2 = np.sum(wa * np.cos(ka * X), axis=-1) + np.sum(wb * phib * np.cos(kb * X), axis=-1)
    return 2 / math.pi * s0, 2 / math.pi * s1, 2 / math.pi * s2


@dataclass
class RescaledSymbol:
    """Homogeneous surrogate of ``theta p_j(theta x, xi/theta)``.

    Parameters
    ----------
    profile : {"flat", "disk", "custom-perturbation"}
        ``flat`` is the elliptic branch ``q = |zeta|``.
    theta : float in [mu^{-1/2}, 1]
    mu : float
    c0 : float
        Smallness constant of the metric model (sets the disk radius).
    c : float
        Truncation constant; ``a_theta`` keeps frequencies below ``c mu^{1/2}``.
    """

    profile: str
    theta: float
    mu: float
    c0: float = 0.1
    c: float = 1.0 / 16
    blend: tuple = (0.75, 0.9)
    box_factor: float = 4.0
    n_box: int = 8192
    mode: Optional[str] = None
    _cache: dict = field(default_factory=dict, repr=False)
    radius: float = field(default=0.0, init=False)

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")
        if self.mode is None:
            self.mode = "collar" if self.profile == "disk" else "periodic"
        if self.mode not in ("collar", "periodic"):
            raise ValueError(f"unknown coefficient mode {self.mode!r}")
        if self.mode == "collar" and self.profile == "custom-perturbation":
            raise ValueError("collar mode needs an x1-independent affine collar profile")
        self.radius = disk_radius_for(self.c0)
        if self.mu <= 1:
            raise ValueError("mu must exceed 1")
        if not (self.mu ** -0.5 * (1 - 1e-12) <= self.theta <= 1):
            raise ValueError(f"theta must lie in [mu^-1/2, 1], got {self.theta}")
        self.half_box = self.box_factor / self.theta
        h = 2 * self.half_box / self.n_box
        self._x2 = -self.half_box + h * np.arange(self.n_box)
        k = 2 * math.pi * np.fft.fftfreq(self.n_box, d=h)
        filt = smooth_cutoff_multiplier(k, self.cutoff)
        keep = filt > 0
        self._k = k[keep]
        self._filt = filt[keep]
        self._keep = keep
        self._phase0 = np.exp(-1j * self._k * self._x2[0])

    @property
    def cutoff(self) -> float:
        return self.c * math.sqrt(self.mu)

    @property
    def flat(self) -> bool:
        return self.profile == "flat"

    def descriptor(self) -> dict:
        return {"profile": self.profile, "theta": self.theta, "mu": self.mu, "c0": self.c0, "c": self.c,
                "blend": list(self.blend), "mode": self.mode, "box_factor": self.box_factor,
                "n_box": self.n_box}

    # -- coefficient ---------------------------------------------------------
    def _coeffs(self, x1: float) -> np.ndarray:
        key = float(x1)
        got = self._cache.get(key)
        if got is None:
            g11 = inverse_metric_at(self.profile, self.theta * key, self.theta * self._x2, c0=self.c0)
            a = 1.0 / np.sqrt(g11)
            A = np.fft.fft(a)[self._keep] / self.n_box
            got = A * self._filt * self._phase0
            if len(self._cache) > 4096:
                self._cache.clear()
            self._cache[key] = got
        return got

    def coefficient(self, x1: float, x2) -> tuple:
        """``(a, d a/d x2, d^2 a/d x2^2)`` of the truncated coefficient."""
        x2 = np.asarray(x2, dtype=float)
        if self.flat:
            one = np.ones_like(x2)
            return one, 0 * one, 0 * one
        if self.mode == "collar":
            s0, s1, s2 = kink_truncation(x2, self.cutoff)
            slope = self.theta / self.radius
            a = 1.0 - slope * s0
            if np.any(a < 0.25):
                raise ValueError(f"x2 = {np.max(np.abs(x2)):.3g} leaves the collar (a < 1/4)")
            return a, -slope * s1, -slope * s2
        if np.any(np.abs(x2) > self.half_box):
            raise ValueError(f"x2 = {np.max(np.abs(x2)):.3g} leaves the coefficient box ±{self.half_box:.3g}")
        A = self._coeffs(x1)
        E = np.exp(1j * np.multiply.outer(x2, self._k))
        a = np.real(E @ A)
        a2 = np.real(E @ (1j * self._k * A))
        a22 = np.real(E @ (-(self._k**2) * A))
        return a, a2, a22

    # -- symbol and derivatives ----------------------------------------------
    def derivs(self, x1: float, z: np.ndarray, zeta: np.ndarray) -> dict:
        """q and its first and second derivatives at points ``(P, 2)``.

        Keys: ``q``, ``q_z`` (P,2), ``q_zeta`` (P,2), ``q_zz`` (P,2,2),
        ``q_zeta_z`` (P,2,2) with entry ``[i, j] = d_{zeta_i} d_{z_j} q``,
        ``q_zetazeta`` (P,2,2).
        """
        z = np.atleast_2d(z)
        zeta = np.atleast_2d(zeta)
        P = z.shape[0]
        z2, y3 = zeta[:, 0], zeta[:, 1]
        n = np.hypot(z2, y3)
        gn = zeta / n[:, None]
        Hn = (np.eye(2)[None] - gn[:, :, None] * gn[:, None, :]) / n[:, None, None]
        out = {"q_z": np.zeros((P, 2)), "q_zz": np.zeros((P, 2, 2)), "q_zeta_z": np.zeros((P, 2, 2))}
        if self.flat:
            out.update(q=n, q_zeta=gn, q_zetazeta=Hn)
            return out
        if np.any(y3 <= 0):
            raise ValueError("surrogate symbol is defined on the cone zeta3 > 0")
        a, a2, a22 = self.coefficient(x1, z[:, 0])
        t = z2 / y3
        r, r1, r2 = ramp_derivs(np.abs(t), *self.blend)
        chi = 1 - r
        chi1 = -np.sign(t) * r1
        chi2 = -r2
        gt = np.stack([1 / y3, -z2 / y3**2], axis=1)
        Ht = np.zeros((P, 2, 2))
        Ht[:, 0, 1] = Ht[:, 1, 0] = -1 / y3**2
        Ht[:, 1, 1] = 2 * z2 / y3**3
        gchi = chi1[:, None] * gt
        Hchi = chi2[:, None, None] * gt[:, :, None] * gt[:, None, :] + chi1[:, None, None] * Ht
        act = chi > 0
        rad = np.where(act, y3**2 - z2**2, 1.0)
        if np.any(rad <= 0):
            raise ValueError("negative radicand where the hyperbolic branch is active")
        h = np.sqrt(rad)
        gh = np.stack([-z2, y3], axis=1) / h[:, None]
        Hh = (np.diag([-1.0, 1.0])[None] - gh[:, :, None] * gh[:, None, :]) / h[:, None, None]
        h = np.where(act, h, 0.0)
        gh = np.where(act[:, None], gh, 0.0)
        Hh = np.where(act[:, None, None], Hh, 0.0)
        D = h * a - n
        gD = a[:, None] * gh - gn
        q = n + chi * D
        q_zeta = gn + gchi * D[:, None] + chi[:, None] * gD
        q_zetazeta = (Hn + Hchi * D[:, None, None] + gchi[:, :, None] * gD[:, None, :]
                      + gD[:, :, None] * gchi[:, None, :] + chi[:, None, None] * (a[:, None, None] * Hh - Hn))
        out["q_z"][:, 0] = chi * h * a2
        out["q_zz"][:, 0, 0] = chi * h * a22
        out["q_zeta_z"][:, :, 0] = a2[:, None] * (gchi * h[:, None] + chi[:, None] * gh)
        out.update(q=q, q_zeta=q_zeta, q_zetazeta=q_zetazeta)
        return out

    def value(self, x1: float, z, zeta) -> np.ndarray:
        return self.derivs(x1, z, zeta)["q"]

    def evaluate_absolute(self, x1: float, x2, xi2, xi3) -> np.ndarray:
        """``theta p_j(theta x, xi/theta)`` with the absolute regime weights of
        the symbol at ``lam = mu/theta`` (not homogeneous near the blends)."""
        lam = self.mu / self.theta
        a = self.coefficient(x1, x2)[0]
        return self.theta * symbol_formula(a, np.asarray(xi2) / self.theta, np.asarray(xi3) / self.theta, lam)


# ---------------------------------------------------------------------------
# flow maps

@dataclass
class FlowMap:
    """Images of seeds under the flow from ``r`` to ``s``.

    ``J`` holds the 4x4 Jacobians in the ordering ``(z2, z3, zeta2, zeta3)``;
    ``Q`` is ``int_r^s d_zeta^2 q`` along each trajectory.
    """

    r: float
    s: float
    z0: np.ndarray
    zeta0: np.ndarray
    z: np.ndarray
    zeta: np.ndarray
    J: Optional[np.ndarray] = None
    Q: Optional[np.ndarray] = None
    stats: dict = field(default_factory=dict)

    @property
    def dz_z(self):
        return self.J[:, :2, :2]

    @property
    def dzeta_z(self):
        return self.J[:, :2, 2:]

    @property
    def dz_zeta(self):
        return self.J[:, 2:, :2]

    @property
    def dzeta_zeta(self):
        return self.J[:, 2:, 2:]

    def symplectic_error(self) -> float:
        E = np.einsum("pji,jk,pkl->pil", self.J, OMEGA, self.J) - OMEGA
        return float(np.max(np.abs(E)))

    def det_error(self) -> float:
        return float(np.max(np.abs(np.linalg.det(self.J) - 1.0)))

    def to_json(self) -> str:
        d = {"r": self.r, "s": self.s, "z0": self.z0.tolist(), "zeta0": self.zeta0.tolist(),
             "z": self.z.tolist(), "zeta": self.zeta.tolist(), "stats": self.stats}
        if self.J is not None:
            d["J"] = self.J.tolist()
        if self.Q is not None:
            d["Q"] = self.Q.tolist()
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FlowMap":
        d = json.loads(text)
        arr = lambda k: None if k not in d else np.array(d[k], dtype=float)
        return cls(r=d["r"], s=d["s"], z0=arr("z0"), zeta0=arr("zeta0"), z=arr("z"), zeta=arr("zeta"),
                   J=arr("J"), Q=arr("Q"), stats=d["stats"])


def _rhs(sym: RescaledSymbol, t: float, Y: np.ndarray, J: Optional[np.ndarray]):
    d = sym.derivs(t, Y[:, :2], Y[:, 2:])
    dY = np.concatenate([-d["q_zeta"], d["q_z"]], axis=1)
    if J is None:
        return dY, None, None
    C = d["q_zeta_z"]
    M = np.zeros((Y.shape[0], 4, 4))
    M[:, :2, :2] = -C
    M[:, :2, 2:] = -d["q_zetazeta"]
    M[:, 2:, :2] = d["q_zz"]
    M[:, 2:, 2:] = np.transpose(C, (0, 2, 1))
    return dY, M @ J, d["q_zetazeta"]


def _rk4(sym, t, h, Y, J, Q):
    k1, j1, q1 = _rhs(sym, t, Y, J)
    if J is None:
        k2, _, _ = _rhs(sym, t + h / 2, Y + h / 2 * k1, None)
        k3, _, _ = _rhs(sym, t + h / 2, Y + h / 2 * k2, None)
        k4, _, _ = _rhs(sym, t + h, Y + h * k3, None)
        return Y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4), None, None
    k2, j2, q2 = _rhs(sym, t + h / 2, Y + h / 2 * k1, J + h / 2 * j1)
    k3, j3, q3 = _rhs(sym, t + h / 2, Y + h / 2 * k2, J + h / 2 * j2)
    k4, j4, q4 = _rhs(sym, t + h, Y + h * k3, J + h * j3)
    Yn = Y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    Jn = J + h / 6 * (j1 + 2 * j2 + 2 * j3 + j4)
    Qn = Q + h / 6 * (q1 + 2 * q2 + 2 * q3 + q4)
    return Yn, Jn, Qn


def _integrate(sym: RescaledSymbol, z, zeta, r: float, s: float, variational: bool,
               tol: float = 1e-10, h0: float = 0.02, max_steps: int = 200000,
               max_span: float = 1.0) -> FlowMap:
    z = np.array(np.atleast_2d(z), dtype=float)
    zeta = np.array(np.atleast_2d(zeta), dtype=float)
    if z.shape != zeta.shape or z.shape[1] != 2:
        raise ValueError("seeds must be (P, 2) arrays of z and zeta")
    if abs(s - r) > max_span + 1e-12:
        raise ValueError(f"|s - r| must not exceed {max_span:g}")
    Y = np.concatenate([z, zeta], axis=1)
    P = Y.shape[0]
    J = np.tile(np.eye(4), (P, 1, 1)) if variational else None
    Q = np.zeros((P, 2, 2)) if variational else None
    t = float(r)
    span = float(s) - float(r)
    sgn = 1.0 if span >= 0 else -1.0
    h = sgn * min(abs(span), h0) if span != 0 else 0.0
    steps = rejected = 0
    max_err = 0.0
    h_min = abs(span) * 1e-9
    while sgn * (s - t) > 1e-15:
        h = sgn * min(abs(h), abs(s - t))
        Y1, J1, Q1 = _rk4(sym, t, h, Y, J, Q)
        Ym, Jm, Qm = _rk4(sym, t, h / 2, Y, J, Q)
        Y2, J2, Q2 = _rk4(sym, t + h / 2, h / 2, Ym, Jm, Qm)
        err = np.max(np.abs(Y2 - Y1)) / 15
        if variational:
            err = max(err, np.max(np.abs(J2 - J1)) / 15)
        if err <= tol:
            Y, J, Q = Y2, J2, Q2
            t += h
            steps += 1
            max_err = max(max_err, float(err))
            if err < tol / 64:
                h *= 2
                if abs(h) > h0:
                    h = sgn * h0
        else:
            rejected += 1
            h /= 2
            if abs(h) < h_min:
                i = int(np.argmax(np.max(np.abs(Y2 - Y1), axis=1)))
                raise RuntimeError(f"step size underflow at x1 = {t:.6g}, x2 = {Y[i, 0]:.6g} "
                                   f"(seed {i}); error estimate {err:.2e}")
        if steps + rejected > max_steps:
            raise RuntimeError("step budget exhausted")
    stats = {"steps": steps, "rejected": rejected, "max_step_error": max_err, "tol": tol}
    return FlowMap(r=float(r), s=float(s), z0=z, zeta0=zeta, z=Y[:, :2], zeta=Y[:, 2:], J=J, Q=Q,
                   stats=stats)


def flow(sym: RescaledSymbol, z, zeta, r: float, s: float, tol: float = 1e-10,
         max_span: float = 1.0) -> FlowMap:
    """Integrate the flow from ``x1 = r`` to ``x1 = s`` for seeds ``(z, zeta)``."""
    return _integrate(sym, z, zeta, r, s, variational=False, tol=tol, max_span=max_span)


def variational_flow(sym: RescaledSymbol, z, zeta, r: float, s: float, tol: float = 1e-10) -> FlowMap:
    """Flow plus 4x4 Jacobians and ``int d_zeta^2 q`` along each trajectory."""
    return _integrate(sym, z, zeta, r, s, variational=True, tol=tol)


def flat_closed_form(z, zeta, r: float, s: float) -> FlowMap:
    """Exact flow of ``q = |zeta|`` with Jacobian blocks."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    n = np.hypot(zeta[:, 0], zeta[:, 1])
    u = zeta / n[:, None]
    H = (np.eye(2)[None] - u[:, :, None] * u[:, None, :]) / n[:, None, None]
    P = z.shape[0]
    J = np.tile(np.eye(4), (P, 1, 1))
    J[:, :2, 2:] = -(s - r) * H
    return FlowMap(r=r, s=s, z0=z, zeta0=zeta, z=z - (s - r) * u, zeta=zeta.copy(), J=J,
                   Q=(s - r) * H, stats={"closed_form": True})


# ---------------------------------------------------------------------------
# seeds and diagnostics

def make_seeds(theta: float, n: int, r: float, s: float, mu: float, seed: int = 0) -> tuple:
    """Seeds with ``zeta3 = 1``, ``zeta2/zeta3`` log-uniform in ``[theta/2, 2 theta]``
    (clipped below the blend), ``z2`` placed so that most trajectories cross
    ``x2 = 0`` and ``z3`` uniform in [-1, 1]."""
    rng = np.random.default_rng(seed)
    ang = theta * np.exp(rng.uniform(math.log(0.5), math.log(2.0), n))
    ang = np.minimum(ang, 0.7)
    span = abs(s - r)
    width = max(span * theta, 1.0 / (0.0625 * math.sqrt(mu)))
    sgn = 1.0 if s >= r else -1.0
    z2 = -sgn * rng.uniform(-0.5, 1.5, n) * width
    z3 = rng.uniform(-1, 1, n)
    return np.stack([z2, z3], axis=1), np.stack([ang, np.ones(n)], axis=1)


def angle_preservation(fm: FlowMap, theta: float) -> float:
    """Max over seeds of the factor by which ``zeta2/zeta3`` left ``[theta/4, 4 theta]``
    (values <= 1 mean inside)."""
    t = fm.zeta[:, 0] / fm.zeta[:, 1]
    return float(np.max(np.maximum(theta / 4 / t, t / (4 * theta))))


def _norm(T: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(T.reshape(T.shape[0], -1) ** 2, axis=1))


ESTIMATES = ("dz_z-I", "dzeta_z", "dzeta_zeta-I", "dz_zeta", "d2z_z", "d2z_zeta",
             "dzdzeta_z", "dzdzeta_zeta", "d2zeta", "d3zeta")


def flow_derivative_report(sym: RescaledSymbol, z, zeta, r: float, s: float, eps: float = 1e-3,
                           tol: float = 1e-10) -> list:
    """Measured Jacobian and higher-derivative magnitudes against their bound shapes.

    Higher derivatives are central differences of the variational Jacobians
    over seed perturbations of size ``eps`` (all copies share one step
    sequence).  Each row is ``(estimate, value, bound, ratio)`` with the value
    maximized over seeds (Frobenius norms of the derivative tensors).
    """
    if eps < 10 * math.sqrt(tol):
        raise ValueError(f"finite-difference step {eps:g} collides with integrator tolerance {tol:g}")
    z = np.atleast_2d(np.asarray(z, dtype=float))
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    P = z.shape[0]
    E = np.eye(2) * eps
    shifts = [("0", 0, 0, np.zeros(2), np.zeros(2))]
    for i in range(2):
        for sg in (1, -1):
            shifts.append((f"z{i}{sg}", i, sg, sg * E[i], np.zeros(2)))
            shifts.append((f"k{i}{sg}", i, sg, np.zeros(2), sg * E[i]))
    for a in (1, -1):
        for b in (1, -1):
            shifts.append((f"m{a}{b}", a, b, np.zeros(2), a * E[0] + b * E[1]))
    Z = np.concatenate([z + sh[3] for sh in shifts])
    K = np.concatenate([zeta + sh[4] for sh in shifts])
    fm = variational_flow(sym, Z, K, r, s, tol=tol)
    blocks = {sh[0]: fm.J[j * P:(j + 1) * P] for j, sh in enumerate(shifts)}
    J0 = blocks["0"]

    def d_dir(kind):  # (P, 4, 4, 2) first derivatives of J along z or zeta
        return np.stack([(blocks[f"{kind}{i}1"] - blocks[f"{kind}{i}-1"]) / (2 * eps) for i in range(2)], axis=-1)

    dJz = d_dir("z")
    dJk = d_dir("k")
    d2Jk = np.zeros(J0.shape + (2, 2))
    for i in range(2):
        d2Jk[..., i, i] = (blocks[f"k{i}1"] - 2 * J0 + blocks[f"k{i}-1"]) / eps**2
    mixed = (blocks["m11"] - blocks["m1-1"] - blocks["m-11"] + blocks["m-1-1"]) / (4 * eps**2)
    d2Jk[..., 0, 1] = d2Jk[..., 1, 0] = mixed
    span = abs(s - r)
    br = math.sqrt(1 + sym.mu * span**2)  # <mu^{1/2}|s - r|>
    I2 = np.eye(2)[None]
    vals = {
        "dz_z-I": (_norm(J0[:, :2, :2] - I2), span),
        "dzeta_z": (_norm(J0[:, :2, 2:]), span),
        "dzeta_zeta-I": (_norm(J0[:, 2:, 2:] - I2), span),
        "dz_zeta": (_norm(J0[:, 2:, :2]), 1.0),
        "d2z_z": (_norm(dJz[:, :2, :2]), br),
        "d2z_zeta": (_norm(dJz[:, 2:, :2]), math.sqrt(sym.mu)),
        "dzdzeta_z": (_norm(dJz[:, :2, 2:]), span * br),
        "dzdzeta_zeta": (_norm(dJz[:, 2:, 2:]), br),
        "d2zeta": (_norm(dJk[:, :, 2:]), span * br),
        "d3zeta": (_norm(d2Jk[:, :, 2:]), span * br**2),
    }
    rows = []
    for key in ESTIMATES:
        v, b = vals[key]
        vmax = float(np.max(v))
        rows.append({"estimate": key, "value": vmax, "bound": float(b),
                     "ratio": vmax / b if b > 0 else math.inf})
    return rows


def corollary_discrepancy(sym: RescaledSymbol, z, zeta, r: float, s: float, tol: float = 1e-10) -> float:
    """``max |d_zeta z_{s,r} + int_r^s d_zeta^2 q dt| / |s - r|^2`` over seeds.

    The plus sign matches the convention ``dz/dx1 = -d_zeta q``.
    """
    fm = variational_flow(sym, z, zeta, r, s, tol=tol)
    D = fm.dzeta_z + fm.Q
    return float(np.max(_norm(D)) / (s - r) ** 2)


def slope_along(sym: RescaledSymbol, z, zeta, r: float, s: float, n: int = 8) -> np.ndarray:
    """``dx2/dx1`` sampled along trajectories at ``n`` interior times."""
    out = []
    ts = np.linspace(r, s, n + 1)
    cur_z, cur_k = np.atleast_2d(z), np.atleast_2d(zeta)
    for a, b in zip(ts[:-1], ts[1:]):
        d = sym.derivs(a, cur_z, cur_k)
        out.append(-d["q_zeta"][:, 0])
        fm = flow(sym, cur_z, cur_k, a, b)
        cur_z, cur_k = fm.z, fm.zeta
    return np.array(out)


def uniformity_table(thetas: Sequence[float] = (0.5, 0.25, 0.125), mus: Sequence[float] = (64, 128, 256),
                     spans: Sequence[float] = (0.05, 0.1, 0.2), n_seeds: int = 16, c0: float = 0.1,
                     seed: int = 0, profile: str = "disk") -> list:
    """Ratio rows for every (mu, theta, |s - r|, estimate)."""
    rows = []
    for mu in mus:
        for th in thetas:
            sym = RescaledSymbol(profile, th, mu, c0=c0)
            for sp in spans:
                z, k = make_seeds(th, n_seeds, 0.0, sp, mu, seed=seed)
                for row in flow_derivative_report(sym, z, k, 0.0, sp):
                    rows.append({"mu": mu, "theta": th, "span": sp, **row})
    return rows


def mu_growth(rows: list) -> dict:
    """Largest ratio(2 mu)/ratio(mu) per estimate over the table (ignoring
    entries where both ratios are below 1e-9)."""
    idx = {(r["mu"], r["theta"], r["span"], r["estimate"]): r["ratio"] for r in rows}
    mus = sorted({r["mu"] for r in rows})
    worst = {}
    for (mu, th, sp, est), v in idx.items():
        nxt = [m for m in mus if abs(m - 2 * mu) < 1e-9]
        if not nxt:
            continue
        w = idx.get((nxt[0], th, sp, est))
        if w is None or max(v, w) < 1e-9:
            continue
        g = w / v if v > 0 else math.inf
        worst[est] = max(worst.get(est, 0.0), g)
    return worst
