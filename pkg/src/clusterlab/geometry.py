"""Metric models in boundary normal coordinates and the symbol p.

Coordinates are ``x = (x1, x2)`` with ``x2 >= 0`` the distance to the
boundary; ``x3`` (the time-like variable of the wave picture) never enters
the coefficients.  The operator is ``rho^{-1} d_i(rho g^{ij} d_j)`` with
``g^{22} = 1`` and ``g^{12} = 0``, so a model is the pair of scalar fields
``rho`` and ``g11`` (the inverse-metric coefficient ``g^{11}``).

After even reflection across ``x2 = 0`` the coefficients are Lipschitz but
have a kink on the boundary row; this is what makes the truncated symbols
below non-trivial.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .smooth import ramp

PROFILES = ("flat", "disk", "custom-perturbation")
N_DERIV = 8  # derivative orders tracked by smoothness reports


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid; ``x1`` is periodic, ``x2`` is not.

    ``x2`` runs over ``[0, X]`` (half grid) or ``[-X, X]`` (doubled grid).
    """

    x1: np.ndarray
    x2: np.ndarray

    @classmethod
    def half(cls, n1: int = 32, x1_extent: float = 1.0, x2_extent: float = 1.0, h2: float = 1 / 64):
        """Grid with periodic ``x1 in [-x1_extent, x1_extent)`` and ``x2 in [0, x2_extent]``."""
        if h2 <= 0 or x2_extent <= 0:
            raise ValueError("grid spacing and extent must be positive")
        n2 = int(round(x2_extent / h2)) + 1
        x1 = -x1_extent + 2 * x1_extent * np.arange(n1) / n1
        x2 = h2 * np.arange(n2)
        return cls(x1=x1, x2=x2)

    @property
    def h1(self) -> float:
        return float(self.x1[1] - self.x1[0]) if self.x1.size > 1 else 1.0

    @property
    def h2(self) -> float:
        return float(self.x2[1] - self.x2[0])

    @property
    def shape(self) -> tuple:
        return (self.x1.size, self.x2.size)

    @property
    def doubled(self) -> bool:
        return self.x2[0] < 0

    def mesh(self):
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def descriptor(self) -> dict:
        return {
            "x1": [float(self.x1[0]), float(self.h1), int(self.x1.size)],
            "x2": [float(self.x2[0]), float(self.h2), int(self.x2.size)],
        }


@dataclass(frozen=True)
class MetricModel:
    """Coefficients ``rho``, ``g11`` (``g22 = 1``) sampled on a grid.

    ``lipschitz`` and ``boundary_second_diff`` are filled in by
    :func:`extend_even`.
    """

    rho: np.ndarray
    g11: np.ndarray
    grid: Grid
    c0: float
    profile: str = "flat"
    radius: Optional[float] = None
    lipschitz: Optional[float] = None
    boundary_second_diff: Optional[float] = None
    params: dict = field(default_factory=dict)

    @property
    def g22(self) -> np.ndarray:
        return np.ones_like(self.g11)

    @property
    def extended(self) -> bool:
        return self.grid.doubled

    def coefficient(self) -> np.ndarray:
        """``a = (g^{11})^{-1/2}``, the factor multiplying sqrt(xi3^2 - xi2^2)."""
        return 1.0 / np.sqrt(self.g11)

    def check_invariants(self, atol: float = 1e-14) -> None:
        """Raise ``ValueError`` if a model invariant fails on the grid."""
        X1, X2 = self.grid.mesh()
        if np.any(self.rho <= 0) or np.any(self.g11 <= 0):
            raise ValueError("rho and g11 must be positive")
        i0 = int(np.argmin(np.abs(self.grid.x2)))
        if np.max(np.abs(self.g11[:, i0] - 1.0)) > atol:
            raise ValueError("g11 != 1 on the boundary row")
        dev = max(np.max(np.abs(self.rho - 1)), np.max(np.abs(self.g11 - 1)))
        if dev > self.c0 * (1 + 1e-12):
            raise ValueError(f"coefficient deviation {dev:.3g} exceeds c0 = {self.c0}")
        far = np.hypot(X1, X2) >= 0.75
        if np.any(np.abs(self.rho[far] - 1) > atol) or np.any(np.abs(self.g11[far] - 1) > atol):
            raise ValueError("coefficients are not flat for |x| >= 3/4")

    def to_json(self) -> str:
        def block(name, arr):
            return {"name": name, "grid": self.grid.descriptor(), "shape": list(arr.shape),
                    "samples": arr.ravel(order="C").tolist()}

        meta = {"profile": self.profile, "c0": self.c0, "radius": self.radius,
                "lipschitz": self.lipschitz, "boundary_second_diff": self.boundary_second_diff,
                "params": self.params}
        return json.dumps({"meta": meta, "fields": [block("rho", self.rho), block("g11", self.g11)]})

    @classmethod
    def from_json(cls, text: str) -> "MetricModel":
        doc = json.loads(text)
        arrs = {}
        grid = None
        for blk in doc["fields"]:
            arrs[blk["name"]] = np.asarray(blk["samples"], dtype=float).reshape(blk["shape"])
            d = blk["grid"]
            x1 = d["x1"][0] + d["x1"][1] * np.arange(d["x1"][2])
            x2 = d["x2"][0] + d["x2"][1] * np.arange(d["x2"][2])
            grid = Grid(x1=x1, x2=x2)
        m = doc["meta"]
        return cls(rho=arrs["rho"], g11=arrs["g11"], grid=grid, c0=m["c0"], profile=m["profile"],
                   radius=m["radius"], lipschitz=m["lipschitz"],
                   boundary_second_diff=m["boundary_second_diff"], params=m.get("params", {}))


def blend_weight(x1, x2) -> np.ndarray:
    """1 on |x| <= 1/2, 0 on |x| >= 3/4."""
    return 1.0 - ramp(np.hypot(x1, x2), 0.5, 0.75)


def disk_dual_metric(x2, radius: float = 1.0) -> np.ndarray:
    """Dual-metric coefficient ``g_11 = (1 - x2/R)^2`` of the disk of radius R,
    in the coordinates ``r = R - x2``, ``x1 = R * angle`` (no blending)."""
    return (1.0 - np.asarray(x2, dtype=float) / radius) ** 2


def disk_radius_for(c0: float) -> float:
    """Smallest radius for which the blended disk model obeys the c0 bound.

    The inverse-metric deviation ``(1 - x2/R)^{-2} - 1`` is largest at
    ``x2 = 3/4`` and equals c0 there for this R.
    """
    return 0.75 / (1.0 - (1.0 + c0) ** -0.5)


def inverse_metric_at(profile: str, x1, x2, c0: float = 0.1, radius: Optional[float] = None,
                      amplitude: Optional[float] = None) -> np.ndarray:
    """Pointwise ``g^{11}`` of the even extension (uses ``|x2|``)."""
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    x1 = np.asarray(x1, dtype=float)
    x2 = np.abs(np.asarray(x2, dtype=float))
    if profile == "flat":
        return np.ones(np.broadcast(x1, x2).shape)
    chi = blend_weight(x1, x2)
    if profile == "disk":
        R = disk_radius_for(c0) if radius is None else float(radius)
        return 1.0 + chi * (1.0 / disk_dual_metric(x2, R) - 1.0)
    amp = 0.9 * c0 if amplitude is None else float(amplitude)
    return 1.0 + chi * amp * (x2 / 0.75) * (0.75 + 0.25 * np.cos(np.pi * x1))


def build_model_metric(profile: str, grid: Grid, c0: float = 0.1, radius: Optional[float] = None,
                       amplitude: Optional[float] = None) -> MetricModel:
    """Construct a metric model on a half grid ``x2 >= 0``.

    Parameters
    ----------
    profile : {"flat", "disk", "custom-perturbation"}
        ``disk`` is the geodesic collar of a disk of radius ``radius``
        (default: the smallest radius compatible with ``c0``).
        ``custom-perturbation`` is a smooth x1-dependent perturbation that
        vanishes on the boundary row.
    grid : Grid
        Must contain the row ``x2 = 0``.
    c0 : float in (0, 1/2)
    """
    if not (0 < c0 < 0.5):
        raise ValueError(f"c0 must lie in (0, 1/2), got {c0}")
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    if grid.h2 <= 0 or (grid.x1.size > 1 and grid.h1 <= 0):
        raise ValueError("grid spacing must be positive")
    if np.min(np.abs(grid.x2)) > 1e-14 * max(1.0, grid.h2) or grid.x2[0] < -1e-14:
        raise ValueError("grid must be a half grid containing the boundary row x2 = 0")
    X1, X2 = grid.mesh()
    chi = blend_weight(X1, X2)
    params = {}
    if profile == "flat":
        rho = np.ones(grid.shape)
        g11 = np.ones(grid.shape)
    elif profile == "disk":
        R = disk_radius_for(c0) if radius is None else float(radius)
        raw_rho = 1.0 - X2 / R
        raw_g11 = 1.0 / disk_dual_metric(X2, R)
        rho = 1.0 + chi * (raw_rho - 1.0)
        g11 = 1.0 + chi * (raw_g11 - 1.0)
        radius = R
    else:
        amp = 0.9 * c0 if amplitude is None else float(amplitude)
        params["amplitude"] = amp
        shape = (X2 / 0.75) * (0.75 + 0.25 * np.cos(np.pi * X1))
        g11 = 1.0 + chi * amp * shape
        rho = 1.0 - chi * 0.5 * amp * shape
    m = MetricModel(rho=rho, g11=g11, grid=grid, c0=c0, profile=profile, radius=radius, params=params)
    m.check_invariants()
    return m


def _reflect(f: np.ndarray, sign: float) -> np.ndarray:
    return np.concatenate([sign * f[..., :0:-1], f], axis=-1)


def extend_even(m: MetricModel) -> MetricModel:
    """Reflect ``rho`` and ``g11`` evenly onto ``x2 in [-X, X]``.

    Records the measured Lipschitz constant of ``g11`` (max first
    difference quotient) and the centered second difference at ``x2 = 0``.
    """
    if m.extended:
        raise ValueError("model is already extended")
    if m.rho.shape != m.grid.shape or m.g11.shape != m.grid.shape:
        raise ValueError("field shapes do not match grid")
    x2 = np.concatenate([-m.grid.x2[:0:-1], m.grid.x2])
    grid = Grid(x1=m.grid.x1, x2=x2)
    rho = _reflect(m.rho, 1.0)
    g11 = _reflect(m.g11, 1.0)
    h = m.grid.h2
    lip2 = np.max(np.abs(np.diff(g11, axis=1))) / h
    lip1 = np.max(np.abs(np.diff(g11, axis=0, append=g11[:1]))) / m.grid.h1 if g11.shape[0] > 1 else 0.0
    i0 = m.grid.x2.size - 1
    d2 = (g11[:, i0 + 1] - 2 * g11[:, i0] + g11[:, i0 - 1]) / h**2
    return replace(m, rho=rho, g11=g11, grid=grid, lipschitz=float(max(lip1, lip2)),
                   boundary_second_diff=float(np.max(np.abs(d2))))


def extend_data(f: np.ndarray, parity: str, tol: float = 1e-10) -> np.ndarray:
    """Extend samples on ``x2 = 0, h, ..., X`` (last axis) to ``[-X, X]``.

    Odd extension requires a vanishing boundary trace (Dirichlet data); the
    trace is then set to exactly zero so the reflection is exact.
    """
    f = np.asarray(f)
    if parity == "even":
        return _reflect(f, 1.0)
    if parity != "odd":
        raise ValueError("parity must be 'odd' or 'even'")
    trace = np.max(np.abs(f[..., 0]))
    if trace > tol:
        raise ValueError(f"odd extension needs zero boundary trace; max |f(x1, 0)| = {trace:.3e}")
    g = np.array(f, dtype=np.result_type(f, float), copy=True)
    g[..., 0] = 0.0
    return _reflect(g, -1.0)


# ---------------------------------------------------------------------------
# symbol p(x, xi')

def hyperbolic_weight(xi2, xi3, lam: float) -> np.ndarray:
    """1 on |xi2| <= lam/9, |xi3| in [lam/3, 3 lam]; 0 outside
    |xi2| < lam/8, |xi3| in (lam/4, 4 lam)."""
    a2 = np.abs(xi2)
    a3 = np.abs(xi3)
    w2 = 1.0 - ramp(a2, lam / 9, lam / 8)
    w3 = ramp(a3, lam / 4, lam / 3) * (1.0 - ramp(a3, 3 * lam, 4 * lam))
    return w2 * w3


def symbol_formula(a, xi2, xi3, lam: float) -> np.ndarray:
    """p for coefficient values ``a = g11^{-1/2}`` (broadcast against xi)."""
    xi2 = np.asarray(xi2, dtype=float)
    xi3 = np.asarray(xi3, dtype=float)
    w = hyperbolic_weight(xi2, xi3, lam)
    rad = np.where(w > 0, xi3**2 - xi2**2, 1.0)
    if np.any(rad <= 0):
        raise ValueError("negative radicand inside the hyperbolic region")
    norm = np.hypot(xi2, xi3)
    p = w * np.sqrt(rad) * a + (1.0 - w) * norm
    near0 = ramp(norm, 0.5, 1.0)
    return near0 * p + (1.0 - near0)


def smooth_cutoff_multiplier(k, cutoff: float) -> np.ndarray:
    """Radial multiplier: 1 for |k| <= 3 cutoff / 4, 0 for |k| >= cutoff."""
    return 1.0 - ramp(np.abs(k), 0.75 * cutoff, cutoff)


def truncate_field(f: np.ndarray, h: float, cutoff: float) -> np.ndarray:
    """Apply the smooth frequency truncation along the last axis (periodic).

    ``cutoff`` is an angular frequency (radians per unit length).
    """
    n = f.shape[-1]
    nyq = np.pi / h
    if cutoff > nyq:
        raise ValueError(f"cutoff {cutoff:.4g} exceeds grid Nyquist {nyq:.4g}")
    k = 2 * np.pi * np.fft.fftfreq(n, d=h)
    F = np.fft.fft(f, axis=-1)
    return np.fft.ifft(F * smooth_cutoff_multiplier(k, cutoff), axis=-1).real


@dataclass(frozen=True)
class SymbolModel:
    """The symbol ``p(x, xi')`` of a extended metric at scale ``lam``.

    ``a`` holds the coefficient ``g11^{-1/2}`` on the periodic doubled grid
    (the duplicated endpoint ``x2 = X`` is dropped); after truncation it is
    the band-limited coefficient.
    """

    metric: MetricModel
    lam: float
    a: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    cutoff: Optional[float] = None

    def evaluate(self, xi2, xi3) -> np.ndarray:
        """p on every grid point; output shape ``a.shape + xi.shape``."""
        xi2, xi3 = np.broadcast_arrays(np.asarray(xi2, float), np.asarray(xi3, float))
        a = self.a.reshape(self.a.shape + (1,) * xi2.ndim)
        return symbol_formula(a, xi2, xi3, self.lam)

    def verify_factorization(self, n_samples: int = 400, seed: int = 0) -> float:
        """Max relative defect of ``a^{11}(xi1^2 - p^2) = sum_j a^{jj} xi_j^2``.

        Uses ``a^{11} = -rho g^{11}``, ``a^{22} = -rho``, ``a^{33} = rho`` at
        random points of the hyperbolic region.
        """
        if self.cutoff is not None:
            g11 = self.a ** -2.0
        else:
            g11 = self.metric.g11[:, : self.a.shape[1]]
        rho = self.metric.rho[:, : self.a.shape[1]]
        rng = np.random.default_rng(seed)
        i = rng.integers(0, self.a.shape[0], n_samples)
        j = rng.integers(0, self.a.shape[1], n_samples)
        xi2 = rng.uniform(-self.lam / 9, self.lam / 9, n_samples)
        xi3 = rng.uniform(self.lam / 3, 3 * self.lam, n_samples) * rng.choice([-1, 1], n_samples)
        xi1 = rng.uniform(-2 * self.lam, 2 * self.lam, n_samples)
        p = symbol_formula(self.a[i, j], xi2, xi3, self.lam)
        lhs = -rho[i, j] * g11[i, j] * (xi1**2 - p**2)
        rhs = -rho[i, j] * g11[i, j] * xi1**2 - rho[i, j] * xi2**2 + rho[i, j] * xi3**2
        scale = rho[i, j] * (g11[i, j] * xi1**2 + xi2**2 + xi3**2)
        return float(np.max(np.abs(lhs - rhs) / scale))


def build_symbol(m: MetricModel, lam: float) -> SymbolModel:
    """Symbol p of an extended metric at frequency scale ``lam >= 4``."""
    if lam < 4:
        raise ValueError("lam must be >= 4")
    if not m.extended:
        raise ValueError("metric must be extended across x2 = 0 first")
    a = m.coefficient()[:, :-1]
    s = SymbolModel(metric=m, lam=float(lam), a=a, x1=m.grid.x1, x2=m.grid.x2[:-1])
    defect = s.verify_factorization()
    if defect > 1e-10:
        raise ValueError(f"factorization identity fails: relative defect {defect:.2e}")
    return s


def truncate_symbol(s: SymbolModel, cutoff: float) -> SymbolModel:
    """Truncate the x'-dependence of p to angular frequencies below ``cutoff``.

    The xi-only parts of p are constant in x and pass unchanged, so only the
    coefficient ``a`` needs filtering.
    """
    h = float(s.x2[1] - s.x2[0])
    a = truncate_field(s.a, h, cutoff)
    return replace(s, a=a, cutoff=float(cutoff))


def spectral_leakage(f: np.ndarray, h: float, cutoff: float) -> float:
    """Relative Fourier mass of ``f - mean`` above ``cutoff`` along the last axis."""
    F = np.fft.fft(f, axis=-1)
    k = 2 * np.pi * np.fft.fftfreq(f.shape[-1], d=h)
    tot = np.sum(np.abs(F) ** 2)
    if tot == 0:
        return 0.0
    return float(np.sqrt(np.sum(np.abs(F[..., np.abs(k) > cutoff]) ** 2) / tot))


def shell_error(s: SymbolModel, st: SymbolModel, n_dir: int = 64) -> float:
    """sup |p_trunc - p| over the shell |xi'| = lam (angles within the
    hyperbolic cone and beyond)."""
    ang = np.linspace(-np.pi / 2, np.pi / 2, n_dir)
    xi2 = s.lam * np.sin(ang)
    xi3 = s.lam * np.cos(ang)
    return float(np.max(np.abs(st.evaluate(xi2, xi3) - s.evaluate(xi2, xi3))))


def truncation_profile(profile: np.ndarray, x2: np.ndarray, theta: float, mu: float, c: float = 1 / 16,
                       N: int = 4, window: float = 8.0) -> dict:
    """Compare ``q_mu - q`` with its weighted derivative bound shapes.

    ``q_mu`` truncates the samples ``profile`` (a coefficient ``p(theta x2)``
    on a periodic rescaled grid) at ``c mu`` and ``q`` at ``c mu^{1/2}``.
    The bound shapes are ``theta mu^{(k-1)/2} <c mu^{1/2} x2>^{-N}`` for
    k = 0, 1 and ``theta (mu^{1/2} <c mu^{1/2} x2>^{-N} + mu <c mu x2>^{-N})``
    for k = 2; the weights carry the factor c because the truncation kernel
    lives on the scale ``1/(c mu^{1/2})``.  Ratios are maximized over
    ``|x2| <= window / (c mu^{1/2})``.
    """
    h = float(x2[1] - x2[0])
    k = 2 * np.pi * np.fft.fftfreq(x2.size, d=h)
    if c * mu > np.pi / h:
        raise ValueError("grid does not resolve the c*mu truncation")
    P = np.fft.fft(profile)
    diff_hat = P * (smooth_cutoff_multiplier(k, c * mu) - smooth_cutoff_multiplier(k, c * np.sqrt(mu)))
    d = [np.fft.ifft(diff_hat * (1j * k) ** j).real for j in range(3)]
    w_half = (1 + (c * x2) ** 2 * mu) ** (-N / 2)
    w_full = (1 + (c * x2) ** 2 * mu**2) ** (-N / 2)
    shapes = [theta * mu ** (-0.5) * w_half, theta * w_half,
              theta * (np.sqrt(mu) * w_half + mu * w_full)]
    sel = np.abs(x2) <= window / (c * np.sqrt(mu))
    return {f"ratio_d{j}": float(np.max(np.abs(d[j][sel]) / shapes[j][sel])) for j in range(3)}
