"""Extension operator for arcs of the unit circle.

For an arc of length ``delta = 2^{-j}`` centred at angle 0,

    E g(x) = int_arc e^{i x . w(t)} g(t) dt,   w(t) = (cos t, sin t).

The anisotropic change of variables ``x1 = y1 / delta^2``, ``x2 = y2 / delta``
(and removal of the unimodular factor ``e^{i x1}``) turns ``E g`` into a
function ``F(y)`` whose phases are O(1) on the arc, with
``||E g||_{L^q(dx)} = delta^{-3/q} ||F||_{L^q(dy)}``.  Box radii for
``j >= 1`` are therefore measured in the rescaled variable ``y``.
``F`` is separable in ``(y1, y2)`` node by node, so it is evaluated on a
grid as one matrix product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special

from .fitting import fit_slope


@dataclass(frozen=True)
class ArcExtensionExperiment:
    """Gauss discretization of a density on the arc ``|t| <= delta / 2``."""

    j: int
    nodes: np.ndarray
    weights: np.ndarray
    density: np.ndarray

    @property
    def delta(self) -> float:
        return 2.0 ** (-self.j)

    @property
    def arc_length(self) -> float:
        return float(np.sum(self.weights))

    def extension(self, x1, x2) -> np.ndarray:
        """Direct evaluation of ``E g`` at points ``(x1, x2)`` (broadcast)."""
        x1 = np.asarray(x1, dtype=float)[..., None]
        x2 = np.asarray(x2, dtype=float)[..., None]
        ph = x1 * np.cos(self.nodes) + x2 * np.sin(self.nodes)
        return np.sum(self.weights * self.density * np.exp(1j * ph), axis=-1)

    def rescaled(self, y1: np.ndarray, y2: np.ndarray) -> np.ndarray:
        """``F`` on the tensor grid ``y1 x y2`` (shape ``(len(y1), len(y2))``)."""
        d = self.delta
        A = np.exp(1j * np.outer(y1, (np.cos(self.nodes) - 1.0) / d**2))
        B = np.exp(1j * np.outer(y2, np.sin(self.nodes) / d))
        return (A * (self.weights * self.density)) @ B.T


def make_arc(j: int, n_nodes: int = 64, density: Optional[Callable] = None,
             normalize: bool = True) -> ArcExtensionExperiment:
    """Arc of length ``2^{-j}`` (``j >= 1``) with ``n_nodes`` Gauss nodes.

    ``density`` maps angle to value (default constant); with ``normalize``
    it is scaled to unit L^2(arc) norm.
    """
    if j < 1:
        raise ValueError("arc experiments need j >= 1 (j = 0 is the full circle)")
    if n_nodes < 16:
        raise ValueError(f"under-resolved arc: {n_nodes} nodes (need at least 16)")
    d = 2.0 ** (-j)
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    t = 0.5 * d * x
    w = 0.5 * d * w
    g = np.ones_like(t) if density is None else np.asarray(density(t), dtype=complex)
    if normalize:
        g = g / math.sqrt(np.sum(w * np.abs(g) ** 2))
    return ArcExtensionExperiment(j=j, nodes=t, weights=w, density=np.asarray(g, dtype=complex))


def make_full_circle(n_nodes: int = 256, normalize: bool = False) -> ArcExtensionExperiment:
    """Full circle (``j = 0``) with the periodic trapezoid rule and density 1."""
    if n_nodes < 16:
        raise ValueError(f"under-resolved arc: {n_nodes} nodes (need at least 16)")
    t = -math.pi + 2 * math.pi * np.arange(n_nodes) / n_nodes
    w = np.full(n_nodes, 2 * math.pi / n_nodes)
    g = np.ones(n_nodes, dtype=complex)
    if normalize:
        g /= math.sqrt(2 * math.pi)
    return ArcExtensionExperiment(j=0, nodes=t, weights=w, density=g)


def _nodes_for_box(box: float) -> int:
    # phase derivative in the rescaled arc variable is at most ~|y|
    return int(max(16, math.ceil(1.2 * box + 32)))


def tail_estimate(F: np.ndarray, y1: np.ndarray, y2: np.ndarray, q: float, box: float,
                  bins: int = 64) -> float:
    """Estimate ``int_{|y| > box} |F|^q`` from the outer ring.

    Fits ``|F|^q |y|^{q/2}`` per angular bin on ``box/2 <= |y| <= box`` and
    integrates the ``|y|^{-q/2}`` profile to infinity.  Only meaningful for
    ``q > 4``.
    """
    if q <= 4:
        return math.inf
    Y1, Y2 = np.meshgrid(y1, y2, indexing="ij")
    rad = np.hypot(Y1, Y2)
    ring = (rad >= box / 2) & (rad <= box)
    phi = np.arctan2(Y2[ring], Y1[ring])
    amp = np.abs(F[ring]) ** q * rad[ring] ** (q / 2)
    idx = np.minimum(((phi + math.pi) / (2 * math.pi) * bins).astype(int), bins - 1)
    sums = np.bincount(idx, weights=amp, minlength=bins)
    cnt = np.bincount(idx, minlength=bins)
    mean = np.where(cnt > 0, sums / np.maximum(cnt, 1), 0.0)
    ang_int = float(np.sum(mean) * 2 * math.pi / bins)
    return ang_int * box ** (2 - q / 2) / (q / 2 - 2)


def extension_lq_norm(e: ArcExtensionExperiment, q: float, box: float = 64.0, h: float = 0.25,
                      check_tail: bool = True) -> dict:
    """``||E g||_{L^q}`` over the rescaled box ``|y| <= box``.

    Returns a dict with ``norm`` (in the original x variables), ``tail``
    (estimated q-th power of the discarded part, relative to the kept
    q-th power) and the grid data.

    Raises
    ------
    ValueError
        If the relative tail exceeds 10% (box too small).
    """
    if e.nodes.size < 16:
        raise ValueError("under-resolved arc (fewer than 16 nodes)")
    if e.j < 1:
        raise ValueError("use full_circle_norm for j = 0")
    need = _nodes_for_box(box)
    if e.nodes.size < need:
        # re-discretize the same density on more nodes
        e = _refine_arc(e, need)
    n = int(math.ceil(box / h))
    y = h * np.arange(-n, n + 1)
    F = e.rescaled(y, y)
    Y1, Y2 = np.meshgrid(y, y, indexing="ij")
    inside = np.hypot(Y1, Y2) <= box
    kept = float(np.sum(np.abs(F[inside]) ** q) * h * h)
    tail = tail_estimate(F, y, y, q, box) / kept
    if check_tail and tail > 0.1:
        raise ValueError(f"box {box} too small: estimated tail {tail:.3f} of the computed L^q mass")
    norm = (kept * e.delta ** -3) ** (1.0 / q)
    return {"j": e.j, "q": q, "box": box, "norm": norm, "tail": tail, "h": h, "nodes": int(e.nodes.size),
            "value_at_0": complex(np.sum(e.weights * e.density))}


def _refine_arc(e: ArcExtensionExperiment, n: int) -> ArcExtensionExperiment:
    """Same density re-sampled on ``n`` Gauss nodes (density assumed smooth
    on the arc; constant densities are reproduced exactly)."""
    d = e.delta
    x, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * d * x
    w = 0.5 * d * w
    if np.allclose(e.density, e.density[0]):
        g = np.full(t.shape, e.density[0], dtype=complex)
    else:
        g = np.interp(t, e.nodes, e.density.real) + 1j * np.interp(t, e.nodes, e.density.imag)
    return ArcExtensionExperiment(j=e.j, nodes=t, weights=w, density=g)


def full_circle_norm(q: float, box: float = 64.0) -> dict:
    """``||E g||_{L^q(|x| <= box)}`` for the full circle with density
    ``(2 pi)^{-1/2}`` (unit L^2 norm); ``E g = (2 pi)^{1/2} J_0(|x|)``."""
    f = lambda r: (math.sqrt(2 * math.pi) * abs(special.j0(r))) ** q * 2 * math.pi * r
    edges = np.arange(0.0, box + 1e-12, math.pi / 2)
    if edges[-1] < box:
        edges = np.append(edges, box)
    total = sum(integrate.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
                for a, b in zip(edges[:-1], edges[1:]))
    # |J0(r)|^q ~ (2/(pi r))^{q/2} |cos|^q; average of |cos|^q over a period
    mean_cos = special.gamma((q + 1) / 2) / (math.sqrt(math.pi) * special.gamma(q / 2 + 1))
    tail = (2 * math.pi) ** (q / 2) * 2 * math.pi * (2 / math.pi) ** (q / 2) * mean_cos \
        * box ** (2 - q / 2) / (q / 2 - 2) if q > 4 else math.inf
    return {"j": 0, "q": q, "box": box, "norm": total ** (1.0 / q), "tail": tail / total,
            "value_at_0": 2 * math.pi / math.sqrt(2 * math.pi)}


def arc_sweep(q: float, js: Sequence[int] = (1, 2, 3, 4, 5, 6), box: float = 64.0,
              h: float = 0.25) -> tuple:
    """Norms over ``js`` and the fit of ``log2(norm)`` against ``j``."""
    rows = [extension_lq_norm(make_arc(j), q, box=box, h=h) for j in js]
    fit = fit_slope([(r["j"], math.log2(r["norm"])) for r in rows])
    return rows, fit


def knapp_no_gain_check(j: int = 6, box: float = 64.0) -> dict:
    """Slopes of ``log2 ||E g_j||_q`` over ``1..j`` for q = 6 and q = 8."""
    if not (1 <= j <= 6):
        raise ValueError("j must lie in [1, 6]")
    if j < 3:
        raise ValueError("need j >= 3 for a three-point fit")
    js = list(range(1, j + 1))
    r6, f6 = arc_sweep(6, js, box)
    r8, f8 = arc_sweep(8, js, box)
    return {"q6_slope": f6.slope, "q8_slope": f8.slope, "q6_rows": r6, "q8_rows": r8,
            "full_circle": {6: full_circle_norm(6, box), 8: full_circle_norm(8, box)}}
