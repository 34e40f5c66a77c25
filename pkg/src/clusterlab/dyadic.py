"""Angular and radial Littlewood-Paley cutoffs applied as FFT multipliers.

The angular family at scale ``lam`` lives on the frequency plane
``(xi2, xi3)``.  With ``E_j`` an even smooth step in ``xi2`` that equals 1
on ``|xi2| <= 2^{-j-1} lam`` and vanishes beyond ``2^{-j} lam``,

    beta_j  = (E_j - E_{j+1}) 1{xi2 > 0} W(xi3),      1 <= j < N,
    beta_-j = beta_j(-xi2, xi3),
    beta_N  = E_N W(xi3),

with ``W`` equal to 1 on ``[lam/2, 2 lam]`` and vanishing outside
``[lam/4, 4 lam]``.  The sum telescopes to ``E_1 W``, which is exactly 1
on ``|xi2| <= lam/8, xi3 in [lam/2, 2 lam]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .smooth import plateau, ramp

KINDS = ("angular", "shell", "conic", "aux_phi", "aux_psi")


def n_lambda(lam: float) -> int:
    """``N = ceil(log2(lam) / 3)`` (with a tolerance for exact powers of 8)."""
    v = math.log2(lam) / 3.0
    return int(math.ceil(v - 1e-12))


def theta_of(j: int) -> float:
    return 2.0 ** (-abs(j))


def _edge(j: int, lam: float) -> Tuple[float, float]:
    return 2.0 ** (-j - 1) * lam, 2.0 ** (-j) * lam


def _E(xi2, j: int, lam: float) -> np.ndarray:
    lo, hi = _edge(j, lam)
    return 1.0 - ramp(np.abs(xi2), lo, hi)


def _W(xi3, lam: float) -> np.ndarray:
    return plateau(xi3, lam / 4, lam / 2, 2 * lam, 4 * lam)


@dataclass(frozen=True)
class CutoffFamily:
    """One cutoff of a family, regenerable from its parameters.

    ``kind``: ``angular`` (beta_j), ``shell`` (Gamma_k, radial in 3-D),
    ``conic`` (Gamma), ``aux_phi`` / ``aux_psi`` (enlargements of beta_j).
    """

    kind: str
    lam: float
    index: int = 0
    n: int = 0
    params: dict = field(default_factory=dict)

    # --- geometry of the angular supports -------------------------------
    def xi2_support(self) -> Tuple[float, float]:
        """Closed xi2-interval containing the support of beta_index."""
        j = abs(self.index)
        if j == self.n:
            lo, hi = -_edge(j, self.lam)[1], _edge(j, self.lam)[1]
        else:
            lo, hi = _edge(j + 1, self.lam)[0], _edge(j, self.lam)[1]
            if self.index < 0:
                lo, hi = -hi, -lo
        return lo, hi

    def declared_box(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        j = abs(self.index)
        if j == self.n:
            b = self.lam ** (2.0 / 3.0)
            x2 = (-b, b)
        else:
            x2 = (2.0 ** (-j - 2) * self.lam, 2.0 ** (-j + 1) * self.lam)
            if self.index < 0:
                x2 = (-x2[1], -x2[0])
        return x2, (self.lam / 4, 4 * self.lam)

    def __call__(self, *xi) -> np.ndarray:
        if self.kind == "angular":
            xi2, xi3 = (np.asarray(v, dtype=float) for v in xi)
            return _angular(self.index, self.n, self.lam, xi2, xi3)
        if self.kind in ("aux_phi", "aux_psi"):
            xi2, xi3 = (np.asarray(v, dtype=float) for v in xi)
            return _aux(self, xi2, xi3)
        if self.kind == "conic":
            xi1, xi2, xi3 = (np.asarray(v, dtype=float) for v in xi)
            return conic_cutoff(xi1, xi2, xi3)
        if self.kind == "shell":
            xi1, xi2, xi3 = (np.asarray(v, dtype=float) for v in xi)
            return shell_cutoff(self.index, np.sqrt(xi1**2 + xi2**2 + xi3**2))
        raise ValueError(f"unknown cutoff kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lam": self.lam, "index": self.index, "n": self.n,
                "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "CutoffFamily":
        return cls(kind=d["kind"], lam=float(d["lam"]), index=int(d["index"]), n=int(d["n"]),
                   params=dict(d.get("params", {})))


def _angular(j: int, n: int, lam: float, xi2, xi3) -> np.ndarray:
    w3 = _W(xi3, lam)
    a = abs(j)
    if a == n:
        return _E(xi2, n, lam) * w3
    if not (1 <= a < n):
        raise ValueError(f"angular index {j} out of range for N = {n}")
    side = xi2 > 0 if j > 0 else xi2 < 0
    return np.where(side, _E(xi2, a, lam) - _E(xi2, a + 1, lam), 0.0) * w3


def _aux(c: CutoffFamily, xi2, xi3) -> np.ndarray:
    """phi_j equals 1 on the d-neighbourhood of beta_j's support box and
    vanishes outside the 2d-neighbourhood (psi_j: 3d and 4d), d = 2^{-j-10} lam."""
    j = abs(c.index)
    d = 2.0 ** (-j - 10) * c.lam
    inner, outer = (1, 2) if c.kind == "aux_phi" else (3, 4)
    base = CutoffFamily("angular", c.lam, c.index, c.n)
    lo2, hi2 = base.xi2_support()
    lo3, hi3 = c.lam / 4, 4 * c.lam
    f2 = plateau(xi2, lo2 - outer * d, lo2 - inner * d, hi2 + inner * d, hi2 + outer * d)
    f3 = plateau(xi3, lo3 - outer * d, lo3 - inner * d, hi3 + inner * d, hi3 + outer * d)
    return f2 * f3


def conic_cutoff(xi1, xi2, xi3) -> np.ndarray:
    """Order-zero multiplier: 1 where |xi3|/2 <= |(xi1, xi2)| <= 2|xi3|,
    supported where |xi3|/4 <= |(xi1, xi2)| <= 4|xi3|."""
    r = np.hypot(xi1, xi2)
    a3 = np.abs(xi3)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(a3 > 0, r / np.where(a3 > 0, a3, 1.0), np.inf)
    t = np.where(np.isfinite(t), t, 1e300)
    return plateau(t, 0.25, 0.5, 2.0, 4.0)


def shell_cutoff(k: int, rad) -> np.ndarray:
    """Radial Littlewood-Paley piece: the k = 0 piece is the low-frequency
    part (1 on |xi| <= 1), k >= 1 is supported in [2^{k-1}, 2^{k+1}]."""
    rad = np.asarray(rad, dtype=float)
    low = lambda s: 1.0 - ramp(s, 1.0, 2.0)
    if k == 0:
        return low(rad)
    return low(rad / 2.0**k) - low(rad / 2.0 ** (k - 1))


def build_angular_family(lam: float) -> List[CutoffFamily]:
    """beta_1..beta_{N-1}, their mirrors and the cap beta_N, certified.

    Raises
    ------
    ValueError
        If ``N < 2`` (too few dyadic angular scales).
    """
    if lam < 8:
        raise ValueError("lam must be >= 8")
    n = n_lambda(lam)
    if n < 2:
        raise ValueError(f"lam = {lam} gives N = {n}: too few dyadic angular scales")
    fam = [CutoffFamily("angular", float(lam), j, n) for j in range(1, n)]
    fam += [CutoffFamily("angular", float(lam), -j, n) for j in range(1, n)]
    fam.append(CutoffFamily("angular", float(lam), n, n))
    certify_family(fam)
    return fam


def angular_position(c: CutoffFamily) -> int:
    """Position of beta_j in the ordering by angle: 1, 2, ..., N (cap), and the
    negative side continuing N+1, ..., 2N-1 back to angle -pi/4."""
    j = c.index
    return j if j > 0 else 2 * c.n + j


def angular_distance(a: CutoffFamily, b: CutoffFamily) -> int:
    return abs(angular_position(a) - angular_position(b))


def aux_pair(c: CutoffFamily) -> Tuple[CutoffFamily, CutoffFamily]:
    return (CutoffFamily("aux_phi", c.lam, c.index, c.n),
            CutoffFamily("aux_psi", c.lam, c.index, c.n))


def certify_family(fam: List[CutoffFamily], n2: int = 4001, n3: int = 257) -> dict:
    """Check support containment, partition of unity, mirror symmetry and
    gradient bounds on a dense grid; raise ``AssertionError`` on failure."""
    lam = fam[0].lam
    xi2 = np.linspace(-lam, lam, n2)
    xi3 = np.linspace(0.0, 5 * lam, n3)
    X2, X3 = np.meshgrid(xi2, xi3, indexing="ij")
    total = np.zeros_like(X2)
    report = {"partition_error": 0.0, "mirror_error": 0.0, "gradient_ratio": 0.0}
    h = xi2[1] - xi2[0]
    for c in fam:
        v = c(X2, X3)
        total += v
        (lo2, hi2), (lo3, hi3) = c.declared_box()
        outside = (X2 < lo2) | (X2 > hi2) | (X3 < lo3) | (X3 > hi3)
        if np.any(v[outside] != 0.0):
            raise AssertionError(f"beta_{c.index} leaks outside its declared support")
        if c.index > 0 and abs(c.index) < c.n:
            mirror = CutoffFamily("angular", lam, -c.index, c.n)(-X2, X3)
            report["mirror_error"] = max(report["mirror_error"], float(np.max(np.abs(mirror - v))))
        if abs(c.index) < c.n:
            grad = np.max(np.abs(np.diff(v, axis=0))) / h
            report["gradient_ratio"] = max(report["gradient_ratio"], grad / (2.0 ** abs(c.index) / lam))
    cov = (np.abs(X2) <= lam / 8) & (X3 >= lam / 2) & (X3 <= 2 * lam)
    report["partition_error"] = float(np.max(np.abs(total[cov] - 1.0)))
    if report["partition_error"] > 1e-12 or report["mirror_error"] > 0:
        raise AssertionError(f"family certification failed: {report}")
    if report["gradient_ratio"] > 16:
        raise AssertionError(f"gradient bound violated: {report}")
    return report


def aux_separation(c: CutoffFamily, family: List[CutoffFamily], n2: int = 20001) -> dict:
    """Measured separations along xi2 at the centre line xi3 = lam.

    Returns the three distances (supp(1 - phi_j) to supp beta_j, supp(1 - psi_j)
    to supp phi_j, and supp psi_j to the nearest supp beta_i with |i - j| >= 5)
    together with the required value ``2^{-j-10} lam``.
    """
    lam = c.lam
    j = abs(c.index)
    phi, psi = aux_pair(c)
    lo, hi = c.xi2_support()
    d = 2.0 ** (-j - 10) * lam
    pad = 8 * d
    xi2 = np.linspace(lo - pad, hi + pad, n2)
    xi3 = np.full_like(xi2, lam)

    def gap(mask_a, mask_b) -> float:
        a = xi2[mask_a]
        b = xi2[mask_b]
        if a.size == 0 or b.size == 0:
            return np.inf
        return float(np.min(np.abs(a[:, None] - b[None, ::max(1, b.size // 2000)])))

    vb = c(xi2, xi3) != 0
    vphi = phi(xi2, xi3)
    vpsi = psi(xi2, xi3)
    out = {"required": d,
           "one_minus_phi_to_beta": gap(vphi != 1.0, vb),
           "one_minus_psi_to_phi": gap(vpsi != 1.0, vphi != 0)}
    far = [b for b in family if b.kind == "angular" and angular_distance(b, c) >= 5]
    sep = np.inf
    supp_psi = xi2[vpsi != 0]
    for b in far:
        blo, bhi = b.xi2_support()
        if supp_psi.size:
            sep = min(sep, max(blo - supp_psi.max(), supp_psi.min() - bhi, 0.0))
    out["psi_to_far_beta"] = sep
    return out


def _freq_grid(shape, h):
    k2 = 2 * np.pi * np.fft.fftfreq(shape[0], d=h[0])
    k3 = 2 * np.pi * np.fft.fftfreq(shape[1], d=h[1])
    return np.meshgrid(k2, k3, indexing="ij")


def check_nyquist(shape, h, lam: float) -> None:
    for ax, hh in enumerate(h):
        nyq = np.pi / hh
        if nyq < 4 * lam:
            raise ValueError(f"axis {ax}: Nyquist {nyq:.4g} below 4*lam = {4 * lam:.4g}")


def apply_multiplier(c: CutoffFamily, f: np.ndarray, h=(1.0, 1.0), lam: Optional[float] = None) -> np.ndarray:
    """``ifft(c(xi) fft(f))`` on a periodic (x2, x3) grid with spacings ``h``."""
    f = np.asarray(f)
    check_nyquist(f.shape, h, c.lam if lam is None else lam)
    K2, K3 = _freq_grid(f.shape, h)
    return np.fft.ifft2(np.fft.fft2(f) * c(K2, K3))


def almost_orthogonality_check(lam: float, f: np.ndarray, h=(1.0, 1.0)) -> float:
    """``||(sum_j |beta_j(D') f|^2)^{1/2}||_2 / ||f||_2`` for the family at lam."""
    f = np.asarray(f)
    nf = np.linalg.norm(f)
    if nf == 0:
        raise ValueError("square-function ratio undefined for f = 0")
    fam = build_angular_family(lam)
    check_nyquist(f.shape, h, lam)
    K2, K3 = _freq_grid(f.shape, h)
    F = np.fft.fft2(f)
    sq = np.zeros(f.shape)
    for c in fam:
        sq += np.abs(np.fft.ifft2(F * c(K2, K3))) ** 2
    return float(np.sqrt(sq.sum()) / nf)


def random_covered_field(lam: float, shape, h, seed: int = 0) -> np.ndarray:
    """Random field whose spectrum lies in the covered set
    ``|xi2| <= lam/8, xi3 in [lam/2, 2 lam]``."""
    rng = np.random.default_rng(seed)
    K2, K3 = _freq_grid(shape, h)
    cov = (np.abs(K2) <= lam / 8) & (K3 >= lam / 2) & (K3 <= 2 * lam)
    F = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * cov
    return np.fft.ifft2(F)
