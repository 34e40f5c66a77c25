"""C-infinity steps and bumps built from exp(-1/t)."""

from __future__ import annotations

import numpy as np


def _psi(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t) -> np.ndarray:
    """Smooth step: 0 for t <= 0, 1 for t >= 1, C-infinity in between."""
    t = np.asarray(t, dtype=float)
    a = _psi(t)
    b = _psi(1.0 - t)
    return a / (a + b)


def ramp(x, lo: float, hi: float) -> np.ndarray:
    """Smooth transition from 0 (x <= lo) to 1 (x >= hi)."""
    if not hi > lo:
        raise ValueError("ramp needs hi > lo")
    return smooth_step((np.asarray(x, dtype=float) - lo) / (hi - lo))


def plateau(x, a: float, b: float, c: float, d: float) -> np.ndarray:
    """Bump equal to 1 on [b, c] and supported in [a, d]."""
    if not (a < b <= c < d):
        raise ValueError("plateau needs a < b <= c < d")
    x = np.asarray(x, dtype=float)
    return ramp(x, a, b) * (1.0 - ramp(x, c, d))


def bump(t) -> np.ndarray:
    """exp(-1/(1 - t^2)) on |t| < 1, zero outside (not normalized)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def smooth_step_derivs(t):
    """``smooth_step`` and its first two derivatives.

    With ``L = 1/(1-t) - 1/t`` the step is the logistic function of ``L``.
    """
    from scipy.special import expit
    t = np.asarray(t, dtype=float)
    s = np.where(t >= 1, 1.0, 0.0)
    d1 = np.zeros_like(t)
    d2 = np.zeros_like(t)
    mid = (t > 0) & (t < 1)
    u = t[mid]
    L = 1.0 / (1.0 - u) - 1.0 / u
    sig = expit(L)
    s1 = sig * (1.0 - sig)
    L1 = 1.0 / u**2 + 1.0 / (1.0 - u) ** 2
    L2 = -2.0 / u**3 + 2.0 / (1.0 - u) ** 3
    s[mid] = sig
    d1[mid] = s1 * L1
    d2[mid] = s1 * (1.0 - 2.0 * sig) * L1**2 + s1 * L2
    return s, d1, d2


def ramp_derivs(x, lo: float, hi: float):
    """``ramp`` and its first two derivatives in ``x``."""
    if not hi > lo:
        raise ValueError("ramp needs hi > lo")
    w = hi - lo
    s, d1, d2 = smooth_step_derivs((np.asarray(x, dtype=float) - lo) / w)
    return s, d1 / w, d2 / w**2
