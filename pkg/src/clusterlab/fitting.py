"""Least-squares slope fits and the exact exponent targets gamma(q), delta(q)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

Rational = Union[int, Fraction, str, float]


@dataclass(frozen=True)
class ExponentFit:
    """Result of a straight-line least-squares fit.

    Attributes
    ----------
    points : tuple of (x, y)
        The data actually fitted (already log-transformed when produced by
        :func:`fit_loglog`).
    slope, intercept : float
    max_residual : float
        Largest absolute residual; always reported, never trimmed.
    """

    points: tuple
    slope: float
    intercept: float
    max_residual: float
    residuals: tuple = field(default=())

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "max_residual": self.max_residual,
            "points": [list(p) for p in self.points],
        }


def fit_slope(points: Iterable[Sequence[float]]) -> ExponentFit:
    """Fit ``y = slope * x + intercept`` by ordinary least squares.

    Parameters
    ----------
    points : iterable of (x, y)
        At least three points with at least two distinct x values.

    Raises
    ------
    ValueError
        For fewer than three points, non-finite data or degenerate x.
    """
    pts = np.asarray([(float(a), float(b)) for a, b in points], dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("fit_slope needs at least 3 points")
    if not np.all(np.isfinite(pts)):
        raise ValueError("fit_slope got non-finite data")
    x, y = pts[:, 0], pts[:, 1]
    if np.ptp(x) == 0.0 or np.unique(x).size < 2:
        raise ValueError("fit_slope: x values are degenerate")
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    slope = float(np.dot(dx, y - ym) / np.dot(dx, dx))
    intercept = float(ym - slope * xm)
    res = y - (slope * x + intercept)
    return ExponentFit(
        points=tuple((float(a), float(b)) for a, b in pts),
        slope=slope,
        intercept=intercept,
        max_residual=float(np.max(np.abs(res))),
        residuals=tuple(float(r) for r in res),
    )


def fit_loglog(xs: Sequence[float], ys: Sequence[float], base: float = math.e) -> ExponentFit:
    """Fit log(y) against log(x); the slope is the power-law exponent."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("fit_loglog needs positive data")
    lb = math.log(base)
    return fit_slope(zip(np.log(xs) / lb, np.log(ys) / lb))


def _as_q(q: Rational) -> Union[Fraction, None]:
    """Return q as a Fraction, or None for q = infinity."""
    if isinstance(q, str):
        if q.strip().lower() in ("inf", "infinity", "oo"):
            return None
        return Fraction(q)
    if isinstance(q, float):
        if math.isinf(q):
            if q < 0:
                raise ValueError("q must be >= 2")
            return None
        return Fraction(q).limit_denominator(10**9)
    return Fraction(q)


def exponent_target(kind: str, q: Rational) -> Fraction:
    """Exact growth exponent for two-dimensional clusters.

    ``gamma(q) = (2/3)(1/2 - 1/q)`` and ``delta(q) = 2(1/2 - 1/q) - 1/2``.

    Parameters
    ----------
    kind : {"gamma", "delta"}
    q : int, Fraction, str or float
        ``q >= 2``; ``float('inf')`` or ``"inf"`` is accepted.

    Returns
    -------
    Fraction
    """
    qq = _as_q(q)
    if qq is not None and qq < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    inv = Fraction(0) if qq is None else 1 / qq
    half = Fraction(1, 2)
    if kind == "gamma":
        return Fraction(2, 3) * (half - inv)
    if kind == "delta":
        return 2 * (half - inv) - half
    raise ValueError(f"unknown exponent kind {kind!r}")
