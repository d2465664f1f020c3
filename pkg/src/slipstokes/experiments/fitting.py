"""Least-squares exponent fits on log-log data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["FitResult", "fit_exponent", "trend_slope"]


@dataclass
class FitResult:
    """Fitted power-law exponent with a two-sigma band.

    Attributes:
        exponent: Fitted exponent, ``None`` for a degenerate (smooth) fit.
        band: ``(low, high)``.
        table: Raw ``(x, y)`` rows used for the fit.
        sentinel: ``"smooth"`` when the data vanish identically.
    """

    exponent: float | None
    band: tuple
    table: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    sentinel: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = self.band
        if self.exponent is not None and not lo <= self.exponent <= hi:
            raise ValueError("band must contain the exponent")


def fit_exponent(x, y, trim: int = 2, zero_tol: float = 1e-14) -> FitResult:
    """Fit ``y ~ C x^e`` by least squares in log-log scale.

    Args:
        x: Positive abscissae.
        y: Values; their absolute value is fitted.
        trim: Points dropped at each end after sorting by ``x``.
        zero_tol: Data below this (relative to 1) count as identically zero.

    Returns:
        The fit; a ``"smooth"`` sentinel when all ``|y| <= zero_tol``.
    """
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    order = np.argsort(x)
    x, y = x[order], y[order]
    table = np.column_stack([x, y])
    if np.all(y <= zero_tol):
        return FitResult(None, (np.nan, np.nan), table, "smooth")
    xs, ys = x[trim : x.size - trim], y[trim : y.size - trim]
    keep = ys > 0
    xs, ys = xs[keep], ys[keep]
    if xs.size < 3:
        raise ValueError("need at least three points after trimming")
    X = np.log(xs)
    Y = np.log(ys)
    (slope, icpt), res, *_ = np.linalg.lstsq(np.column_stack([X, np.ones_like(X)]), Y, rcond=None)
    dof = X.size - 2
    resid = Y - (slope * X + icpt)
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    se = np.sqrt(s2 / float(np.sum((X - X.mean()) ** 2)))
    return FitResult(float(slope), (float(slope - 2 * se), float(slope + 2 * se)), table)


def trend_slope(resolutions, values) -> float:
    """Least-squares slope of ``log(values)`` per doubling of the resolution."""
    n = np.log2(np.asarray(resolutions, dtype=float))
    v = np.log(np.asarray(values, dtype=float))
    if n.size < 2:
        raise ValueError("need at least two resolutions")
    return float(np.polyfit(n, v, 1)[0])
