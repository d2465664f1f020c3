"""Stream-function flow in a corner and its gradient integrability threshold."""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass

import numpy as np

from ..geometry import CornerDomain
from .fitting import FitResult, fit_exponent

__all__ = [
    "corner_exact",
    "corner_velocity",
    "corner_gradient",
    "lq_threshold",
    "lq_norm_corner",
    "lq_norm_exact",
    "blowup_exponent",
    "CornerSequence",
    "corner_sequence",
    "boundary_samples",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _check(beta, r):
    if not 0 < beta < math.pi:
        raise ValueError("opening angle must lie in (0, pi)")
    if np.any(np.asarray(r) <= 0):
        raise ValueError("the corner point r = 0 is excluded")


def _angle(beta, x):
    # branch cut on the ray opposite to the bisector, so both walls are interior to the chart
    x = np.asarray(x, dtype=float)
    c, s = math.cos(beta / 2), math.sin(beta / 2)
    xr = c * x[..., 0] + s * x[..., 1]
    yr = -s * x[..., 0] + c * x[..., 1]
    return beta / 2 + np.arctan2(yr, xr)


def corner_exact(beta: float, r, theta):
    """Velocity and gradient of ``w = r^lam sin(lam theta)``, ``lam = pi / beta``.

    ``u = (-d2 w, d1 w) = lam r^(lam-1) (-cos((lam-1) theta), sin((lam-1) theta))``.

    Args:
        beta: Opening angle in ``(0, pi)``.
        r: Radii, strictly positive.
        theta: Angles, broadcast against ``r``.

    Returns:
        ``(u, G)`` with shapes ``(..., 2)`` and ``(..., 2, 2)``.
    """
    _check(beta, r)
    r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
    lam = math.pi / beta
    m = lam - 1
    u = lam * r[..., None] ** m * np.stack([-np.cos(m * theta), np.sin(m * theta)], -1)
    # f'' of f(z) = z^lam gives the Cauchy-Riemann gradient pattern
    mag = lam * m * r ** (m - 1)
    re, im = mag * np.cos((m - 1) * theta), mag * np.sin((m - 1) * theta)
    G = np.empty(r.shape + (2, 2))
    G[..., 0, 0] = -re
    G[..., 0, 1] = im
    G[..., 1, 0] = im
    G[..., 1, 1] = re
    return u, G


def corner_velocity(beta: float):
    """Cartesian velocity callable of :func:`corner_exact`."""

    def u(x):
        x = np.asarray(x, dtype=float)
        return corner_exact(beta, np.hypot(x[..., 0], x[..., 1]), _angle(beta, x))[0]

    return u


def corner_gradient(beta: float):
    def G(x):
        x = np.asarray(x, dtype=float)
        return corner_exact(beta, np.hypot(x[..., 0], x[..., 1]), _angle(beta, x))[1]

    return G


def lq_threshold(beta: float) -> float:
    """Largest ``q`` with ``grad u`` in ``L^q`` near the corner; ``inf`` for ``beta <= pi/2``."""
    if not 0 < beta < math.pi:
        raise ValueError("opening angle must lie in (0, pi)")
    x = beta / math.pi
    if x <= 0.5:
        return math.inf
    # angles that are rational multiples of pi within roundoff get exact arithmetic
    r = Fraction(x).limit_denominator(1000)
    if abs(float(r) - x) <= 4 * math.ulp(x):
        return float(2 * r / (2 * r - 1))
    return 2 * x / (2 * x - 1)


def blowup_exponent(beta: float, q: float) -> float:
    """Exponent ``e`` with ``int_{r_min}^1 |grad u|^q ~ r_min^e`` (divergent when ``e < 0``)."""
    return q * math.pi / beta - 2 * q + 2


def _panel(beta, q, a, b):
    # tensor Gauss rule on [a, b] x [0, beta] in polar coordinates
    r = 0.5 * (b - a) * _GL_X + 0.5 * (b + a)
    wr = 0.5 * (b - a) * _GL_W
    th = 0.5 * beta * (_GL_X + 1)
    wt = 0.5 * beta * _GL_W
    R, T = np.meshgrid(r, th, indexing="ij")
    _, G = corner_exact(beta, R, T)
    g = np.sqrt(np.sum(G * G, axis=(-1, -2)))
    return float(np.einsum("i,j,ij->", wr, wt, g**q * R))


def lq_norm_corner(beta: float, q: float, r_min: float) -> float:
    """``int |grad u|^q`` over ``{r_min < r < 1, 0 < theta < beta}`` by polar quadrature.

    Dyadic radial panels keep the rule accurate for any power of ``r``.
    """
    if not 0 < r_min < 1:
        raise ValueError("r_min must lie in (0, 1)")
    _check(beta, r_min)
    total, b = 0.0, 1.0
    while b > r_min:
        a = max(b / 2, r_min)
        total += _panel(beta, q, a, b)
        b = a
    return total


def lq_norm_exact(beta: float, q: float, r_min: float) -> float:
    """Closed form of :func:`lq_norm_corner`; ``|grad u|`` depends on ``r`` only."""
    lam = math.pi / beta
    c = math.sqrt(2) * lam * abs(lam - 1)
    e = blowup_exponent(beta, q)
    if c == 0:
        return 0.0
    radial = -math.log(r_min) if abs(e) < 1e-14 else (1 - r_min**e) / e
    return beta * c**q * radial


@dataclass
class CornerSequence:
    """Values of :func:`lq_norm_corner` along ``r_min = 2^-k``.

    Attributes:
        r_min: Radii.
        values: Integrals.
        increments: ``values[k] - values[k-1]`` against ``r_min[k]``.
        fit: Exponent fit of the increments.
        converges: Increments decay geometrically (band above 0).
        limit: Values plus the geometric tail estimate (``inf`` when divergent).
    """

    beta: float
    q: float
    r_min: np.ndarray
    values: np.ndarray
    increments: np.ndarray
    fit: FitResult
    converges: bool
    limit: np.ndarray
    bounded: bool = False


def corner_sequence(beta: float, q: float, levels: int = 40) -> CornerSequence:
    """Halving sequence of :func:`lq_norm_corner` with an increment-exponent fit."""
    r = 2.0 ** -np.arange(1, levels + 1)
    vals = np.array([lq_norm_corner(beta, q, ri) for ri in r])
    inc = np.diff(vals)
    if np.all(np.abs(inc) <= 1e-13 * max(1.0, abs(vals[-1]))):
        fit = FitResult(None, (math.nan, math.nan), np.column_stack([r[1:], inc]), "smooth")
        return CornerSequence(beta, q, r, vals, inc, fit, True, vals.copy(), True)
    fit = fit_exponent(r[1:], inc)
    converges = fit.band[0] > 0
    if converges:
        ratio = 2.0 ** -fit.exponent
        limit = np.concatenate([[np.nan], vals[1:] + inc * ratio / (1 - ratio)])
    else:
        limit = np.full_like(vals, math.inf)
    return CornerSequence(beta, q, r, vals, inc, fit, converges, limit)


def boundary_samples(beta: float, n: int = 1000, r_range=(0.25, 1.0), rng=None):
    """Points spread over both walls with their outward normals and tangents.

    Returns:
        ``(points, normals, tangents)``, each ``(n, 2)``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    r = rng.uniform(*r_range, n)
    wall = np.arange(n) % 2
    theta = np.where(wall == 0, 0.0, beta)
    pts = CornerDomain.from_polar(r, theta)
    (nu0, t0), (nu1, t1) = CornerDomain(beta).ray_frames()
    nu = np.where(wall[:, None] == 0, nu0, nu1)
    tau = np.where(wall[:, None] == 0, t0, t1)
    return pts, nu, tau
