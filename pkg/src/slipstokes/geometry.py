"""Graph domains, the flattening chart and the perfect-slip reflection.

Points are arrays with a trailing axis of length 2. Velocity fields passed as
callables map such arrays to arrays of the same shape; gradient callables
return ``(..., 2, 2)`` arrays with ``G[..., i, j] = d u_i / d x_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

__all__ = [
    "BoundaryGraph",
    "GraphDomain",
    "CornerDomain",
    "TiltedHalfPlane",
    "PulledBackVelocity",
    "ChartError",
    "SlipTraceError",
    "flatten",
    "unflatten",
    "h_matrices",
    "normal_tangent",
    "pullback_velocity",
    "pullback_gradient",
    "corrector",
    "transformed_sym_gradient",
    "reflect_velocity",
    "reflect_tensor",
    "reflect_tensor_cells",
    "half_cube_mean",
    "cube_mean",
]


class ChartError(ValueError):
    """A point lies outside the chart on which a map is defined."""


class SlipTraceError(ValueError):
    """A velocity field violates the impermeability condition on the bottom."""


def _sym(m):
    return 0.5 * (m + np.swapaxes(m, -1, -2))


@dataclass(frozen=True)
class BoundaryGraph:
    """Boundary ``x2 = h(x1)`` on ``[-R/2, R/2]`` in a normalized chart.

    Attributes:
        h, dh, ddh: Vectorized callables for the graph and its derivatives.
        R: Side length of the chart cube.
        regularity: Free-form tag such as ``"C^{1,1}"`` or ``"C^{2,0.5}"``.
        lipschitz: ``max |h'|`` sampled on the chart interval.
    """

    h: Callable
    dh: Callable
    ddh: Callable
    R: float = 1.0
    regularity: str = "C^{1,1}"
    lipschitz: float = field(default=float("nan"))

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("chart side R must be positive")
        if math.isnan(self.lipschitz):
            xs = np.linspace(-self.R / 2, self.R / 2, 2001)
            object.__setattr__(self, "lipschitz", float(np.max(np.abs(self.dh(xs)))))
        h0 = float(self.h(np.asarray(0.0)))
        d0 = float(self.dh(np.asarray(0.0)))
        if abs(h0) > 1e-12 or abs(d0) > 1e-12:
            raise ValueError(f"graph not normalized: h(0)={h0:g}, h'(0)={d0:g}")

    @classmethod
    def flat(cls, R: float = 1.0) -> "BoundaryGraph":
        zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
        return cls(zero, zero, zero, R, "C^{infty}", 0.0)

    @classmethod
    def polynomial(cls, coeffs, R: float = 1.0, regularity: str = "C^{infty}") -> "BoundaryGraph":
        """Graph ``h(x) = sum_k c_k x^k`` for ``k >= 2`` given ``coeffs = [c_2, c_3, ...]``."""
        poly = np.polynomial.Polynomial([0.0, 0.0, *coeffs])
        d1, d2 = poly.deriv(1), poly.deriv(2)
        return cls(
            lambda x: poly(np.asarray(x, dtype=float)),
            lambda x: d1(np.asarray(x, dtype=float)),
            lambda x: d2(np.asarray(x, dtype=float)),
            R,
            regularity,
        )

    @classmethod
    def from_samples(cls, x1, h, dh, ddh=None, R: float | None = None) -> "BoundaryGraph":
        """Interpolate a sampled graph and normalize it to ``h(0) = h'(0) = 0``.

        The samples are rotated and translated so the chart point above
        ``x1 = 0`` becomes the origin with a horizontal tangent; curvature is
        carried through the rotation when a second-derivative column is given.

        Args:
            x1: Strictly increasing abscissae containing 0 in their range.
            h: Graph values.
            dh: Slopes.
            ddh: Optional second derivatives.
            R: Chart side; defaults to the largest symmetric interval covered.

        Returns:
            The normalized graph.
        """
        x1, h, dh = (np.asarray(a, dtype=float) for a in (x1, h, dh))
        if x1.ndim != 1 or not (x1.shape == h.shape == dh.shape) or x1.size < 4:
            raise ValueError("graph table needs >= 4 rows of x1, h, h'")
        if np.any(np.diff(x1) <= 0):
            raise ValueError("x1 column must be strictly increasing")
        if not x1[0] < 0 < x1[-1]:
            raise ValueError("chart interval must contain 0 in its interior")
        base = CubicHermiteSpline(x1, h, dh)
        h0 = float(base(0.0))
        theta = math.atan(float(base.derivative()(0.0)))
        if ddh is not None:
            kappa = np.asarray(ddh, dtype=float) / (1 + dh**2) ** 1.5
        c, s = math.cos(theta), math.sin(theta)
        xr = c * x1 + s * (h - h0)
        hr = -s * x1 + c * (h - h0)
        dr = np.tan(np.arctan(dh) - theta)
        if np.any(np.diff(xr) <= 0):
            raise ValueError("graph is not a graph after normalization")
        spline = CubicHermiteSpline(xr, hr, dr)
        if ddh is not None:
            d2 = PchipInterpolator(xr, kappa * (1 + dr**2) ** 1.5)
        else:
            d2 = PchipInterpolator(xr, dr).derivative()
        d1 = spline.derivative()
        shift_h, shift_d = float(spline(0.0)), float(d1(0.0))
        half = min(-xr[0], xr[-1])
        R = 2 * half if R is None else float(R)
        if R / 2 > half + 1e-12:
            raise ValueError("requested chart exceeds the sampled interval")
        # the rotation already zeroes h(0), h'(0) up to interpolation roundoff
        return cls(
            lambda x: spline(np.asarray(x, dtype=float)) - shift_h,
            lambda x: d1(np.asarray(x, dtype=float)) - shift_d,
            lambda x: d2(np.asarray(x, dtype=float)),
            R,
            "sampled",
        )

    @classmethod
    def load(cls, path, R: float | None = None) -> "BoundaryGraph":
        """Read a whitespace table with columns ``x1 h h' [h'']``."""
        data = np.loadtxt(path, ndmin=2)
        if data.shape[1] not in (3, 4):
            raise ValueError(f"{path}: expected 3 or 4 columns, got {data.shape[1]}")
        ddh = data[:, 3] if data.shape[1] == 4 else None
        return cls.from_samples(data[:, 0], data[:, 1], data[:, 2], ddh, R)


@dataclass(frozen=True)
class GraphDomain:
    """Flat half-cube ``(-R/2, R/2) x (0, R/2)`` and its image under the chart."""

    graph: BoundaryGraph

    @property
    def R(self) -> float:
        return self.graph.R

    def in_half_cube(self, x, tol: float = 1e-12):
        x = np.asarray(x, dtype=float)
        r = self.R / 2 + tol
        return (np.abs(x[..., 0]) <= r) & (x[..., 1] >= -tol) & (x[..., 1] <= r)

    def inside(self, y, tol: float = 1e-12):
        """Membership of ``y`` in the image of the half-cube."""
        y = np.asarray(y, dtype=float)
        x2 = y[..., 1] - self.graph.h(np.clip(y[..., 0], -self.R / 2, self.R / 2))
        return (np.abs(y[..., 0]) <= self.R / 2 + tol) & (x2 >= -tol) & (x2 <= self.R / 2 + tol)

    def boundary_points(self, n: int, rng=None):
        """Points ``(x1, h(x1))`` on the curved boundary; uniform if ``rng`` is None."""
        if rng is None:
            x1 = np.linspace(-self.R / 2, self.R / 2, n)
        else:
            x1 = rng.uniform(-self.R / 2, self.R / 2, n)
        return np.stack([x1, self.graph.h(x1)], axis=-1)

    def sandwich(self, n: int = 2001) -> tuple[float, float]:
        """Empirical ``(lambda, Lambda)`` with ``Q_{lambda R} cap Omega`` inside the image inside ``Q_{Lambda R}``.

        Only the sampled lateral and top edges of the image are inspected, so
        the values are estimates on that sample.
        """
        R, g = self.R, self.graph
        s = np.linspace(-R / 2, R / 2, n)
        t = np.linspace(0, R / 2, n)
        top = np.stack([s, R / 2 + g.h(s)], -1)
        sides = [np.stack([np.full_like(t, e), t + g.h(np.asarray(e))], -1) for e in (-R / 2, R / 2)]
        inner = np.concatenate([top, *sides])
        lam = 2 * float(np.min(np.max(np.abs(inner), axis=-1))) / R
        outer = np.concatenate([inner, self.boundary_points(n)])
        Lam = 2 * float(np.max(np.max(np.abs(outer), axis=-1))) / R
        return lam, Lam


def flatten(domain: GraphDomain, x):
    """Chart map ``(x1, x2) -> (x1, x2 + h(x1))`` on the flat half-cube."""
    x = np.asarray(x, dtype=float)
    if not np.all(domain.in_half_cube(x)):
        raise ChartError("point outside the flat half-cube")
    return np.stack([x[..., 0], x[..., 1] + domain.graph.h(x[..., 0])], axis=-1)


def unflatten(domain: GraphDomain, y):
    """Inverse chart map ``(y1, y2) -> (y1, y2 - h(y1))``."""
    y = np.asarray(y, dtype=float)
    if not np.all(domain.inside(y)):
        raise ChartError("point outside the curved half-cube")
    return np.stack([y[..., 0], y[..., 1] - domain.graph.h(y[..., 0])], axis=-1)


def h_matrices(domain: GraphDomain, x, g=None):
    """Chart Jacobian factors at ``x``.

    Args:
        domain: The graph domain.
        x: Points of shape ``(..., 2)``.
        g: Optional values ``(..., 2)`` of a field at ``x``.

    Returns:
        ``(H, H_inv, H_g)``; ``H_g`` is zero when ``g`` is None.
    """
    x = np.asarray(x, dtype=float)
    d = domain.graph.dh(x[..., 0])
    H = np.zeros(x.shape[:-1] + (2, 2))
    H[..., 0, 0] = H[..., 1, 1] = 1.0
    Hinv = H.copy()
    H[..., 1, 0] = -d
    Hinv[..., 1, 0] = d
    Hg = np.zeros_like(H)
    if g is not None:
        Hg[..., 1, 0] = domain.graph.ddh(x[..., 0]) * np.asarray(g, dtype=float)[..., 0]
    return H, Hinv, Hg


def normal_tangent(domain: GraphDomain, x1):
    """Outward unit normal and unit tangent of the curved bottom at ``x1``."""
    d = np.asarray(domain.graph.dh(np.asarray(x1, dtype=float)), dtype=float)
    s = np.sqrt(1 + d * d)
    nu = np.stack([d / s, -1 / s], axis=-1)
    tau = np.stack([1 / s, d / s], axis=-1)
    return nu, tau


def _fd_divergence(u, x, step=1e-5):
    e1, e2 = np.array([step, 0.0]), np.array([0.0, step])
    return (u(x + e1)[..., 0] - u(x - e1)[..., 0] + u(x + e2)[..., 1] - u(x - e2)[..., 1]) / (2 * step)


def _gauss_square(lo, hi, n):
    t, w = np.polynomial.legendre.leggauss(n)
    pts, wts = [], []
    for a, b in zip(lo, hi):
        pts.append(0.5 * (a + b) + 0.5 * (b - a) * t)
        wts.append(0.5 * (b - a) * w)
    X1, X2 = np.meshgrid(pts[0], pts[1], indexing="ij")
    W = np.outer(wts[0], wts[1])
    return np.stack([X1, X2], -1), W


@dataclass(frozen=True)
class PulledBackVelocity:
    """Velocity transported to the flat half-cube with the first-component mean removed."""

    domain: GraphDomain
    u: Callable
    mean_u1: float
    grad_u: Callable | None = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        v = self.u(flatten(self.domain, x))
        d = self.domain.graph.dh(x[..., 0])
        w1 = v[..., 0] - self.mean_u1
        return np.stack([w1, v[..., 1] - d * w1], axis=-1)

    def gradient(self, x):
        """Exact chain-rule gradient; requires ``grad_u``."""
        if self.grad_u is None:
            raise ValueError("gradient needs the velocity gradient callable")
        x = np.asarray(x, dtype=float)
        y = flatten(self.domain, x)
        v, G = self.u(y), self.grad_u(y)
        return pullback_gradient(self.domain, x, v[..., 0] - self.mean_u1, G)


def pullback_gradient(domain: GraphDomain, x, w1, G):
    """Gradient of the pulled-back field from ``G = (grad_y u)(T x)`` and ``w1 = u1(Tx) - mean``."""
    d = domain.graph.dh(x[..., 0])
    dd = domain.graph.ddh(x[..., 0])
    out = np.empty_like(G)
    a1 = G[..., 0, 0] + d * G[..., 0, 1]
    out[..., 0, 0] = a1
    out[..., 0, 1] = G[..., 0, 1]
    out[..., 1, 0] = G[..., 1, 0] + d * G[..., 1, 1] - dd * w1 - d * a1
    out[..., 1, 1] = G[..., 1, 1] - d * G[..., 0, 1]
    return out


def pullback_velocity(
    domain: GraphDomain,
    u: Callable,
    half_side: float | None = None,
    grad_u: Callable | None = None,
    n_quad: int = 48,
    div_tol: float = 1e-6,
) -> PulledBackVelocity:
    """Pull a divergence-free velocity back to the flat sub-half-cube ``Q^+``.

    The mean of ``u1`` over the image of ``Q^+`` equals its mean over ``Q^+``
    after composing with the chart, since the chart preserves area.

    Args:
        domain: The graph domain.
        u: Velocity callable on the curved half-cube.
        half_side: ``Q^+ = (-s, s) x (0, s)``; defaults to ``R/2``.
        grad_u: Optional exact gradient callable of ``u``.
        n_quad: Gauss points per direction for the mean.
        div_tol: Allowed finite-difference divergence of ``u``.

    Returns:
        The pulled-back field.
    """
    s = domain.R / 2 if half_side is None else float(half_side)
    if not 0 < s <= domain.R / 2:
        raise ChartError("sub-half-cube must lie in the chart")
    pts, W = _gauss_square((-s, 0.0), (s, s), n_quad)
    y = flatten(domain, pts)
    lo = pts.copy()
    lo[..., 1] = np.clip(lo[..., 1], 1e-4, None)
    div = _fd_divergence(u, flatten(domain, lo), step=1e-5)
    if np.max(np.abs(div)) > div_tol:
        raise ValueError(f"velocity is not divergence free (max |div u| = {np.max(np.abs(div)):.3g})")
    mean = float(np.sum(u(y)[..., 0] * W) / (2 * s * s))
    return PulledBackVelocity(domain, u, mean, grad_u)


def corrector(domain: GraphDomain, mean_u1: float, x):
    """Divergence-free corrector and its gradient at ``x``.

    Returns:
        ``(g, grad_g)`` with ``g = (-h''(0) m x2, h'(x1) m)``.
    """
    x = np.asarray(x, dtype=float)
    g0 = domain.graph
    dd0 = float(g0.ddh(np.asarray(0.0)))
    g = np.stack([-dd0 * mean_u1 * x[..., 1], g0.dh(x[..., 0]) * mean_u1], axis=-1)
    G = np.zeros(x.shape[:-1] + (2, 2))
    G[..., 0, 1] = -dd0 * mean_u1
    G[..., 1, 0] = g0.ddh(x[..., 0]) * mean_u1
    return g, G


def transformed_sym_gradient(domain: GraphDomain, grad_ubar, ubar, x):
    """Symmetric part of ``H^{-1} grad(ubar) H + H_ubar`` at ``x``.

    For ``ubar`` the pulled-back field of ``u`` this is ``(D u)(T x)``.
    """
    H, Hinv, Hg = h_matrices(domain, x, ubar)
    M = Hinv @ np.asarray(grad_ubar, dtype=float) @ H + Hg
    return _sym(M)


def reflect_velocity(u: Callable, tol: float = 1e-9, samples: int = 257, half_width: float = 0.5):
    """Even/odd extension of a slip field across ``x2 = 0``.

    Args:
        u: Velocity callable on the upper half.
        tol: Allowed ``|u2|`` on the sampled bottom edge.
        samples: Number of bottom-edge samples checked.
        half_width: Bottom edge sampled on ``[-half_width, half_width]``.

    Returns:
        A callable defined on both halves.
    """
    xs = np.linspace(-half_width, half_width, samples)
    bottom = u(np.stack([xs, np.zeros_like(xs)], -1))
    if np.max(np.abs(bottom[..., 1])) > tol:
        raise SlipTraceError(f"normal trace {np.max(np.abs(bottom[..., 1])):.3g} exceeds {tol:g}")

    def tilde(x):
        x = np.asarray(x, dtype=float)
        lower = x[..., 1] < 0
        xm = x.copy()
        xm[..., 1] = np.abs(x[..., 1])
        v = np.array(u(xm), dtype=float)
        v[..., 1] = np.where(lower, -v[..., 1], v[..., 1])
        return v

    return tilde


def reflect_tensor(F: Callable):
    """Extension keeping the diagonal even and the off-diagonal odd in ``x2``."""

    def tilde(x):
        x = np.asarray(x, dtype=float)
        lower = x[..., 1] < 0
        xm = x.copy()
        xm[..., 1] = np.abs(x[..., 1])
        M = np.array(F(xm), dtype=float)
        sgn = np.where(lower, -1.0, 1.0)
        M[..., 0, 1] *= sgn
        M[..., 1, 0] *= sgn
        return M

    return tilde


def reflect_tensor_cells(F):
    """Cell-array version of :func:`reflect_tensor`.

    Args:
        F: Array ``(nx, ny, 2, 2)`` on the cells of the upper half, row ``j = 0``
            touching the bottom.

    Returns:
        Array ``(nx, 2 ny, 2, 2)`` on the full cube.
    """
    F = np.asarray(F, dtype=float)
    low = F[:, ::-1].copy()
    low[..., 0, 1] *= -1
    low[..., 1, 0] *= -1
    return np.concatenate([low, F], axis=1)


def cube_mean(F, lam: float):
    """Mean of a full-cube cell array over the concentric cube scaled by ``lam``."""
    nx, ny = F.shape[:2]
    kx, ky = _scaled_count(nx, lam), _scaled_count(ny, lam)
    i0, j0 = (nx - kx) // 2, (ny - ky) // 2
    return np.mean(F[i0 : i0 + kx, j0 : j0 + ky], axis=(0, 1))


def half_cube_mean(F, lam: float):
    """Mean of an upper-half cell array over the bottom-centred half-cube scaled by ``lam``."""
    nx, ny = F.shape[:2]
    kx, ky = _scaled_count(nx, lam), _scaled_count(ny, lam)
    i0 = (nx - kx) // 2
    return np.mean(F[i0 : i0 + kx, :ky], axis=(0, 1))


def _scaled_count(n, lam):
    k = lam * n
    if abs(k - round(k)) > 1e-9 or round(k) < 1 or (n - round(k)) % 2:
        raise ValueError(f"scale {lam} does not align with {n} cells")
    return int(round(k))


@dataclass(frozen=True)
class CornerDomain:
    """Sector ``{0 < theta < beta}`` with opening angle ``beta``."""

    beta: float

    def __post_init__(self):
        if not 0 < self.beta < math.pi:
            raise ValueError("opening angle must lie in (0, pi)")

    @property
    def lipschitz(self) -> float:
        # slope of the second ray seen from the first; tends to 0 as beta -> pi
        return abs(math.tan(math.pi - self.beta))

    def to_polar(self, x):
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        theta = np.mod(np.arctan2(x[..., 1], x[..., 0]), 2 * math.pi)
        return r, theta

    @staticmethod
    def from_polar(r, theta):
        r, theta = np.asarray(r, dtype=float), np.asarray(theta, dtype=float)
        return np.stack([r * np.cos(theta), r * np.sin(theta)], -1)

    def contains(self, x):
        r, theta = self.to_polar(x)
        return (r > 0) & (theta > 0) & (theta < self.beta)

    def ray_frames(self):
        """Outward normals and tangents of the rays ``theta = 0`` and ``theta = beta``."""
        b = self.beta
        return (
            (np.array([0.0, -1.0]), np.array([1.0, 0.0])),
            (np.array([-math.sin(b), math.cos(b)]), np.array([math.cos(b), math.sin(b)])),
        )


@dataclass(frozen=True)
class TiltedHalfPlane:
    """Domain ``x2 > -|x1|^{order + alpha}``."""

    alpha: float
    order: int = 2

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")

    @property
    def exponent(self) -> float:
        return self.order + self.alpha

    def h(self, x1):
        return -np.abs(np.asarray(x1, dtype=float)) ** self.exponent

    def dh(self, x1):
        x1 = np.asarray(x1, dtype=float)
        k = self.exponent
        return -k * np.sign(x1) * np.abs(x1) ** (k - 1)

    def ddh(self, x1):
        x1 = np.asarray(x1, dtype=float)
        k = self.exponent
        with np.errstate(divide="ignore"):
            return -k * (k - 1) * np.abs(x1) ** (k - 2)

    def contains(self, x, tol: float = 0.0):
        x = np.asarray(x, dtype=float)
        return x[..., 1] > self.h(x[..., 0]) - tol

    def graph(self, R: float = 2.0) -> BoundaryGraph:
        tag = f"C^{{{self.order},{self.alpha:g}}} tilted"
        return BoundaryGraph(self.h, self.dh, self.ddh, R, tag)
