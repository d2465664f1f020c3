"""Harmonic function above a tilted boundary and the exponent of its boundary derivative.

The domain ``{h(x1) < x2 < h(x1) + 1, |x1| < 1}`` with ``h = -|x1|^(order + alpha)``
is flattened to the rectangle ``(-1, 1) x (0, 1)`` by ``xi = (x1, x2 - h(x1))``.
The Laplacian becomes ``div(A grad w)`` with ``A = [[1, -h'], [-h', 1 + h'^2]]``
(the chart has unit Jacobian), discretized by P1 elements on a structured
triangulation.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..geometry import TiltedHalfPlane
from .fitting import FitResult, fit_exponent

__all__ = ["TiltedSolution", "solve_tilted", "tilted_sharpness", "MeshQualityError"]


class MeshQualityError(RuntimeError):
    """The boundary-fitted coefficients degenerate near the cusp."""


class TiltedSolution:
    """Nodal values on the chart plus boundary-derivative samples."""

    def __init__(self, xi1, xi2, w, dh):
        self.xi1, self.xi2, self.w = xi1, xi2, w
        d = xi2[1] - xi2[0]
        # one-sided second-order normal derivative in the chart
        self.dw_dxi2 = (-3 * w[:, 0] + 4 * w[:, 1] - w[:, 2]) / (2 * d)
        self.dh = dh(xi1)
        # w = 0 along the boundary, so the tangential chart derivative vanishes
        self.d1w = -self.dh * self.dw_dxi2
        self.grad_norm = np.abs(self.dw_dxi2) * np.sqrt(1 + self.dh**2)


def solve_tilted(h, dh, n: int) -> TiltedSolution:
    """P1 solve on an ``n x n/2`` square-cell chart grid.

    Args:
        h: Boundary function (only ``dh`` enters the coefficients).
        dh: Its derivative.
        n: Cells across ``(-1, 1)``; even.

    Returns:
        The discrete solution with ``w = 0`` at the bottom, ``1`` at the top and
        ``xi2`` on the sides.
    """
    if n % 2 or n < 4:
        raise ValueError("need an even cell count of at least 4")
    m = n // 2
    xi1 = np.linspace(-1, 1, n + 1)
    xi2 = np.linspace(0, 1, m + 1)
    d = 2.0 / n
    node = np.arange((n + 1) * (m + 1)).reshape(n + 1, m + 1)
    I, J = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
    I, J = I.ravel(), J.ravel()
    a, b, c, e = node[I, J], node[I + 1, J], node[I + 1, J + 1], node[I, J + 1]
    tris = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, e], 1)])
    X1 = np.repeat(xi1[:, None], m + 1, 1).ravel()
    X2 = np.repeat(xi2[None, :], n + 1, 0).ravel()
    P = np.stack([X1[tris], X2[tris]], -1)  # (T, 3, 2)
    cx = P[..., 0].mean(1)
    s = np.asarray(dh(cx), float)
    if not np.all(np.isfinite(s)):
        raise MeshQualityError("non-finite boundary slope at an element centroid")
    A = np.empty((cx.size, 2, 2))
    A[:, 0, 0], A[:, 0, 1], A[:, 1, 0], A[:, 1, 1] = 1.0, -s, -s, 1 + s * s
    E = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]], 1)  # edge matrix rows
    det = E[:, 0, 0] * E[:, 1, 1] - E[:, 0, 1] * E[:, 1, 0]
    if np.any(np.abs(det) < 1e-14 * d * d):
        raise MeshQualityError("degenerate element")
    Einv = np.linalg.inv(E)
    # barycentric gradients: columns of Einv give grads of lambda_1, lambda_2
    G = np.empty((cx.size, 2, 3))
    G[:, :, 1:] = Einv
    G[:, :, 0] = -Einv.sum(-1)
    Ke = 0.5 * np.abs(det)[:, None, None] * np.einsum("tki,tkl,tlj->tij", G, A, G)
    rows = np.repeat(tris, 3, 1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    K = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(X1.size,) * 2)
    fixed = np.zeros(X1.size, bool)
    val = np.zeros(X1.size)
    for idx in (node[:, 0], node[:, -1], node[0], node[-1]):
        fixed[idx] = True
    val[node[0]] = xi2
    val[node[-1]] = xi2
    val[node[:, -1]] = 1.0
    val[node[:, 0]] = 0.0
    free = ~fixed
    rhs = -K[free][:, fixed] @ val[fixed]
    w = val.copy()
    w[free] = spla.spsolve(K[free][:, free].tocsc(), rhs)
    return TiltedSolution(xi1, xi2, w.reshape(n + 1, m + 1), dh)


def _sample_indices(n, lo_cells=4, hi=0.5, count=16):
    k = np.unique(np.round(np.geomspace(lo_cells, hi * n / 2, count)).astype(int))
    return n // 2 + k


def tilted_sharpness(alpha: float, order: int = 2, grid: int = 128, flat: bool = False, samples: int = 16) -> FitResult:
    """Fitted Hoelder exponent of the ``order``-th boundary derivative.

    The increment ``|d1 w(x1, h(x1)) - d1 w(0, 0)|`` is fitted against
    ``|x1|`` on geometrically spaced boundary nodes; the reported exponent is
    the fitted slope minus ``order - 1``.

    Args:
        alpha: Hoelder exponent of the boundary, in ``(0, 1)``.
        order: 1 or 2.
        grid: Chart cells across ``(-1, 1)``.
        flat: Replace the boundary by ``h = 0``.
        samples: Requested number of boundary samples.

    Returns:
        Fit with ``extra["hopf_min"]`` (min boundary ``|grad w|``) and the
        shift applied; the ``"smooth"`` sentinel for a flat boundary.
    """
    if flat:
        h = lambda x: np.zeros_like(np.asarray(x, float))  # noqa: E731
        dh = h
    else:
        dom = TiltedHalfPlane(alpha, order)
        h, dh = dom.h, dom.dh
    sol = solve_tilted(h, dh, grid)
    idx = _sample_indices(grid, count=samples)
    x1 = sol.xi1[idx]
    incr = sol.d1w[idx] - sol.d1w[grid // 2]
    shift = order - 1
    raw = fit_exponent(x1, incr, zero_tol=1e-10)
    hopf = float(np.min(sol.grad_norm[1:-1]))
    extra = {"hopf_min": hopf, "shift": shift, "grid": grid, "alpha": alpha, "order": order}
    if raw.sentinel:
        raw.extra = extra
        return raw
    e = raw.exponent - shift
    return FitResult(e, (raw.band[0] - shift, raw.band[1] - shift), raw.table, None, extra)
