"""Staggered grid, boundary data and the affine strain operators.

Layout on an ``nx x ny`` cell grid:

* ``u1`` on vertical faces, array ``(nx + 1, ny)``;
* ``u2`` on horizontal faces, array ``(nx, ny + 1)``;
* pressure and the diagonal strain on cells, ``(nx, ny)``;
* the off-diagonal strain on nodes, ``(nx + 1, ny + 1)``.

All face values are stacked into one vector ``z = [u1.ravel(), u2.ravel()]``.
Normal components on the boundary are fixed; tangential components beyond the
boundary are ghost values, either an even reflection (slip bottom) or
``2 g - interior`` (Dirichlet edges).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

__all__ = ["MACGrid", "Affine", "Forcing", "Operators", "build_operators", "VelocityArrays"]


@dataclass(frozen=True)
class MACGrid:
    """Staggered grid on ``(x0, x0 + nx dx) x (y0, y0 + ny dy)``.

    Attributes:
        nx, ny: Cell counts.
        dx, dy: Cell sizes.
        x0, y0: Lower-left corner.
        bottom: ``"slip"`` or ``"dirichlet"``; every other edge is Dirichlet.
    """

    nx: int
    ny: int
    dx: float
    dy: float
    x0: float = 0.0
    y0: float = 0.0
    bottom: str = "slip"

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 x 2 cells")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("cell sizes must be positive")
        if self.bottom not in ("slip", "dirichlet"):
            raise ValueError(f"unknown bottom condition {self.bottom!r}")

    @classmethod
    def half_cube(cls, n: int, R: float = 1.0, bottom: str = "slip") -> "MACGrid":
        """``n x n/2`` cells on ``(-R/2, R/2) x (0, R/2)``."""
        if n % 2:
            raise ValueError("half cube needs an even cell count")
        return cls(n, n // 2, R / n, R / n, -R / 2, 0.0, bottom)

    @classmethod
    def full_cube(cls, n: int, R: float = 1.0) -> "MACGrid":
        """``n x n`` cells on ``(-R/2, R/2)^2`` with Dirichlet data on every edge."""
        return cls(n, n, R / n, R / n, -R / 2, -R / 2, "dirichlet")

    @property
    def n1(self) -> int:
        return (self.nx + 1) * self.ny

    @property
    def n2(self) -> int:
        return self.nx * (self.ny + 1)

    @property
    def ncells(self) -> int:
        return self.nx * self.ny

    @property
    def nnodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def h(self) -> float:
        return float(np.sqrt(self.dx * self.dy))

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.nx * self.dx, self.ny * self.dy))

    def xs(self):
        """Node abscissae and cell-centre abscissae."""
        xn = self.x0 + np.arange(self.nx + 1) * self.dx
        return xn, 0.5 * (xn[1:] + xn[:-1])

    def ys(self):
        yn = self.y0 + np.arange(self.ny + 1) * self.dy
        return yn, 0.5 * (yn[1:] + yn[:-1])

    def u1_points(self):
        xn, _ = self.xs()
        _, yc = self.ys()
        X, Y = np.meshgrid(xn, yc, indexing="ij")
        return np.stack([X, Y], -1)

    def u2_points(self):
        _, xc = self.xs()
        yn, _ = self.ys()
        X, Y = np.meshgrid(xc, yn, indexing="ij")
        return np.stack([X, Y], -1)

    def cell_points(self):
        _, xc = self.xs()
        _, yc = self.ys()
        X, Y = np.meshgrid(xc, yc, indexing="ij")
        return np.stack([X, Y], -1)

    def node_points(self):
        xn, _ = self.xs()
        yn, _ = self.ys()
        X, Y = np.meshgrid(xn, yn, indexing="ij")
        return np.stack([X, Y], -1)

    def fixed_mask(self):
        """Boolean mask over ``z`` of the prescribed normal components."""
        f1 = np.zeros((self.nx + 1, self.ny), bool)
        f1[0] = f1[-1] = True
        f2 = np.zeros((self.nx, self.ny + 1), bool)
        f2[:, 0] = f2[:, -1] = True
        return np.concatenate([f1.ravel(), f2.ravel()])

    def split(self, z):
        z = np.asarray(z)
        return z[: self.n1].reshape(self.nx + 1, self.ny), z[self.n1 :].reshape(self.nx, self.ny + 1)

    def interpolate(self, u: Callable):
        """Face values ``z`` of a velocity callable."""
        a = np.asarray(u(self.u1_points()))[..., 0]
        b = np.asarray(u(self.u2_points()))[..., 1]
        return np.concatenate([a.ravel(), b.ravel()])


@dataclass
class VelocityArrays:
    u1: np.ndarray
    u2: np.ndarray


class Affine:
    """Affine map ``z -> M z + c``."""

    __slots__ = ("M", "c")

    def __init__(self, M, c):
        self.M = sp.csr_matrix(M)
        self.c = np.asarray(c, dtype=float)

    def __add__(self, other):
        return Affine(self.M + other.M, self.c + other.c)

    def __sub__(self, other):
        return Affine(self.M - other.M, self.c - other.c)

    def scale(self, d):
        """Row scaling by a vector or scalar."""
        d = np.asarray(d, dtype=float)
        if d.ndim == 0:
            return Affine(self.M * float(d), self.c * float(d))
        return Affine(sp.diags(d) @ self.M, d * self.c)

    def left(self, L):
        return Affine(sp.csr_matrix(L) @ self.M, L @ self.c)

    def __call__(self, z):
        return self.M @ z + self.c


def _coo(rows, cols, vals, shape):
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape
    )


@dataclass
class Forcing:
    """Forcing tensor sampled where the discrete strain lives.

    Attributes:
        F11, F22: Cell values.
        F12: Node values.
    """

    F11: np.ndarray
    F22: np.ndarray
    F12: np.ndarray

    @classmethod
    def zero(cls, grid: MACGrid) -> "Forcing":
        return cls(np.zeros((grid.nx, grid.ny)), np.zeros((grid.nx, grid.ny)), np.zeros((grid.nx + 1, grid.ny + 1)))

    @classmethod
    def from_callable(cls, grid: MACGrid, F: Callable, chart: Callable | None = None) -> "Forcing":
        """Sample ``F(x)`` (shape ``(..., 2, 2)``); ``chart`` maps grid points first."""
        tr = (lambda x: x) if chart is None else chart
        Fc = np.asarray(F(tr(grid.cell_points())), dtype=float)
        Fn = np.asarray(F(tr(grid.node_points())), dtype=float)
        return cls(Fc[..., 0, 0].copy(), Fc[..., 1, 1].copy(), 0.5 * (Fn[..., 0, 1] + Fn[..., 1, 0]))

    @classmethod
    def from_cells(cls, grid: MACGrid, Fc) -> "Forcing":
        """Cell-tensor data; the off-diagonal entry is averaged onto nodes from the adjacent cells."""
        Fc = np.asarray(Fc, dtype=float)
        if Fc.shape != (grid.nx, grid.ny, 2, 2):
            raise ValueError(f"forcing shape {Fc.shape} does not match the grid")
        off = 0.5 * (Fc[..., 0, 1] + Fc[..., 1, 0])
        return cls(Fc[..., 0, 0].copy(), Fc[..., 1, 1].copy(), _node_average(off))

    def scaled(self, lam: float) -> "Forcing":
        return Forcing(lam * self.F11, lam * self.F22, lam * self.F12)

    @property
    def sup(self) -> float:
        return float(max(np.abs(self.F11).max(), np.abs(self.F22).max(), np.sqrt(2) * np.abs(self.F12).max()))


def _node_average(c):
    nx, ny = c.shape
    s = np.zeros((nx + 1, ny + 1))
    n = np.zeros((nx + 1, ny + 1))
    for a in (0, 1):
        for b in (0, 1):
            s[a : a + nx, b : b + ny] += c
            n[a : a + nx, b : b + ny] += 1
    return s / n


@dataclass
class Operators:
    """Affine strain, divergence and averaging operators on the free unknowns.

    Attributes:
        D11, D22: Cell maps ``x -> B x + d``.
        D12: Node map.
        div: Flat divergence on cells.
        A: Cell-from-node averaging ``(ncells, nnodes)``.
        w: Node quadrature weights (``A^T 1``).
        free: Indices of free entries of ``z``.
        z_fixed: Full ``z`` holding the prescribed values and zeros elsewhere.
    """

    grid: MACGrid
    D11: Affine
    D22: Affine
    D12: Affine
    div: Affine
    A: sp.csr_matrix
    w: np.ndarray
    free: np.ndarray
    z_fixed: np.ndarray
    full: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def expand(self, x):
        z = self.z_fixed.copy()
        z[self.free] = x
        return z

    def restrict(self, z):
        return np.asarray(z)[self.free]

    def strain_of_faces(self, z):
        """Strain pieces ``(D11, D22, D12)`` of a full face vector."""
        f = self.full
        return f["D11"](z), f["D22"](z), f["D12"](z)


def _boundary_values(grid: MACGrid, g: Callable | None):
    """Prescribed normal components and ghost data of the tangential ones."""
    nx, ny = grid.nx, grid.ny
    z = np.zeros(grid.n1 + grid.n2)
    xn, _ = grid.xs()
    yn, _ = grid.ys()
    if g is None:
        zero = np.zeros
        return z, {"bottom": zero(nx + 1), "top": zero(nx + 1), "left": zero(ny + 1), "right": zero(ny + 1)}
    U1 = np.asarray(g(grid.u1_points()))[..., 0]
    U2 = np.asarray(g(grid.u2_points()))[..., 1]
    u1 = np.zeros((nx + 1, ny))
    u2 = np.zeros((nx, ny + 1))
    u1[0], u1[-1] = U1[0], U1[-1]
    u2[:, -1] = U2[:, -1]
    if grid.bottom == "dirichlet":
        u2[:, 0] = U2[:, 0]
    z[: grid.n1] = u1.ravel()
    z[grid.n1 :] = u2.ravel()

    def at(pts, comp):
        return np.asarray(g(pts))[..., comp]

    yb, yt = grid.y0, grid.y0 + ny * grid.dy
    xl, xr = grid.x0, grid.x0 + nx * grid.dx
    ghosts = {
        "bottom": at(np.stack([xn, np.full_like(xn, yb)], -1), 0),
        "top": at(np.stack([xn, np.full_like(xn, yt)], -1), 0),
        "left": at(np.stack([np.full_like(yn, xl), yn], -1), 1),
        "right": at(np.stack([np.full_like(yn, xr), yn], -1), 1),
    }
    return z, ghosts


def correct_flux(grid: MACGrid, z):
    """Remove the net discrete boundary flux from the Dirichlet normal data.

    The correction is a uniform outward normal velocity on the Dirichlet
    edges other than a slip bottom.

    Returns:
        ``(z_corrected, correction)``.
    """
    u1, u2 = grid.split(z.copy())
    flux = (u1[-1].sum() - u1[0].sum()) * grid.dy + (u2[:, -1].sum() - u2[:, 0].sum()) * grid.dx
    length = 2 * grid.ny * grid.dy + grid.nx * grid.dx * (2 if grid.bottom == "dirichlet" else 1)
    c = flux / length
    u1[-1] -= c
    u1[0] += c
    u2[:, -1] -= c
    if grid.bottom == "dirichlet":
        u2[:, 0] += c
    return np.concatenate([u1.ravel(), u2.ravel()]), c


def _strain_full(grid: MACGrid, ghosts):
    """Full-vector affine maps for the flat strain pieces."""
    nx, ny = grid.nx, grid.ny
    N = grid.n1 + grid.n2
    dx, dy = grid.dx, grid.dy
    id1 = np.arange(grid.n1).reshape(nx + 1, ny)
    id2 = grid.n1 + np.arange(grid.n2).reshape(nx, ny + 1)
    ic, jc = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    cell = (ic * ny + jc).ravel()
    ones = np.ones(cell.size)
    D11 = _coo([cell, cell], [id1[1:, :].ravel(), id1[:-1, :].ravel()], [ones / dx, -ones / dx], (grid.ncells, N))
    D22 = _coo([cell, cell], [id2[:, 1:].ravel(), id2[:, :-1].ravel()], [ones / dy, -ones / dy], (grid.ncells, N))
    zc = np.zeros(grid.ncells)

    I, J = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    node = (I * (ny + 1) + J).ravel()
    I, J = I.ravel(), J.ravel()

    def u1_term(jj, coef):
        """Contribution of ``U1(i, jj)`` with ghosts outside ``0 <= jj < ny``."""
        rows, cols, vals = [], [], []
        const = np.zeros(grid.nnodes)
        inside = (jj >= 0) & (jj < ny)
        rows.append(node[inside])
        cols.append(id1[I[inside], jj[inside]])
        vals.append(np.full(inside.sum(), coef))
        lo = jj < 0
        if grid.bottom == "slip":
            rows.append(node[lo])
            cols.append(id1[I[lo], 0])
            vals.append(np.full(lo.sum(), coef))
        else:
            rows.append(node[lo])
            cols.append(id1[I[lo], 0])
            vals.append(np.full(lo.sum(), -coef))
            const[node[lo]] += 2 * coef * ghosts["bottom"][I[lo]]
        hi = jj >= ny
        rows.append(node[hi])
        cols.append(id1[I[hi], ny - 1])
        vals.append(np.full(hi.sum(), -coef))
        const[node[hi]] += 2 * coef * ghosts["top"][I[hi]]
        return rows, cols, vals, const

    def u2_term(ii, coef):
        rows, cols, vals = [], [], []
        const = np.zeros(grid.nnodes)
        inside = (ii >= 0) & (ii < nx)
        rows.append(node[inside])
        cols.append(id2[ii[inside], J[inside]])
        vals.append(np.full(inside.sum(), coef))
        for mask, edge, col in ((ii < 0, "left", 0), (ii >= nx, "right", nx - 1)):
            rows.append(node[mask])
            cols.append(id2[col, J[mask]])
            vals.append(np.full(mask.sum(), -coef))
            const[node[mask]] += 2 * coef * ghosts[edge][J[mask]]
        return rows, cols, vals, const

    def combine(*terms):
        rows, cols, vals, const = [], [], [], np.zeros(grid.nnodes)
        for r, c, v, k in terms:
            rows += r
            cols += c
            vals += v
            const += k
        return Affine(_coo(rows, cols, vals, (grid.nnodes, N)), const)

    d2u1 = combine(u1_term(J, 1 / dy), u1_term(J - 1, -1 / dy))
    d1u2 = combine(u2_term(I, 1 / dx), u2_term(I - 1, -1 / dx))
    u1n = combine(u1_term(J, 0.5), u1_term(J - 1, 0.5))
    return Affine(D11, zc), Affine(D22, zc), d2u1, d1u2, u1n


def _averaging(grid: MACGrid):
    nx, ny = grid.nx, grid.ny
    ic, jc = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    cell = (ic * ny + jc).ravel()
    rows, cols = [], []
    for a in (0, 1):
        for b in (0, 1):
            rows.append(cell)
            cols.append(((ic + a) * (ny + 1) + jc + b).ravel())
    A = sp.csr_matrix(
        (np.full(4 * cell.size, 0.25), (np.concatenate(rows), np.concatenate(cols))), shape=(grid.ncells, grid.nnodes)
    )
    counts = np.asarray((A.T @ np.ones(grid.ncells))).ravel() * 4
    M = sp.diags(1.0 / counts) @ (A.T * 4)
    return A, sp.csr_matrix(M)


def build_operators(grid: MACGrid, g: Callable | None = None, graph=None, fix_flux: bool = True) -> Operators:
    """Assemble the affine operators for a problem.

    Args:
        grid: The staggered grid.
        g: Dirichlet data callable; zero data when None.
        graph: Optional boundary graph; adds the chart terms of the
            transformed strain for the pulled-back unknown.
        fix_flux: Shift the normal data so that the net boundary flux is zero.

    Returns:
        The operators restricted to the free unknowns.
    """
    z_fixed, ghosts = _boundary_values(grid, g)
    correction = 0.0
    if fix_flux:
        z_fixed, correction = correct_flux(grid, z_fixed)
    D11, D22, d2u1, d1u2, u1n = _strain_full(grid, ghosts)
    D12 = (d2u1 + d1u2).scale(0.5)
    div = D11 + D22
    A, Mavg = _averaging(grid)
    if graph is not None:
        _, xc = grid.xs()
        xn, _ = grid.xs()
        dc = np.repeat(np.asarray(graph.dh(xc), dtype=float), grid.ny)
        dn = np.repeat(np.asarray(graph.dh(xn), dtype=float), grid.ny + 1)
        ddn = np.repeat(np.asarray(graph.ddh(xn), dtype=float), grid.ny + 1)
        g12c = d2u1.left(A)
        corr12 = ((D11 - D22).left(Mavg).scale(dn) - d2u1.scale(dn * dn) + u1n.scale(ddn)).scale(0.5)
        D11, D22, D12 = D11 - g12c.scale(dc), D22 + g12c.scale(dc), D12 + corr12
    fixed = grid.fixed_mask()
    free = np.flatnonzero(~fixed)

    def restrict(op: Affine) -> Affine:
        M = op.M.tocsc()
        return Affine(M[:, free], op.c + M @ z_fixed)

    w = np.asarray(A.T @ np.ones(grid.ncells)).ravel()
    return Operators(
        grid,
        restrict(D11),
        restrict(D22),
        restrict(D12),
        restrict(div),
        A,
        w,
        free,
        z_fixed,
        {"D11": D11, "D22": D22, "D12": D12, "div": div, "d2u1": d2u1, "d1u2": d1u2},
        {"flux_correction": correction},
    )
