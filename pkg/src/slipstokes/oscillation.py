"""Mean-oscillation seminorms of gridded fields.

Fields live on the cells of a :class:`~slipstokes.fields.CellGrid` as arrays of
shape ``(nx, ny)`` (scalars) or ``(nx, ny, 2, 2)`` (tensors). Oscillations of
tensors use the Frobenius norm of the deviation from the mean. A cube is a
block of cells ``[i0, i0 + kx) x [j0, j0 + ky)`` together with the physical
side of the full square it was cut from, so boundary cubes clipped by the
domain keep the diameter of the uncut square.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.integrate import quad

from .fields import CellGrid

__all__ = [
    "Weight",
    "CubeFamily",
    "BoundarySamples",
    "SeminormReport",
    "dyadic_family",
    "overlapping_family",
    "bottom_anchored_family",
    "boundary_centered_family",
    "cube_oscillations",
    "bmo_seminorm",
    "boundary_term",
    "overline_bmo",
    "local_star_seminorm",
    "diag_sharp",
    "telescope_check",
    "iteration_bound",
    "holder_via_campanato",
    "dini_psi",
    "flat_bottom_samples",
    "graph_bottom_samples",
]


# --------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class Weight:
    """Modulus ``omega`` for mean-oscillation spaces.

    Attributes:
        kind: ``"constant"``, ``"power"`` (``r^alpha``) or ``"logdini"``
            (``log(e/r)^(-gamma)``).
        alpha: Exponent of the power weight.
        gamma: Exponent of the logarithmic weight; Dini iff ``gamma > 1``.
    """

    kind: str = "constant"
    alpha: float = 0.5
    gamma: float = 2.0

    def __post_init__(self):
        if self.kind not in ("constant", "power", "logdini"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "power" and not 0 < self.alpha < 1:
            raise ValueError("power weight needs alpha in (0, 1)")
        if self.kind == "logdini" and not self.gamma > 0:
            raise ValueError("logarithmic weight needs gamma > 0")

    @classmethod
    def constant(cls) -> "Weight":
        return cls("constant")

    @classmethod
    def power(cls, alpha: float) -> "Weight":
        return cls("power", alpha=alpha)

    @classmethod
    def log_dini(cls, gamma: float = 2.0) -> "Weight":
        return cls("logdini", gamma=gamma)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "constant":
            return np.ones_like(r)
        if self.kind == "power":
            return r**self.alpha
        return np.log(math.e / r) ** (-self.gamma)

    @property
    def is_dini(self) -> bool:
        return self.kind == "power" or (self.kind == "logdini" and self.gamma > 1)

    def psi(self, r):
        """Closed-form ``int_r^1 omega(rho) / rho d rho``."""
        r = np.asarray(r, dtype=float)
        if np.any((r <= 0) | (r > 1)):
            raise ValueError("psi needs 0 < r <= 1")
        if self.kind == "constant":
            return np.log(1 / r)
        if self.kind == "power":
            return (1 - r**self.alpha) / self.alpha
        L = np.log(math.e / r)
        if self.gamma == 1:
            return np.log(L)
        return (L ** (1 - self.gamma) - 1) / (1 - self.gamma)

    def psi_quadrature(self, r: float, epsabs: float = 1e-13) -> float:
        """Adaptive quadrature of the Dini integral in the variable ``log rho``."""
        if not 0 < r <= 1:
            raise ValueError("psi needs 0 < r <= 1")
        val, _ = quad(lambda s: float(self(math.exp(s))), math.log(r), 0.0, epsabs=epsabs, epsrel=1e-13, limit=200)
        return val

    def almost_decrease_constant(self, beta: float, r_min: float = 1e-6, n: int = 400) -> float:
        """Smallest sampled ``c0`` with ``omega(r) r^-beta <= c0 omega(s) s^-beta`` for ``r > s``."""
        r = np.logspace(math.log10(r_min), 0, n)
        g = self(r) * r ** (-beta)
        # for increasing r the running minimum of earlier values bounds the ratio
        running_min = np.minimum.accumulate(g)
        return float(max(1.0, np.max(g / running_min)))


def dini_psi(w: Weight, r):
    return w.psi(r)


# --------------------------------------------------------------------------
# cube families


@dataclass(frozen=True)
class CubeFamily:
    """Finite family of (possibly clipped) cubes on a grid.

    Attributes:
        grid: The cell grid.
        blocks: Integer array ``(n, 4)`` of ``(i0, j0, kx, ky)``.
        sides: Physical side of the full cube of each block.
    """

    grid: CellGrid
    blocks: np.ndarray
    sides: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=int).reshape(-1, 4)
        s = np.asarray(self.sides, dtype=float).reshape(-1)
        if b.shape[0] != s.shape[0]:
            raise ValueError("blocks and sides differ in length")
        g = self.grid
        if b.size and (
            np.any(b[:, :2] < 0)
            or np.any(b[:, 2:] < 1)
            or np.any(b[:, 0] + b[:, 2] > g.nx)
            or np.any(b[:, 1] + b[:, 3] > g.ny)
        ):
            raise ValueError("block outside the grid")
        object.__setattr__(self, "blocks", b)
        object.__setattr__(self, "sides", s)

    def __len__(self):
        return self.blocks.shape[0]

    @property
    def diams(self):
        return self.sides * math.sqrt(2)

    def masked(self, min_fraction: float = 0.25) -> "CubeFamily":
        """Drop blocks whose masked part is below ``min_fraction`` of the full cube area."""
        g = self.grid
        counts = _block_sums(g.mask.astype(float), self.blocks)
        full_cells = (self.sides / g.dx) * (self.sides / g.dy)
        keep = (counts > 0) & (counts >= min_fraction * full_cells - 1e-9)
        return CubeFamily(g, self.blocks[keep], self.sides[keep])

    def union(self, other: "CubeFamily") -> "CubeFamily":
        return CubeFamily(self.grid, np.vstack([self.blocks, other.blocks]), np.concatenate([self.sides, other.sides]))


def _check_square_cells(grid):
    if not math.isclose(grid.dx, grid.dy, rel_tol=1e-12):
        raise ValueError("cube families need square cells")


def _sizes(limit, min_cells):
    k, out = 1, []
    while k <= limit:
        if k >= min_cells:
            out.append(k)
        k *= 2
    return out


def dyadic_family(grid: CellGrid, min_cells: int = 1, max_cells: int | None = None) -> CubeFamily:
    """Non-overlapping tilings by squares of ``2^l`` cells."""
    _check_square_cells(grid)
    top = min(grid.nx, grid.ny) if max_cells is None else max_cells
    blocks, sides = [], []
    for k in _sizes(top, min_cells):
        for i0 in range(0, grid.nx - k + 1, k):
            for j0 in range(0, grid.ny - k + 1, k):
                blocks.append((i0, j0, k, k))
                sides.append(k * grid.dx)
    return CubeFamily(grid, np.array(blocks, dtype=int).reshape(-1, 4), np.array(sides)).masked()


def overlapping_family(grid: CellGrid, min_cells: int = 2, max_cells: int | None = None) -> CubeFamily:
    """Squares of ``2^l`` cells placed with stride of half their side."""
    _check_square_cells(grid)
    top = min(grid.nx, grid.ny) if max_cells is None else max_cells
    blocks, sides = [], []
    for k in _sizes(top, min_cells):
        st = max(k // 2, 1)
        for i0 in range(0, grid.nx - k + 1, st):
            for j0 in range(0, grid.ny - k + 1, st):
                blocks.append((i0, j0, k, k))
                sides.append(k * grid.dx)
    return CubeFamily(grid, np.array(blocks, dtype=int).reshape(-1, 4), np.array(sides)).masked()


def bottom_anchored_family(grid: CellGrid, min_cells: int = 1) -> CubeFamily:
    """Squares ``[a, a + r] x [0, r]`` resting on the bottom row."""
    _check_square_cells(grid)
    blocks, sides = [], []
    for k in _sizes(min(grid.nx, grid.ny), min_cells):
        st = max(k // 2, 1)
        for i0 in range(0, grid.nx - k + 1, st):
            blocks.append((i0, 0, k, k))
            sides.append(k * grid.dx)
    return CubeFamily(grid, np.array(blocks, dtype=int).reshape(-1, 4), np.array(sides)).masked()


def boundary_centered_family(grid: CellGrid, min_cells: int = 1) -> CubeFamily:
    """Squares centred on bottom grid nodes, clipped to the grid.

    A square of half side ``k`` cells centred at bottom node ``i`` keeps the
    block ``[i - k, i + k) x [0, k)``; blocks hitting the lateral edges are
    dropped.
    """
    _check_square_cells(grid)
    blocks, sides = [], []
    for k in _sizes(min(grid.nx // 2, grid.ny), min_cells):
        st = max(k // 2, 1)
        for ic in range(k, grid.nx - k + 1, st):
            blocks.append((ic - k, 0, 2 * k, k))
            sides.append(2 * k * grid.dx)
    return CubeFamily(grid, np.array(blocks, dtype=int).reshape(-1, 4), np.array(sides)).masked()


# --------------------------------------------------------------------------
# evaluation


def _flat(f):
    f = np.asarray(f, dtype=float)
    if f.ndim == 2:
        return f[..., None]
    if f.ndim == 4:
        return f.reshape(f.shape[:2] + (4,))
    if f.ndim == 3:
        return f
    raise ValueError(f"unsupported field shape {f.shape}")


def _windows(a, kx, ky, blocks):
    # a: (nx, ny, c) -> (n, c, kx, ky)
    view = sliding_window_view(a, (kx, ky), axis=(0, 1))
    return view[blocks[:, 0], blocks[:, 1]]


def _block_sums(a, blocks):
    c = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
    c[1:, 1:] = np.cumsum(np.cumsum(a, 0), 1)
    i0, j0, kx, ky = blocks.T
    return c[i0 + kx, j0 + ky] - c[i0, j0 + ky] - c[i0 + kx, j0] + c[i0, j0]


def cube_oscillations(f, family: CubeFamily, center: str = "mean"):
    """Mean oscillation ``avg_{Q cap mask} |f - <f>_Q|`` for every block.

    Args:
        f: Scalar or tensor cell field.
        family: The cubes.
        center: ``"mean"`` subtracts the block mean; ``"diag"`` subtracts the
            diagonal part of the mean (tensor fields only).

    Returns:
        Array of oscillations in family order.
    """
    a = _flat(f)
    w = family.grid.mask.astype(float)[..., None]
    out = np.zeros(len(family))
    b = family.blocks
    for kx, ky in {(int(x), int(y)) for x, y in b[:, 2:]}:
        sel = np.flatnonzero((b[:, 2] == kx) & (b[:, 3] == ky))
        # process in chunks to bound memory
        for chunk in np.array_split(sel, max(1, sel.size * kx * ky // 2_000_000 + 1)):
            if chunk.size == 0:
                continue
            fw = _windows(a, kx, ky, b[chunk])
            ww = _windows(w, kx, ky, b[chunk])
            n = ww.sum(axis=(-2, -1))
            mean = (fw * ww).sum(axis=(-2, -1)) / n
            if center == "diag":
                if a.shape[-1] != 4:
                    raise ValueError("diagonal centring needs a tensor field")
                mean = mean * np.array([1.0, 0.0, 0.0, 1.0])
            elif center != "mean":
                raise ValueError(f"unknown centring {center!r}")
            dev = np.sqrt(np.sum((fw - mean[..., None, None]) ** 2, axis=1))
            out[chunk] = (dev * ww[:, 0]).sum(axis=(-2, -1)) / n[:, 0]
    return out


@dataclass
class SeminormReport:
    """Value of a seminorm and where the supremum was attained.

    Attributes:
        value: The reported seminorm.
        argmax: Description of the maximizing cube.
        table: Rows ``(x_lo, y_lo, width, height, side, osc, weighted)``.
        boundary_value: Boundary contribution, when computed.
        boundary_argmax: ``(x1, x2, r)`` maximizing the boundary term.
        parts: Named sub-values.
    """

    value: float
    argmax: dict = field(default_factory=dict)
    table: np.ndarray = field(default_factory=lambda: np.zeros((0, 7)))
    boundary_value: float | None = None
    boundary_argmax: tuple | None = None
    parts: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "value": self.value,
                "argmax": self.argmax,
                "boundary_value": self.boundary_value,
                "boundary_argmax": self.boundary_argmax,
                "parts": self.parts,
                "cubes": len(self.table),
            },
            sort_keys=True,
        )


def _report(family, osc, weighted):
    g = family.grid
    b = family.blocks
    table = np.column_stack(
        [g.x0 + b[:, 0] * g.dx, g.y0 + b[:, 1] * g.dy, b[:, 2] * g.dx, b[:, 3] * g.dy, family.sides, osc, weighted]
    )
    k = int(np.argmax(weighted))
    arg = {"x_lo": table[k, 0], "y_lo": table[k, 1], "width": table[k, 2], "height": table[k, 3], "side": table[k, 4]}
    return SeminormReport(float(weighted[k]), arg, table)


def bmo_seminorm(f, family: CubeFamily, w: Weight = Weight()) -> SeminormReport:
    """``sup_Q avg_Q |f - <f>_Q| / omega(diam Q)`` over the family."""
    if len(family) == 0:
        raise ValueError("empty cube family")
    osc = cube_oscillations(f, family)
    return _report(family, osc, osc / w(family.diams))


def holder_via_campanato(f, alpha: float, family: CubeFamily) -> float:
    """Campanato proxy for the ``C^alpha`` seminorm."""
    return bmo_seminorm(f, family, Weight.power(alpha)).value


@dataclass(frozen=True)
class BoundarySamples:
    """Boundary points with outward normals and tangents."""

    points: np.ndarray
    nu: np.ndarray
    tau: np.ndarray


def flat_bottom_samples(grid: CellGrid, stride: int = 1) -> BoundarySamples:
    """Bottom grid nodes of the grid with ``nu = (0, -1)`` and ``tau = (1, 0)``."""
    x = grid.x0 + np.arange(0, grid.nx + 1, stride) * grid.dx
    pts = np.stack([x, np.full_like(x, grid.y0)], -1)
    return BoundarySamples(pts, np.tile([0.0, -1.0], (x.size, 1)), np.tile([1.0, 0.0], (x.size, 1)))


def graph_bottom_samples(domain, x1) -> BoundarySamples:
    """Samples on a curved bottom ``x2 = h(x1)`` of a graph domain."""
    from .geometry import normal_tangent

    x1 = np.asarray(x1, dtype=float)
    nu, tau = normal_tangent(domain, x1)
    return BoundarySamples(np.stack([x1, domain.graph.h(x1)], -1), nu, tau)


def boundary_term(F, grid: CellGrid, w: Weight, samples: BoundarySamples, radii=None):
    """Boundary traction term of the overline-BMO norm.

    For each sample ``x`` and side ``r`` the masked cells whose centres lie in
    the square of side ``r`` centred at ``x`` are averaged:
    ``avg |[F(y) nu(x)] . tau(x)| / omega(r)``. The average is normalized by the
    masked area of the square.

    Returns:
        ``(value, (x1, x2, r))`` of the maximizer.
    """
    F = np.asarray(F, dtype=float)
    if radii is None:
        diam = math.hypot(grid.nx * grid.dx, grid.ny * grid.dy)
        radii = [k * grid.dx for k in _sizes(2 * max(grid.nx, grid.ny), 2) if k * grid.dx <= diam]
    c = grid.centers()
    xs = c[:, 0, 0]
    ys = c[0, :, 1]
    best, arg = 0.0, None
    for x, nu, tau in zip(samples.points, samples.nu, samples.tau):
        traction = np.abs(np.einsum("...ij,j,i->...", F, nu, tau))
        for r in radii:
            ii = np.flatnonzero(np.abs(xs - x[0]) < r / 2)
            jj = np.flatnonzero(np.abs(ys - x[1]) < r / 2)
            if ii.size == 0 or jj.size == 0:
                continue
            m = grid.mask[np.ix_(ii, jj)]
            if not m.any():
                continue
            val = float(traction[np.ix_(ii, jj)][m].mean() / w(r))
            if arg is None or val > best:
                best, arg = val, (float(x[0]), float(x[1]), float(r))
    return best, arg


def overline_bmo(F, family: CubeFamily, w: Weight, samples: BoundarySamples, radii=None) -> SeminormReport:
    """BMO part plus the boundary traction term."""
    rep = bmo_seminorm(F, family, w)
    bval, barg = boundary_term(F, family.grid, w, samples, radii)
    rep.parts = {"bmo": rep.value, "boundary": bval}
    rep.value = rep.value + bval
    rep.boundary_value, rep.boundary_argmax = bval, barg
    return rep


def local_star_seminorm(F, grid: CellGrid, w: Weight = Weight(), family: CubeFamily | None = None) -> SeminormReport:
    """Half-cube seminorm: BMO part and averages of ``|F12|`` on bottom-anchored squares.

    Args:
        F: Tensor field on a half-cube grid with row ``j = 0`` on the bottom.
        grid: The half-cube grid.
        w: Weight applied to cube diameters (BMO part) and square sides (``F12`` part).
        family: Cubes for the BMO part; overlapping dyadic squares by default.

    Returns:
        Report with ``value = max(bmo, star)``.
    """
    F = np.asarray(F, dtype=float)
    family = overlapping_family(grid) if family is None else family
    rep = bmo_seminorm(F, family, w)
    anchored = bottom_anchored_family(grid)
    F12 = np.abs(F[..., 0, 1])
    means = _block_sums(np.where(grid.mask, F12, 0.0), anchored.blocks) / _block_sums(
        grid.mask.astype(float), anchored.blocks
    )
    star_vals = means / w(anchored.sides)
    k = int(np.argmax(star_vals))
    star = float(star_vals[k])
    rep.parts = {"bmo": rep.value, "star": star}
    if star > rep.value:
        i0, j0, kx, ky = anchored.blocks[k]
        rep.argmax = {"x_lo": grid.x0 + i0 * grid.dx, "y_lo": grid.y0, "width": kx * grid.dx, "height": ky * grid.dy, "side": float(anchored.sides[k])}
    rep.value = max(rep.value, star)
    return rep


def diag_sharp(G, grid: CellGrid, w: Weight = Weight(), block=None) -> float:
    """Boundary sharp oscillation against the diagonal part of the mean.

    Args:
        G: Tensor field on a half-cube grid.
        grid: The grid.
        w: Weight applied to the full-cube diameter.
        block: Optional ``(i0, kx)``: a single bottom-centred block of width
            ``kx`` cells and height ``kx // 2``; otherwise the supremum over
            :func:`boundary_centered_family` is returned.
    """
    if block is None:
        fam = boundary_centered_family(grid)
    else:
        i0, kx = block
        fam = CubeFamily(grid, np.array([[i0, 0, kx, kx // 2]]), np.array([kx * grid.dx]))
    osc = cube_oscillations(G, fam, center="diag")
    return float(np.max(osc / w(fam.diams)))


def _concentric(n, k_sub, start):
    off = (n - k_sub) // 2
    return start + off


def telescope_check(g, grid: CellGrid, block, m: int, half: bool = False):
    """Both sides of the dyadic telescope estimate with constant 8.

    Args:
        g: Scalar or tensor field.
        grid: The grid.
        block: ``(i0, j0, k)``: the outer square of ``k`` cells.
        m: Number of halvings; ``k`` must be divisible by ``2^(m+1)``
            (``2^m`` when ``half``).
        half: Use bottom-anchored half cubes ``k x k/2`` instead of squares.

    Returns:
        ``(lhs, rhs)`` with ``lhs = |<|g|>_{2^-m Q} - <|g|>_Q|``.
    """
    i0, j0, k = block
    need = 2 ** (m + 1)
    if k % need:
        raise ValueError(f"outer cube of {k} cells cannot hold {m} concentric halvings")
    a = _flat(g)
    absg = np.sqrt(np.sum(a * a, axis=-1))
    rhs = 0.0
    means = []
    for i in range(m + 1):
        ks = k >> i
        ii = i0 + (k - ks) // 2
        if half:
            jj, ky = j0, ks // 2
        else:
            jj, ky = j0 + (k - ks) // 2, ks
        sub = a[ii : ii + ks, jj : jj + ky]
        means.append(absg[ii : ii + ks, jj : jj + ky].mean())
        if i < m:
            dev = np.sqrt(np.sum((sub - sub.mean(axis=(0, 1))) ** 2, axis=-1))
            rhs += dev.mean()
    return abs(means[-1] - means[0]), 8.0 * rhs


def iteration_bound(f, grid: CellGrid, block, m: int, w: Weight = Weight()):
    """Both sides of the weighted iteration bound on concentric half cubes.

    ``avg_{2^-m Q+} |f| <= 8 (sum_i omega(2^-i)) max_i osc_i / omega(2^-i) + <|f|>_{Q+}``
    with ``i = 0, ..., m-1`` and radii measured relative to the outer cube.
    """
    i0, j0, k = block
    if k % (2**m) or (k >> m) % 2:
        raise ValueError("outer half cube too small for the requested halvings")
    a = _flat(f)
    absf = np.sqrt(np.sum(a * a, axis=-1))
    osc = []
    for i in range(m + 1):
        ks = k >> i
        ii = i0 + (k - ks) // 2
        sub = a[ii : ii + ks, j0 : j0 + ks // 2]
        if i == m:
            lhs = float(absf[ii : ii + ks, j0 : j0 + ks // 2].mean())
        else:
            osc.append(float(np.sqrt(np.sum((sub - sub.mean(axis=(0, 1))) ** 2, axis=-1)).mean()))
    scales = w(2.0 ** -np.arange(m))
    outer = float(absf[i0 : i0 + k, j0 : j0 + k // 2].mean())
    rhs = 8.0 * float(np.sum(scales)) * float(np.max(np.array(osc) / scales)) + outer
    return lhs, rhs
