"""Cell-centred grids and the plain-text grid exchange format.

The CSV format has a two-line preamble ``nx,ny,dx,dy,x0,y0`` followed by the
values, then a header ``i,j,x,y,mask,<components>`` and one row per cell in
row-major order (``j`` outer, ``i`` inner).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

__all__ = ["CellGrid", "write_grid_csv", "read_grid_csv", "TENSOR_COMPONENTS", "VECTOR_COMPONENTS"]

TENSOR_COMPONENTS = ("F11", "F12", "F22")
VECTOR_COMPONENTS = ("u1", "u2")


@dataclass(frozen=True)
class CellGrid:
    """Uniform rectangular cell grid with an optional mask.

    Attributes:
        nx, ny: Cell counts.
        dx, dy: Cell sizes.
        x0, y0: Lower-left corner.
        mask: Boolean ``(nx, ny)`` array; all True when omitted.
    """

    nx: int
    ny: int
    dx: float
    dy: float
    x0: float = 0.0
    y0: float = 0.0
    mask: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1 or not (self.dx > 0 and self.dy > 0):
            raise ValueError("grid needs positive counts and sizes")
        m = np.ones((self.nx, self.ny), bool) if self.mask is None else np.asarray(self.mask, bool)
        if m.shape != (self.nx, self.ny):
            raise ValueError(f"mask shape {m.shape} != {(self.nx, self.ny)}")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @classmethod
    def half_cube(cls, n: int, R: float = 1.0) -> "CellGrid":
        """``n x n/2`` cells on ``(-R/2, R/2) x (0, R/2)``."""
        if n % 2:
            raise ValueError("half cube needs an even cell count")
        h = R / n
        return cls(n, n // 2, h, h, -R / 2, 0.0)

    @classmethod
    def unit_square(cls, n: int) -> "CellGrid":
        return cls(n, n, 1.0 / n, 1.0 / n)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def centers(self):
        x = self.x0 + (np.arange(self.nx) + 0.5) * self.dx
        y = self.y0 + (np.arange(self.ny) + 0.5) * self.dy
        X, Y = np.meshgrid(x, y, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def sample(self, f):
        """Evaluate ``f`` on the cell centres."""
        return np.asarray(f(self.centers()), dtype=float)


def _components(values):
    values = np.asarray(values, dtype=float)
    if values.ndim == 4:
        return TENSOR_COMPONENTS, np.stack([values[..., 0, 0], values[..., 0, 1], values[..., 1, 1]], -1)
    if values.ndim == 3 and values.shape[-1] == 2:
        return VECTOR_COMPONENTS, values
    if values.ndim == 2:
        return ("f",), values[..., None]
    if values.ndim == 3:
        return tuple(f"c{k}" for k in range(values.shape[-1])), values
    raise ValueError(f"unsupported field shape {values.shape}")


def write_grid_csv(path, grid: CellGrid, values, names=None) -> None:
    """Write a cell field in the grid CSV format; output is byte-deterministic."""
    default, flat = _components(values)
    names = tuple(names) if names is not None else default
    if flat.shape[:2] != (grid.nx, grid.ny) or flat.shape[-1] != len(names):
        raise ValueError("values do not match the grid")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["nx", "ny", "dx", "dy", "x0", "y0"])
    w.writerow([grid.nx, grid.ny, *(repr(float(v)) for v in (grid.dx, grid.dy, grid.x0, grid.y0))])
    w.writerow(["i", "j", "x", "y", "mask", *names])
    c = grid.centers()
    for j in range(grid.ny):
        for i in range(grid.nx):
            w.writerow(
                [i, j, repr(float(c[i, j, 0])), repr(float(c[i, j, 1])), int(grid.mask[i, j])]
                + [repr(float(v)) for v in flat[i, j]]
            )
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_grid_csv(path):
    """Read a grid CSV file.

    Returns:
        ``(grid, values, names)``; tensor files are returned as ``(nx, ny, 2, 2)``.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3 or rows[0] != ["nx", "ny", "dx", "dy", "x0", "y0"]:
        raise ValueError(f"{path}: missing grid preamble")
    nx, ny = int(rows[1][0]), int(rows[1][1])
    dx, dy, x0, y0 = (float(v) for v in rows[1][2:6])
    header = rows[2]
    names = tuple(header[5:])
    body = rows[3:]
    if len(body) != nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} rows, got {len(body)}")
    data = np.array([[float(v) for v in r] for r in body])
    idx_i, idx_j = data[:, 0].astype(int), data[:, 1].astype(int)
    mask = np.zeros((nx, ny), bool)
    mask[idx_i, idx_j] = data[:, 4] != 0
    vals = np.zeros((nx, ny, len(names)))
    vals[idx_i, idx_j] = data[:, 5:]
    grid = CellGrid(nx, ny, dx, dy, x0, y0, mask)
    if names == TENSOR_COMPONENTS:
        T = np.empty((nx, ny, 2, 2))
        T[..., 0, 0], T[..., 0, 1], T[..., 1, 1] = vals[..., 0], vals[..., 1], vals[..., 2]
        T[..., 1, 0] = T[..., 0, 1]
        return grid, T, names
    if names == ("f",):
        return grid, vals[..., 0], names
    return grid, vals, names
