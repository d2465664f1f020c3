"""Error metrics, pressure recovery and the discrete Korn constant."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..orlicz import NFunction, frob, v_map
from .core import DiscreteState, NonConvergence, Problem, _gradient, _regularized
from .discretization import MACGrid

__all__ = [
    "v_distance",
    "pressure_from_poisson",
    "korn_constant",
    "korn_operators",
    "cell_velocity",
    "cell_gradient",
]


def cell_velocity(state: DiscreteState) -> np.ndarray:
    """Face velocities averaged to cell centres, shape ``(nx, ny, 2)``."""
    u1 = 0.5 * (state.u1[1:] + state.u1[:-1])
    u2 = 0.5 * (state.u2[:, 1:] + state.u2[:, :-1])
    return np.stack([u1, u2], -1)


def cell_gradient(problem: Problem, state: DiscreteState) -> np.ndarray:
    """Full discrete velocity gradient on cells (flat chart), ``G[..., i, j] = d_j u_i``."""
    g = problem.grid
    f = problem.ops.full
    z = np.concatenate([state.u1.ravel(), state.u2.ravel()])
    A = problem.ops.A
    G = np.empty((g.nx, g.ny, 2, 2))
    G[..., 0, 0] = (np.diff(state.u1, axis=0) / g.dx)
    G[..., 1, 1] = (np.diff(state.u2, axis=1) / g.dy)
    G[..., 0, 1] = (A @ f["d2u1"](z)).reshape(g.nx, g.ny)
    G[..., 1, 0] = (A @ f["d1u2"](z)).reshape(g.nx, g.ny)
    return G


def v_distance(phi: NFunction, Du_h, Du_ref, cell_area: float = 1.0) -> float:
    """``sum_cells |V(Du_h) - V(Du_ref)|^2 * cell_area`` for cell tensor arrays."""
    Du_h, Du_ref = np.asarray(Du_h, float), np.asarray(Du_ref, float)
    if Du_h.shape != Du_ref.shape:
        raise ValueError("fields live on different grids")
    return float(np.sum(frob(v_map(phi, Du_h) - v_map(phi, Du_ref)) ** 2) * cell_area)


def pressure_from_poisson(problem: Problem, state: DiscreteState) -> np.ndarray:
    """Recover the pressure from the velocity through the discrete Poisson identity.

    Tests with discrete gradients of cell functions turn the momentum balance
    into ``(B B^T) pi = B (grad E) / area`` where ``B`` is the divergence on
    free faces. ``B B^T`` is the Neumann Laplacian; its constant kernel is
    removed by a zero-mean bordering.

    Returns:
        Cell pressure ``(nx, ny)`` with zero mean.
    """
    o, grid = problem.ops, problem.grid
    phi = _regularized(problem.phi, state.eps_reg)
    z = np.concatenate([state.u1.ravel(), state.u2.ravel()])
    g, _ = _gradient(problem, phi, o.restrict(z), problem.load_vector())
    B = o.div.M
    L = (B @ B.T).tocsr()
    nc = grid.ncells
    ones = sp.csr_matrix(np.ones((nc, 1)))
    K = sp.bmat([[L, ones], [ones.T, None]], format="csc")
    rhs = np.concatenate([B @ g / problem.area, [0.0]])
    pi = spla.spsolve(K, rhs)[:nc]
    return (pi - pi.mean()).reshape(grid.nx, grid.ny)


def korn_operators(grid: MACGrid):
    """Full and symmetric gradient operators on the slip-admissible space.

    Unknowns are all face values except ``u2`` on the bottom row, which is
    zero. The diagonal derivatives live on cells and the off-diagonal ones on
    interior nodes, so no boundary data enters.

    Returns:
        ``(A_grad, A_sym, mean_row)``: quadratic forms of
        ``sum |grad f|^2`` and ``sum |D f|^2`` over cells and interior
        nodes, and the row computing the mean of ``f1``.
    """
    nx, ny = grid.nx, grid.ny
    dx, dy = grid.dx, grid.dy
    id1 = np.arange((nx + 1) * ny).reshape(nx + 1, ny)
    n1 = id1.size
    # u2 bottom row removed: unknown rows j = 1..ny
    id2 = n1 + np.arange(nx * ny).reshape(nx, ny)
    N = n1 + nx * ny

    def u2(i, j):
        return id2[i, j - 1]

    ic, jc = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    ic, jc = ic.ravel(), jc.ravel()
    nc = ic.size
    r = np.arange(nc)
    d11 = sp.csr_matrix((np.r_[np.full(nc, 1 / dx), np.full(nc, -1 / dx)], (np.r_[r, r], np.r_[id1[ic + 1, jc], id1[ic, jc]])), shape=(nc, N))
    rows, cols, vals = [r], [u2(ic, jc + 1)], [np.full(nc, 1 / dy)]
    has_low = jc >= 1
    rows.append(r[has_low])
    cols.append(u2(ic[has_low], jc[has_low]))
    vals.append(np.full(has_low.sum(), -1 / dy))
    d22 = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nc, N))
    In, Jn = np.meshgrid(np.arange(1, nx), np.arange(1, ny), indexing="ij")
    In, Jn = In.ravel(), Jn.ravel()
    nn = In.size
    rn = np.arange(nn)
    d2f1 = sp.csr_matrix((np.r_[np.full(nn, 1 / dy), np.full(nn, -1 / dy)], (np.r_[rn, rn], np.r_[id1[In, Jn], id1[In, Jn - 1]])), shape=(nn, N))
    d1f2 = sp.csr_matrix((np.r_[np.full(nn, 1 / dx), np.full(nn, -1 / dx)], (np.r_[rn, rn], np.r_[u2(In, Jn), u2(In - 1, Jn)])), shape=(nn, N))
    sym12 = 0.5 * (d2f1 + d1f2)
    A_grad = d11.T @ d11 + d22.T @ d22 + d2f1.T @ d2f1 + d1f2.T @ d1f2
    A_sym = d11.T @ d11 + d22.T @ d22 + 2 * sym12.T @ sym12
    # face weights for the mean of f1 (boundary faces carry half a cell)
    w1 = np.ones((nx + 1, ny))
    w1[0] = w1[-1] = 0.5
    mean_row = np.zeros(N)
    mean_row[:n1] = w1.ravel() / w1.sum()
    return A_grad.tocsc(), A_sym.tocsc(), mean_row


def korn_constant(grid: MACGrid, tol: float = 1e-10, max_iter: int = 20000, seed: int = 0) -> float:
    """Smallest ``c`` with ``sum |grad f|^2 <= c sum |D f|^2`` on the admissible space.

    Inverse iteration for the largest eigenvalue of ``A_sym^{-1} A_grad`` on
    the zero-mean subspace; each step solves a bordered system.

    Raises:
        NonConvergence: The Rayleigh quotient did not settle.
    """
    A_grad, A_sym, m = korn_operators(grid)
    N = A_sym.shape[0]
    ms = sp.csr_matrix(m[None, :])
    K = sp.bmat([[A_sym, ms.T], [ms, None]], format="csc")
    lu = spla.splu(K)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(N)
    v -= m @ v / (m @ m) * m
    c_old = 0.0
    for k in range(max_iter):
        w = lu.solve(np.concatenate([A_grad @ v, [0.0]]))[:N]
        nrm = np.sqrt(w @ (A_sym @ w))
        v = w / nrm
        c = float(v @ (A_grad @ v)) / float(v @ (A_sym @ v))
        if k > 5 and abs(c - c_old) <= tol * c:
            return c
        c_old = c
    raise NonConvergence(f"inverse iteration stalled at c={c:.6g}")
