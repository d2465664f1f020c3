"""Convex minimization for the generalized Stokes system on a staggered grid.

The discrete energy of a velocity is

    E(u) = sum_cells area * Phi(|D_h u|) - area * (F : D_h u),

with the diagonal strain on cells, the off-diagonal strain on nodes and the
cell value of ``|D_h u|^2`` built from the mean of the squared node values
around the cell. Incompressibility is handled by an augmented Lagrangian with
Uzawa multiplier updates; every inner minimization is a damped Newton method
for the shifted potential ``Phi_eps``, continued in ``eps`` towards a floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..orlicz import NFunction, PowerLaw, ShiftedNFunction
from .discretization import Forcing, MACGrid, Operators, build_operators

__all__ = [
    "Flat",
    "Transformed",
    "SolverConfig",
    "DiscreteState",
    "SolveReport",
    "Problem",
    "NonConvergence",
    "IllPosedData",
    "make_problem",
    "energy",
    "solve",
    "weak_residual",
    "solve_linear_saddle",
    "strain_arrays",
]


class NonConvergence(RuntimeError):
    """Raised when an iteration limit is hit; carries the partial report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class IllPosedData(ValueError):
    """Forcing is incompatible with the slip condition."""


@dataclass(frozen=True)
class Flat:
    """Solve on the flat grid itself."""


@dataclass(frozen=True)
class Transformed:
    """Solve for the pulled-back unknown of a graph domain on the flat chart.

    Attributes:
        domain: A :class:`~slipstokes.geometry.GraphDomain`.
    """

    domain: object


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and iteration limits.

    Attributes:
        tol: Bound for the normalized weak residual and divergence.
        max_newton: Newton steps per multiplier update.
        max_uzawa: Multiplier updates per continuation stage.
        rho_factor: Penalty as a multiple of the viscosity at the data scale.
        eps_factor: Geometric factor of the continuation.
        eps_floor: Final shift relative to the data scale.
        stage_tol: Tolerance of intermediate continuation stages.
        armijo_c: Sufficient-decrease constant.
        backtrack: Step reduction factor.
        max_halvings: Line-search reductions before giving up.
    """

    tol: float = 1e-10
    max_newton: int = 60
    max_uzawa: int = 200
    rho_factor: float = 1e3
    eps_factor: float = 0.1
    eps_floor: float = 1e-8
    stage_tol: float = 1e-6
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_halvings: int = 40

    def __post_init__(self):
        for name in ("tol", "max_newton", "max_uzawa", "rho_factor", "eps_floor", "stage_tol", "armijo_c", "max_halvings"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.eps_factor < 1 or not 0 < self.backtrack < 1:
            raise ValueError("eps_factor and backtrack must lie in (0, 1)")


@dataclass
class DiscreteState:
    """Velocity faces, zero-mean cell pressure and the final shift."""

    u1: np.ndarray
    u2: np.ndarray
    pi: np.ndarray
    eps_reg: float


@dataclass
class SolveReport:
    """Result of :func:`solve`.

    Attributes:
        state: Converged discrete state.
        residual_history: Normalized weak residual after each Newton step.
        energy_history: Augmented energy after each accepted Newton step,
            one list per continuation stage and multiplier update.
        stages: Per-stage records ``{eps, newton, uzawa, residual, divergence}``.
        residual: Final normalized weak residual.
        divergence: Final normalized ``max |div_h u|``.
        converged: Whether both tolerances were met.
    """

    state: DiscreteState
    residual_history: list = field(default_factory=list)
    energy_history: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    residual: float = math.inf
    divergence: float = math.inf
    converged: bool = False
    t_scale: float = 1.0
    sigma: float = 1.0


@dataclass
class Problem:
    """Assembled discrete problem."""

    grid: MACGrid
    phi: NFunction
    forcing: Forcing
    ops: Operators
    mode: object = field(default_factory=Flat)
    boundary: Callable | None = None

    @property
    def area(self) -> float:
        return self.grid.cell_area

    def load_vector(self):
        o, F = self.ops, self.forcing
        a = self.area
        return a * (
            o.D11.M.T @ F.F11.ravel() + o.D22.M.T @ F.F22.ravel() + 2 * o.D12.M.T @ (o.w * F.F12.ravel())
        )

    def t_scale(self) -> float:
        """Strain scale from the forcing and the boundary data."""
        s = 0.0
        if self.forcing.sup > 0:
            s = float(self.phi.dphi_inv(np.asarray(self.forcing.sup)))
        zmax = float(np.max(np.abs(self.ops.z_fixed))) if self.ops.z_fixed.size else 0.0
        s = max(s, zmax / self.grid.diameter)
        return s if s > 0 else 1.0


def make_problem(grid: MACGrid, phi: NFunction, F=None, bc: Callable | None = None, mode=None, slip_tol: float = 1e-10) -> Problem:
    """Sample forcing and boundary data onto the grid.

    Args:
        grid: The staggered grid.
        phi: The potential.
        F: None, a callable ``x -> (..., 2, 2)``, a cell array
            ``(nx, ny, 2, 2)`` or a :class:`Forcing`.
        bc: Dirichlet velocity callable, in chart coordinates in transformed
            mode.
        mode: :class:`Flat` (default) or :class:`Transformed`.
        slip_tol: Relative bound for ``|F12|`` on a slip bottom.

    Returns:
        The problem.
    """
    mode = Flat() if mode is None else mode
    graph = None
    chart = None
    if isinstance(mode, Transformed):
        graph = mode.domain.graph
        chart = lambda x: np.stack([x[..., 0], x[..., 1] + graph.h(x[..., 0])], -1)  # noqa: E731
    if F is None:
        forcing = Forcing.zero(grid)
    elif isinstance(F, Forcing):
        forcing = F
    elif callable(F):
        forcing = Forcing.from_callable(grid, F, chart)
    else:
        forcing = Forcing.from_cells(grid, F)
    if grid.bottom == "slip":
        bottom = np.abs(forcing.F12[:, 0])
        scale = max(forcing.sup, 1e-300)
        if bottom.max() > slip_tol * scale and bottom.max() > 1e-14:
            raise IllPosedData(f"F12 on the slip edge is {bottom.max():.3g}, expected 0")
    ops = build_operators(grid, bc, graph)
    return Problem(grid, phi, forcing, ops, mode, bc)


# --------------------------------------------------------------------------
# energy and derivatives


def _strains(ops: Operators, x):
    return ops.D11(x), ops.D22(x), ops.D12(x)


def _cell_norm(ops, d11, d22, d12):
    return np.sqrt(d11 * d11 + d22 * d22 + 2 * (ops.A @ (d12 * d12)))


def _linear(problem: Problem, d11, d22, d12):
    F = problem.forcing
    return problem.area * (
        np.dot(F.F11.ravel(), d11) + np.dot(F.F22.ravel(), d22) + 2 * np.dot(problem.ops.w * F.F12.ravel(), d12)
    )


def _energy_free(problem: Problem, phi: NFunction, x):
    d11, d22, d12 = _strains(problem.ops, x)
    t = _cell_norm(problem.ops, d11, d22, d12)
    return problem.area * float(np.sum(phi.phi(t))) - _linear(problem, d11, d22, d12)


def energy(grid: MACGrid, phi: NFunction, F, v, mode=None, bc: Callable | None = None) -> float:
    """Discrete energy of a velocity.

    Args:
        grid: The staggered grid.
        phi: The potential.
        F: Forcing as accepted by :func:`make_problem`.
        v: Velocity callable (chart coordinates in transformed mode) or face
            vector ``z``.
        mode: :class:`Flat` or :class:`Transformed`.
        bc: Data for the ghost values; defaults to ``v`` when it is callable
            and to zero otherwise.

    Returns:
        ``sum_cells area * (Phi(|D_h v|) - F : D_h v)``.
    """
    z = grid.interpolate(v) if callable(v) else np.asarray(v, dtype=float)
    if bc is None and callable(v):
        bc = v
    problem = make_problem(grid, phi, F, bc, mode)
    return problem_energy(problem, phi, z)


def problem_energy(problem: Problem, phi: NFunction, z) -> float:
    """Energy of a full face vector ``z`` for an assembled problem."""
    d11, d22, d12 = problem.ops.strain_of_faces(z)
    t = _cell_norm(problem.ops, d11, d22, d12)
    return problem.area * float(np.sum(phi.phi(t))) - _linear(problem, d11, d22, d12)


def strain_arrays(problem: Problem, z):
    """Cell tensors of the discrete strain, node strains averaged to cells.

    Returns:
        Array ``(nx, ny, 2, 2)``.
    """
    g = problem.grid
    d11, d22, d12 = problem.ops.strain_of_faces(z)
    d12c = problem.ops.A @ d12
    D = np.empty((g.nx, g.ny, 2, 2))
    D[..., 0, 0] = d11.reshape(g.nx, g.ny)
    D[..., 1, 1] = d22.reshape(g.nx, g.ny)
    D[..., 0, 1] = D[..., 1, 0] = d12c.reshape(g.nx, g.ny)
    return D


def _gradient(problem: Problem, phi: NFunction, x, load):
    o = problem.ops
    d11, d22, d12 = _strains(o, x)
    t = _cell_norm(o, d11, d22, d12)
    mu = phi.mu(t)
    a = problem.area
    g = a * (o.D11.M.T @ (mu * d11) + o.D22.M.T @ (mu * d22) + 2 * o.D12.M.T @ ((o.A.T @ mu) * d12)) - load
    return g, (d11, d22, d12, t)


def _hessian(problem: Problem, phi: NFunction, strains):
    o = problem.ops
    d11, d22, d12, t = strains
    mu, c2 = phi.newton_coefficients(t)
    a = problem.area
    B11, B22, B12 = o.D11.M, o.D22.M, o.D12.M
    H = B11.T @ sp.diags(mu) @ B11 + B22.T @ sp.diags(mu) @ B22 + 2 * B12.T @ sp.diags(o.A.T @ mu) @ B12
    W = sp.diags(d11) @ B11 + sp.diags(d22) @ B22 + 2 * o.A @ sp.diags(d12) @ B12
    H = H + W.T @ sp.diags(c2) @ W
    return a * H


def _sigma(problem: Problem, phi: NFunction, t):
    s = max(problem.forcing.sup, float(np.max(phi.dphi(t))) if t.size else 0.0)
    return s if s > 0 else 1.0


def weak_residual(problem: Problem, state: DiscreteState, phi: NFunction | None = None) -> float:
    """Normalized weak residual over all free test functions.

    ``max |<S(D_h u), D_h e> - <pi, div_h e> - <F, D_h e>|`` over free unit
    face vectors ``e``, divided by ``h * max(|F|_inf, |S(D_h u)|_inf)``. The
    stress is that of ``Phi_eps`` at the state's shift.

    Args:
        problem: The assembled problem.
        state: Velocity and pressure.
        phi: Potential to test against; defaults to the shifted potential of
            the state.
    """
    if phi is None:
        phi = _regularized(problem.phi, state.eps_reg)
    z = np.concatenate([state.u1.ravel(), state.u2.ravel()])
    x = problem.ops.restrict(z)
    g, (_, _, _, t) = _gradient(problem, phi, x, problem.load_vector())
    r = g - problem.area * (problem.ops.div.M.T @ state.pi.ravel())
    return float(np.max(np.abs(r))) / (problem.grid.h * _sigma(problem, phi, t))


def _regularized(phi: NFunction, eps: float) -> NFunction:
    if eps <= 0 or phi.is_quadratic:
        return phi
    return ShiftedNFunction(phi, eps)


def _eps_schedule(phi: NFunction, t_scale: float, cfg: SolverConfig):
    if phi.is_quadratic:
        return [0.0]
    floor = cfg.eps_floor * t_scale
    eps, out = t_scale, []
    while eps > floor * (1 + 1e-12):
        out.append(eps)
        eps *= cfg.eps_factor
    out.append(floor)
    return out


def solve(grid: MACGrid, phi: NFunction, F=None, bc: Callable | None = None, config: SolverConfig | None = None, mode=None, problem: Problem | None = None, initial=None) -> SolveReport:
    """Minimize the discrete energy over discretely divergence-free velocities.

    Args:
        grid: The staggered grid.
        phi: The potential.
        F: Forcing, see :func:`make_problem`.
        bc: Dirichlet velocity on the non-slip edges; zero when None.
        config: Solver settings.
        mode: :class:`Flat` or :class:`Transformed`.
        problem: Pre-assembled problem; overrides the previous arguments.
        initial: Optional initial face vector.

    Returns:
        The report of the final continuation stage.

    Raises:
        NonConvergence: An iteration limit was reached.
        IllPosedData: The forcing violates the slip condition.
    """
    cfg = SolverConfig() if config is None else config
    if problem is None:
        problem = make_problem(grid, phi, F, bc, mode)
    grid, phi, o = problem.grid, problem.phi, problem.ops
    t_scale = problem.t_scale()
    rho = cfg.rho_factor * float(phi.mu(np.asarray(t_scale)))
    load = problem.load_vector()
    a = problem.area
    Bd, dd = o.div.M, o.div.c
    P = (Bd.T @ Bd).tocsr()
    x = o.restrict(initial) if initial is not None else np.zeros(o.free.size)
    pi = np.zeros(grid.ncells)
    report = SolveReport(DiscreteState(*grid.split(o.expand(x)), pi.reshape(grid.nx, grid.ny), 0.0), t_scale=t_scale)
    schedule = _eps_schedule(phi, t_scale, cfg)
    lu_cache = None
    for k, eps in enumerate(schedule):
        last = k == len(schedule) - 1
        tol = cfg.tol if last else cfg.stage_tol
        pe = _regularized(phi, eps)
        newton_total = 0
        for it in range(cfg.max_uzawa):
            shift = a * (Bd.T @ (pi - rho * dd))

            def lagr(xx):
                dv = Bd @ xx + dd
                return _energy_free(problem, pe, xx) - a * float(pi @ dv) + 0.5 * rho * a * float(dv @ dv)

            energies = []
            prev = math.inf
            for _ in range(cfg.max_newton):
                g, strains = _gradient(problem, pe, x, load)
                g = g - shift + rho * a * (P @ x)
                sigma = _sigma(problem, pe, strains[3])
                res = float(np.max(np.abs(g))) / (grid.h * sigma) if g.size else 0.0
                report.residual_history.append(res)
                # stop at the target, or once below tol and limited by roundoff
                if res < 0.1 * tol or (res < tol and res > 0.5 * prev):
                    break
                prev = res
                if lu_cache is None or not phi.is_quadratic:
                    H = (_hessian(problem, pe, strains) + rho * a * P).tocsc()
                    lu_cache = spla.splu(H)
                d = -lu_cache.solve(g)
                slope = float(g @ d)
                L0 = lagr(x)
                if not energies:
                    energies.append(L0)
                step, accepted = 1.0, False
                for _ in range(cfg.max_halvings):
                    L1 = lagr(x + step * d)
                    if L1 <= L0 + cfg.armijo_c * step * slope:
                        accepted = True
                        break
                    # roundoff floor: the predicted decrease is below the energy resolution
                    if abs(slope) * step < 1e-13 * (abs(L0) + 1e-300):
                        accepted = True
                        break
                    step *= cfg.backtrack
                if not accepted:
                    report.stages.append({"eps": eps, "newton": newton_total, "uzawa": it, "failed": "line search"})
                    raise NonConvergence("line search failed", report)
                x = x + step * d
                energies.append(L1)
                newton_total += 1
            else:
                raise NonConvergence(f"Newton did not converge at eps={eps:g}", report)
            report.energy_history.append(energies)
            div = Bd @ x + dd
            pi = pi - rho * div
            divn = float(np.max(np.abs(div))) / t_scale
            if divn < tol:
                break
        else:
            raise NonConvergence(f"multiplier updates did not converge at eps={eps:g}", report)
        pi = pi - pi.mean()
        state = DiscreteState(*grid.split(o.expand(x)), pi.reshape(grid.nx, grid.ny).copy(), eps)
        r = weak_residual(problem, state, pe)
        report.stages.append({"eps": eps, "newton": newton_total, "uzawa": it + 1, "residual": r, "divergence": divn})
        report.state = state
        report.residual, report.divergence = r, divn
        report.sigma = _sigma(problem, pe, _cell_norm(o, *_strains(o, x)))
    report.converged = report.residual < cfg.tol and report.divergence < cfg.tol
    if not report.converged:
        raise NonConvergence(f"final residual {report.residual:.3g}, divergence {report.divergence:.3g}", report)
    return report


def solve_linear_saddle(problem: Problem) -> DiscreteState:
    """Direct solve of the linear saddle-point system for a quadratic potential.

    The pressure gauge is fixed by a bordering row and column enforcing zero
    mean.
    """
    phi = problem.phi
    if not phi.is_quadratic:
        raise ValueError("direct saddle-point solve needs a quadratic potential")
    o, grid, a = problem.ops, problem.grid, problem.area
    n, nc = o.free.size, grid.ncells
    g0, strains = _gradient(problem, phi, np.zeros(n), problem.load_vector())
    K = _hessian(problem, phi, strains)
    Bd = o.div.M
    ones = sp.csr_matrix(np.ones((nc, 1)))
    KKT = sp.bmat([[K, -a * Bd.T, None], [-a * Bd, None, ones], [None, ones.T, None]], format="csc")
    rhs = np.concatenate([-g0, a * o.div.c, [0.0]])
    sol = spla.spsolve(KKT, rhs)
    x, pi = sol[:n], sol[n : n + nc]
    return DiscreteState(*grid.split(o.expand(x)), pi.reshape(grid.nx, grid.ny), 0.0)
