"""Refinement studies built on the staggered-grid solver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..fields import CellGrid
from ..geometry import GraphDomain, half_cube_mean, cube_mean, reflect_tensor, reflect_tensor_cells, reflect_velocity
from ..orlicz import NFunction, PowerLaw, frob, make_power, stress
from ..oscillation import Weight, flat_bottom_samples, holder_via_campanato, overline_bmo, overlapping_family
from ..solver import DiscreteState, MACGrid, SolverConfig, Transformed, make_problem, solve, strain_arrays, weak_residual
from ..solver.core import _regularized
from ..solver.diagnostics import cell_gradient, cell_velocity
from .fitting import trend_slope
from .manufactured import constant_strain_velocity, cubic_stream_forcing, cubic_stream_velocity

__all__ = [
    "StudyResult",
    "forcing_family",
    "FORCING_FAMILIES",
    "overline_bmo_star",
    "bmo_stability",
    "holder_exponent",
    "holder_scaling",
    "homogeneity_check",
    "reflection_experiment",
    "TREND_LIMIT",
]

TREND_LIMIT = 0.05


@dataclass
class StudyResult:
    """Rows of a study plus its acceptance verdicts.

    Attributes:
        name: Study identifier.
        rows: One dict per resolution or parameter value.
        summary: Scalars derived from the rows.
        rules: Acceptance rule name to pass flag.
    """

    name: str
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    rules: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.rules.values())


def _tensor(x, f11, f12, f22):
    out = np.empty(np.shape(x)[:-1] + (2, 2))
    out[..., 0, 0], out[..., 1, 1] = f11, f22
    out[..., 0, 1] = out[..., 1, 0] = f12
    return out


def _jump(x):
    a, b = x[..., 0], x[..., 1]
    return _tensor(x, (a > 0.125).astype(float), 0.5 * b * np.cos(np.pi * a), 0.5 * (b > 0.25))


def _smooth(x):
    a, b = x[..., 0], x[..., 1]
    return _tensor(x, np.cos(np.pi * a), 0.5 * b * np.cos(np.pi * a), 0.5 * np.sin(np.pi * b) + a * a)


def _zero(x):
    return np.zeros(np.shape(x)[:-1] + (2, 2))


FORCING_FAMILIES: dict[str, Callable] = {"jump": _jump, "smooth": _smooth, "zero": _zero}


def forcing_family(name: str, exponent: float | None = None) -> Callable:
    """Built-in forcing with ``F12 = 0`` on the bottom edge.

    Args:
        name: ``"jump"`` (discontinuous, in BMO), ``"smooth"``, ``"zero"`` or
            ``"holder"`` (needs ``exponent``).
        exponent: Hoelder exponent of the ``"holder"`` family.
    """
    if name == "holder":
        if exponent is None or not 0 < exponent <= 1:
            raise ValueError("the holder family needs an exponent in (0, 1]")
        s = exponent

        def F(x):
            a, b = x[..., 0], x[..., 1]
            return _tensor(x, np.abs(a - 0.125) ** s, 0.5 * np.abs(b) ** s * np.cos(np.pi * a), 0.5 * np.abs(b - 0.25) ** s)

        return F
    try:
        return FORCING_FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown forcing family {name!r}") from None


def _cell_grid(grid: MACGrid) -> CellGrid:
    return CellGrid(grid.nx, grid.ny, grid.dx, grid.dy, grid.x0, grid.y0)


def _half_size(field_, grid: CellGrid):
    # concentric half-size half cube, bottom-centred
    kx, ky = grid.nx // 2, grid.ny // 2
    i0 = (grid.nx - kx) // 2
    sub = CellGrid(kx, ky, grid.dx, grid.dy, grid.x0 + i0 * grid.dx, grid.y0)
    return np.asarray(field_)[i0 : i0 + kx, :ky], sub


def overline_bmo_star(F, grid: CellGrid, w: Weight = Weight()) -> float:
    """Overlapping-cube BMO of ``F`` on a half cube plus the bottom traction term."""
    fam = overlapping_family(grid).masked()
    return overline_bmo(F, fam, w, flat_bottom_samples(grid)).value


def _faces(state: DiscreteState):
    return np.concatenate([state.u1.ravel(), state.u2.ravel()])


def bmo_stability(
    p: float,
    resolutions=(32, 64, 128),
    family: str = "jump",
    bc: Callable | None = None,
    phi: NFunction | None = None,
    graph=None,
    config: SolverConfig | None = None,
) -> StudyResult:
    """Ratio of the stress oscillation on the half-size cube to the data on the full cube.

    ``ratio = |S(D u_h)|_{half} / (|F|_{full} + avg(|S(D u_h)| + phi'(|u_h| / R)))``
    with both norms the overline-BMO* quantity of :func:`overline_bmo_star`.

    Args:
        p: Power-law exponent (ignored when ``phi`` is given).
        resolutions: Strictly increasing cell counts across the cube.
        family: Forcing family name.
        bc: Dirichlet data; zero when None.
        phi: Potential, defaults to the power law.
        graph: Optional boundary graph: solve in the flattened chart.
        config: Solver settings.

    Returns:
        Study with rule ``trend <= TREND_LIMIT``.
    """
    phi = make_power(p) if phi is None else phi
    F = forcing_family(family)
    mode = None if graph is None else Transformed(GraphDomain(graph))
    out = StudyResult("bmo_stability", summary={"p": p, "family": family})
    for n in resolutions:
        grid = MACGrid.half_cube(n)
        problem = make_problem(grid, phi, F, bc, mode)
        rep = solve(grid, phi, config=config, problem=problem)
        z = _faces(rep.state)
        S = stress(phi, strain_arrays(problem, z))
        cg = _cell_grid(grid)
        Fc = F(grid.cell_points())
        S_half, sub = _half_size(S, cg)
        num = overline_bmo_star(S_half, sub)
        den_F = overline_bmo_star(Fc, cg)
        R = grid.nx * grid.dx
        speed = np.linalg.norm(cell_velocity(rep.state), axis=-1)
        mean = float(np.mean(frob(S) + phi.dphi(speed / R)))
        out.rows.append(
            {
                "n": n,
                "numerator": num,
                "forcing_norm": den_F,
                "mean_term": mean,
                "ratio": num / (den_F + mean) if den_F + mean > 0 else 0.0,
                "residual": rep.residual,
                "newton": sum(s.get("newton", 0) for s in rep.stages),
            }
        )
    ratios = [r["ratio"] for r in out.rows]
    if len(ratios) >= 2 and min(ratios) > 0:
        out.summary["trend"] = trend_slope(resolutions, ratios)
    else:
        out.summary["trend"] = 0.0
    out.rules["bounded_trend"] = out.summary["trend"] <= TREND_LIMIT
    return out


def holder_exponent(p: float, beta: float) -> float:
    """``min(beta, beta (p - 1))``."""
    return min(beta, beta * (p - 1))


def holder_scaling(
    p: float, beta: float, resolutions=(32, 64, 128), config: SolverConfig | None = None
) -> StudyResult:
    """Campanato-proxy Hoelder ratio ``(|grad u|^(p-1) + |pi|) / |F|`` under refinement.

    The forcing is the ``"holder"`` family with exponent ``beta (p - 1)``; the
    solution norms use the exponent :func:`holder_exponent` and live on the
    half-size cube.
    """
    phi = make_power(p)
    s = beta * (p - 1)
    bt = holder_exponent(p, beta)
    F = forcing_family("holder", min(s, 1.0))
    out = StudyResult("holder_scaling", summary={"p": p, "beta": beta, "beta_tilde": bt, "forcing_exponent": s})
    for n in resolutions:
        grid = MACGrid.half_cube(n)
        problem = make_problem(grid, phi, F)
        rep = solve(grid, phi, config=config, problem=problem)
        cg = _cell_grid(grid)
        G_half, sub = _half_size(cell_gradient(problem, rep.state), cg)
        pi_half, _ = _half_size(rep.state.pi, cg)
        fam = overlapping_family(sub)
        g = holder_via_campanato(G_half, bt, fam)
        q = holder_via_campanato(pi_half, bt, fam)
        f = holder_via_campanato(F(grid.cell_points()), min(s, 1.0), overlapping_family(cg))
        out.rows.append({"n": n, "grad_seminorm": g, "pressure_seminorm": q, "forcing_seminorm": f, "ratio": (g ** (p - 1) + q) / f})
    ratios = [r["ratio"] for r in out.rows]
    out.summary["trend"] = trend_slope(resolutions, ratios) if len(ratios) >= 2 else 0.0
    out.summary["bounded"] = out.summary["trend"] <= TREND_LIMIT
    out.rules["finite"] = bool(np.all(np.isfinite(ratios)))
    return out


def homogeneity_check(
    p: float, F: Callable | str = "jump", lambdas=(0.1, 8.0), n: int = 32, config: SolverConfig | None = None
) -> StudyResult:
    """``max_lam |u(lam F) - lam^(1/(p-1)) u(F)|_inf / |lam^(1/(p-1)) u(F)|_inf``.

    Raises:
        ValueError: The potential family is not a pure power law.
    """
    cfg = SolverConfig() if config is None else config
    phi = make_power(p)
    if not isinstance(phi, PowerLaw):
        raise ValueError("homogeneity needs a pure power law")
    F = forcing_family(F) if isinstance(F, str) else F
    grid = MACGrid.half_cube(n)
    base = _faces(solve(grid, phi, F, config=cfg).state)
    out = StudyResult("homogeneity", summary={"p": p, "n": n, "tol": cfg.tol})
    for lam in lambdas:
        z = base if lam == 1 else _faces(solve(grid, phi, lambda x, lam=lam: lam * F(x), config=cfg).state)
        ref = lam ** (1 / (p - 1)) * base
        dev = float(np.max(np.abs(z - ref)) / np.max(np.abs(ref)))
        out.rows.append({"lambda": lam, "scale": lam ** (1 / (p - 1)), "deviation": dev})
    out.summary["max_deviation"] = max(r["deviation"] for r in out.rows)
    out.rules["homogeneous"] = out.summary["max_deviation"] <= 10 * cfg.tol
    return out


def _random_slip_forcing(seed: int):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 3, 3))

    def F(x):
        x1, x2 = x[..., 0], x[..., 1]
        k = np.arange(3)
        c1 = np.cos(np.pi * k * x1[..., None])
        c2 = np.cos(np.pi * k * x2[..., None])
        s2 = np.sin(np.pi * (k + 1) * x2[..., None])
        f11 = np.einsum("...i,...j,ij->...", c1, c2, a[0])
        f22 = np.einsum("...i,...j,ij->...", c1, c2, a[1])
        f12 = np.einsum("...i,...j,ij->...", c1, s2, a[2])
        return _tensor(x, f11, 0.5 * f12, f22)

    return F


def _reflect_state(state: DiscreteState) -> DiscreteState:
    u1 = np.concatenate([state.u1[:, ::-1], state.u1], axis=1)
    u2 = np.concatenate([-state.u2[:, :0:-1], state.u2], axis=1)
    pi = np.concatenate([state.pi[:, ::-1], state.pi], axis=1)
    return DiscreteState(u1, u2, pi - pi.mean(), state.eps_reg)


def reflection_experiment(
    p: float, n: int = 32, data: str = "cubic", seed: int = 0, config: SolverConfig | None = None, lams=(1.0, 0.5, 0.25)
) -> StudyResult:
    """Solve on the half cube, reflect, and test the result on the whole cube.

    Args:
        p: Power-law exponent.
        n: Cells across the cube.
        data: ``"constant"`` (u*, F = 0), ``"cubic"`` (u**, F = S(Du**)) or
            ``"random"`` (zero boundary data, random slip-consistent F).
        seed: Seed of the random forcing.
        config: Solver settings.
        lams: Scales of the diag-mean identity.

    Returns:
        Study with the half and whole-cube residuals and the identity errors.
    """
    cfg = SolverConfig() if config is None else config
    phi = make_power(p)
    if data == "constant":
        F, bc = None, constant_strain_velocity
    elif data == "cubic":
        F, bc = cubic_stream_forcing(phi), cubic_stream_velocity
    elif data == "random":
        F, bc = _random_slip_forcing(seed), None
    else:
        raise ValueError(f"unknown data {data!r}")
    half = MACGrid.half_cube(n)
    hp = make_problem(half, phi, F, bc)
    rep = solve(half, phi, config=cfg, problem=hp)
    full = MACGrid.full_cube(n)
    bc_full = None if bc is None else reflect_velocity(bc)
    F_full = None if F is None else reflect_tensor(F)
    fp = make_problem(full, phi, F_full, bc_full)
    state = _reflect_state(rep.state)
    pe = _regularized(phi, rep.state.eps_reg)
    res_half = weak_residual(hp, rep.state, pe)
    res_full = weak_residual(fp, state, pe)
    Fc = np.zeros((n, n // 2, 2, 2)) if F is None else F(half.cell_points())
    Ft = reflect_tensor_cells(Fc)
    errs = []
    for lam in lams:
        m_half = half_cube_mean(Fc, lam)
        errs.append(float(np.max(np.abs(cube_mean(Ft, lam) - np.diag(np.diag(m_half))))))
    out = StudyResult("reflection", summary={"p": p, "n": n, "data": data, "tol": cfg.tol})
    out.rows = [{"lambda": lam, "diag_mean_error": e} for lam, e in zip(lams, errs)]
    out.summary.update({"half_residual": res_half, "full_residual": res_full, "max_diag_mean_error": max(errs)})
    out.rules["residual"] = res_full <= 2 * cfg.tol
    out.rules["diag_mean"] = max(errs) <= 1e-12
    return out
