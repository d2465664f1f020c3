"""Monte-Carlo property suites and the frozen envelope constants they are checked against.

Each ``*_demand`` function returns, per random sample, the smallest constant
for which the corresponding inequality holds at that sample. An envelope is
the maximum demand measured once on a large reference sample, inflated by
:data:`MARGIN` and stored in ``data/envelopes.json``. Checks on fresh samples
count the samples whose demand exceeds the frozen envelope.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .fields import CellGrid
from .geometry import reflect_tensor_cells
from .orlicz import (
    NFunction,
    conjugate_value,
    dphi_inverse,
    estimate_indices,
    frob,
    frob_inner,
    hammer_gap,
    make_carreau,
    make_power,
    shifted,
    stress,
    v_map,
)
from .oscillation import bmo_seminorm, local_star_seminorm, overlapping_family

__all__ = [
    "MARGIN",
    "MODELS",
    "SHIFT_EPS",
    "model",
    "random_sym",
    "young_demand",
    "hammer_demand",
    "shift_change_demand",
    "duality_error",
    "vmap_error",
    "random_tensor_fields",
    "star_reflection_ratios",
    "load_envelopes",
    "measure_envelopes",
    "orlicz_suite",
    "oscillation_suite",
]

MARGIN = 1.5
SHIFT_EPS = (1.0, 0.5, 0.1)
MODELS = ("power-1.5", "power-2", "power-3", "carreau-1.5", "carreau-3")


def model(name: str) -> NFunction:
    """Built-in model from a ``"<kind>-<p>"`` name."""
    kind, _, p = name.partition("-")
    if kind == "power":
        return make_power(float(p))
    if kind == "carreau":
        return make_carreau(float(p))
    raise ValueError(f"unknown model {name!r}")


def random_sym(rng, n: int, radius: float = 10.0):
    """Symmetric ``2 x 2`` matrices with Frobenius norm uniform in ``[0, radius]``."""
    a = rng.normal(size=(n, 3))
    M = np.empty((n, 2, 2))
    M[:, 0, 0], M[:, 1, 1] = a[:, 0], a[:, 2]
    M[:, 0, 1] = M[:, 1, 0] = a[:, 1]
    r = rng.uniform(0, radius, n)
    return M * (r / np.maximum(frob(M), 1e-300))[:, None, None]


def young_demand(phi: NFunction, t, s, delta, q: float):
    """Constant ``C`` needed in ``t s <= C delta^(1-q) Phi(t) + delta Phi*(s)``."""
    t, s, delta = (np.asarray(v, float) for v in (t, s, delta))
    slack = t * s - delta * conjugate_value(phi, s)
    base = delta ** (1 - q) * phi.phi(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(slack > 0, slack / np.where(base > 0, base, 1.0), 0.0)


def hammer_demand(phi: NFunction, P, Q):
    """Ratio ``max / min`` of the five :func:`~slipstokes.orlicz.hammer_gap` entries (1 when ``P = Q``)."""
    e = np.stack(hammer_gap(phi, P, Q), -1)
    lo, hi = e.min(-1), e.max(-1)
    return np.where(hi > 0, hi / np.where(lo > 0, lo, np.nan), 1.0)


def _pbar_prime(phi: NFunction) -> float:
    p = estimate_indices(phi).p_lower
    return max(2.0, p / (p - 1))


def shift_change_demand(phi: NFunction, P, Q, t, eps: float):
    """Constant ``c`` in ``Phi_|P|(t) <= c eps^(1 - pbar') Phi_|Q|(t) + eps |V(P) - V(Q)|^2``.

    ``pbar' = max(2, p')`` with ``p'`` conjugate to the lower index.
    """
    gap = frob(v_map(phi, P) - v_map(phi, Q)) ** 2
    lhs = shifted(phi, frob(P)).phi(t)
    rhs = shifted(phi, frob(Q)).phi(t)
    slack = lhs - eps * gap
    scale = eps ** (1 - _pbar_prime(phi))
    return np.where(slack > 0, slack / (scale * np.where(rhs > 0, rhs, np.nan)), 0.0)


def duality_error(phi: NFunction, t):
    """Relative error of ``(Phi*)*(t)`` against ``Phi(t)``.

    ``(Phi*)*(t) = t s - Phi*(s)`` where ``s`` solves ``(Phi')^{-1}(s) = t`` by
    bisection on the bisection inverse, and ``Phi*`` comes from quadrature.
    """
    t = np.asarray(t, float)
    s = dphi_inverse(phi.dphi_inv, t)
    dd = t * s - conjugate_value(phi, s, "quadrature")
    ref = phi.phi(t)
    return np.abs(dd - ref) / np.maximum(np.abs(ref), 1e-300)


def vmap_error(phi: NFunction, A):
    """Relative error of ``|V(A)|^2 = S(A) . A``."""
    lhs = frob(v_map(phi, A)) ** 2
    rhs = frob_inner(stress(phi, A), A)
    return np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)


def random_tensor_fields(rng, count: int, nx: int = 16, ny: int = 8):
    """Mixed random suite: noise, smooth modes and jumps on a half-cube grid."""
    grid = CellGrid.half_cube(nx)
    c = grid.centers()
    out = []
    for k in range(count):
        kind = k % 3
        F = np.zeros((nx, ny, 2, 2))
        for i, j in ((0, 0), (0, 1), (1, 1)):
            if kind == 0:
                v = rng.normal(size=(nx, ny))
            elif kind == 1:
                a, b, ph = rng.uniform(0, 4), rng.uniform(0, 4), rng.uniform(0, 2 * np.pi)
                v = np.cos(np.pi * (a * c[..., 0] + b * c[..., 1]) + ph)
            else:
                cut = rng.uniform(-0.5, 0.5)
                v = rng.normal() * (c[..., 0] > cut) + rng.normal() * (c[..., 1] > rng.uniform(0, 0.5))
            F[..., i, j] = rng.uniform(0.1, 10) * v
        F[..., 1, 0] = F[..., 0, 1]
        out.append(F)
    return grid, out


def star_reflection_ratios(grid: CellGrid, fields):
    """``local_star(F) / BMO(reflected F)`` for each field."""
    fam_half = overlapping_family(grid)
    full = CellGrid(grid.nx, 2 * grid.ny, grid.dx, grid.dy, grid.x0, -grid.ny * grid.dy)
    fam_full = overlapping_family(full)
    out = []
    for F in fields:
        star = local_star_seminorm(F, grid, family=fam_half).value
        refl = bmo_seminorm(reflect_tensor_cells(F), fam_full).value
        out.append(star / refl if refl > 0 else np.nan)
    return np.array(out)


def _orlicz_demands(name: str, rng, n: int):
    phi = model(name)
    q = estimate_indices(phi).q_upper
    t, s = rng.uniform(0, 10, n), rng.uniform(0, 10, n)
    delta = 1.0 - rng.uniform(0, 1, n)
    P, Q = random_sym(rng, n), random_sym(rng, n)
    tt = rng.uniform(0, 10, n)
    out = {
        "young": float(np.max(young_demand(phi, t, s, delta, q))),
        "hammer": float(np.nanmax(hammer_demand(phi, P, Q))),
    }
    for eps in SHIFT_EPS:
        out[f"shift_{eps:g}"] = float(np.nanmax(shift_change_demand(phi, P, Q, tt, eps)))
    return out


def measure_envelopes(n: int = 100_000, n_fields: int = 3000, seed: int = 12345) -> dict:
    """Measure every envelope; the result is what ships in ``envelopes.json``."""
    rng = np.random.default_rng(seed)
    env = {"margin": MARGIN, "seed": seed, "samples": n, "models": {}}
    for name in MODELS:
        raw = _orlicz_demands(name, rng, n)
        env["models"][name] = {k: MARGIN * v for k, v in raw.items()}
    grid, fields = random_tensor_fields(rng, n_fields)
    r = star_reflection_ratios(grid, fields)
    env["star_reflection"] = {"lower": float(np.nanmin(r)) / MARGIN, "upper": float(np.nanmax(r)) * MARGIN}
    return env


def load_envelopes() -> dict:
    with resources.files("slipstokes").joinpath("data/envelopes.json").open() as fh:
        return json.load(fh)


def orlicz_suite(name: str, samples: int = 10_000, seed: int = 0, envelopes: dict | None = None) -> dict:
    """Count violations of the frozen envelopes and of the exact identities on fresh samples.

    Returns:
        Dict with per-property ``max`` demand or error and ``violations``.
    """
    env = (load_envelopes() if envelopes is None else envelopes)["models"][name]
    rng = np.random.default_rng(seed)
    phi = model(name)
    q = estimate_indices(phi).q_upper
    n = samples
    res = {}
    d = young_demand(phi, rng.uniform(0, 10, n), rng.uniform(0, 10, n), 1.0 - rng.uniform(0, 1, n), q)
    res["young"] = {"max": float(d.max()), "envelope": env["young"], "violations": int(np.sum(d > env["young"]))}
    P, Q = random_sym(rng, n), random_sym(rng, n)
    d = hammer_demand(phi, P, Q)
    res["hammer"] = {"max": float(np.nanmax(d)), "envelope": env["hammer"], "violations": int(np.sum(~(d <= env["hammer"])))}
    tt = rng.uniform(0, 10, n)
    for eps in SHIFT_EPS:
        key = f"shift_{eps:g}"
        d = shift_change_demand(phi, P, Q, tt, eps)
        res[key] = {"max": float(np.nanmax(d)), "envelope": env[key], "violations": int(np.sum(~(d <= env[key])))}
    e = duality_error(phi, rng.uniform(0, 10, n))
    res["duality"] = {"max": float(e.max()), "envelope": 1e-8, "violations": int(np.sum(e > 1e-8))}
    e = vmap_error(phi, random_sym(rng, n))
    res["vmap"] = {"max": float(e.max()), "envelope": 1e-12, "violations": int(np.sum(e > 1e-12))}
    return res


def oscillation_suite(samples: int = 1000, seed: int = 0, envelopes: dict | None = None) -> dict:
    """Constant-field, telescope and local-star/reflection checks on random fields."""
    from .oscillation import dyadic_family, telescope_check

    env = (load_envelopes() if envelopes is None else envelopes)["star_reflection"]
    rng = np.random.default_rng(seed)
    res = {}
    grid = CellGrid.unit_square(16)
    fam = dyadic_family(grid)
    worst = max(bmo_seminorm(np.full((16, 16), rng.normal()), fam).value for _ in range(20))
    res["constant"] = {"max": worst, "envelope": 1e-14, "violations": int(worst > 1e-14)}
    g32 = CellGrid.unit_square(32)
    bad, worst = 0, 0.0
    for _ in range(samples):
        f = rng.normal(size=(32, 32)) * rng.uniform(0.1, 10) + np.cumsum(rng.normal(size=(32, 32)), 0)
        k = int(rng.choice([8, 16, 32]))
        m = int(rng.integers(1, int(np.log2(k))))
        i0, j0 = (int(rng.integers(0, 33 - k)) for _ in range(2))
        lhs, rhs = telescope_check(f, g32, (i0, j0, k), m)
        worst = max(worst, lhs / rhs if rhs > 0 else 0.0)
        bad += lhs > rhs * (1 + 1e-12)
    res["telescope"] = {"max": worst, "envelope": 1.0, "violations": int(bad)}
    grid, fields = random_tensor_fields(rng, max(samples // 10, 30))
    r = star_reflection_ratios(grid, fields)
    res["star_reflection"] = {
        "min": float(np.nanmin(r)),
        "max": float(np.nanmax(r)),
        "envelope": [env["lower"], env["upper"]],
        "violations": int(np.sum(~((r >= env["lower"]) & (r <= env["upper"])))),
    }
    return res
