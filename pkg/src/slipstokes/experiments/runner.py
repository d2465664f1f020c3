"""Experiment descriptions and their dispatch to the individual studies."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from ..solver import SolverConfig
from .corner import blowup_exponent, corner_sequence, lq_threshold
from .studies import StudyResult, bmo_stability, holder_scaling, homogeneity_check, reflection_experiment
from .tilted import tilted_sharpness

__all__ = ["Kind", "ExperimentSpec", "run_experiment", "run_many", "TILTED_MARGIN", "BLOWUP_RTOL"]

TILTED_MARGIN = 0.15
BLOWUP_RTOL = 0.05


class Kind(enum.Enum):
    CORNER = "corner"
    TILTED = "tilted"
    BMO_STABILITY = "bmo"
    HOLDER_SCALING = "scaling"
    REFLECTION = "reflect"
    HOMOGENEITY = "homogeneity"


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment run.

    Attributes:
        kind: Which study.
        params: Study parameters, e.g. ``{"p": 2.0}`` or ``{"beta": 2.356, "q": 4}``.
        resolutions: Strictly increasing grid sizes (studies that refine).
        output: Optional output directory for the caller.
        seed: Seed for randomized studies.
    """

    kind: Kind
    params: dict = field(default_factory=dict)
    resolutions: tuple = ()
    output: str | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        res = tuple(int(r) for r in self.resolutions)
        if any(b <= a for a, b in zip(res, res[1:])):
            raise ValueError(f"resolutions must be strictly increasing, got {res}")
        object.__setattr__(self, "resolutions", res)


def _solver_config(params):
    cfg = params.get("solver") or {}
    return SolverConfig(**cfg)


def _corner(spec: ExperimentSpec) -> StudyResult:
    beta = float(spec.params["beta"])
    q = float(spec.params["q"])
    levels = int(spec.params.get("levels", 40))
    thr = lq_threshold(beta)
    seq = corner_sequence(beta, q, levels)
    out = StudyResult("corner", summary={"beta": beta, "q": q, "threshold": thr})
    for k, (r, v) in enumerate(zip(seq.r_min, seq.values)):
        out.rows.append(
            {
                "beta": beta,
                "q": q,
                "threshold": thr,
                "r_min": r,
                "value": v,
                "increment": seq.increments[k - 1] if k else math.nan,
                "limit_estimate": seq.limit[k],
            }
        )
    expected = blowup_exponent(beta, q)
    out.summary.update({"fitted_exponent": seq.fit.exponent, "expected_exponent": expected, "converges": seq.converges})
    if q < thr:
        out.rules["converges_below_threshold"] = seq.converges
    else:
        out.rules["diverges_above_threshold"] = not seq.converges
        if seq.fit.exponent is not None:
            err = abs(seq.fit.exponent - expected) / abs(expected) if expected else abs(seq.fit.exponent)
            out.summary["exponent_rel_error"] = err
            out.rules["blowup_exponent"] = err <= BLOWUP_RTOL
    return out


def _tilted(spec: ExperimentSpec) -> StudyResult:
    alpha = float(spec.params["alpha"])
    order = int(spec.params.get("order", 2))
    res = spec.resolutions or (64, 128, 256)
    out = StudyResult("tilted", summary={"alpha": alpha, "order": order})
    fits = [tilted_sharpness(alpha, order, n) for n in res]
    for n, f in zip(res, fits):
        out.rows.append(
            {
                "alpha": alpha,
                "order": order,
                "grid": n,
                "exponent": f.exponent,
                "band_low": f.band[0],
                "band_high": f.band[1],
                "hopf_min": f.extra["hopf_min"],
            }
        )
    e = [f.exponent for f in fits]
    out.summary.update({"finest_exponent": e[-1], "refinement_changes": [b - a for a, b in zip(e, e[1:])]})
    out.rules["hopf_positive"] = all(f.extra["hopf_min"] > 0 for f in fits)
    out.rules["one_sided_exponent"] = e[-1] <= alpha + TILTED_MARGIN
    return out


def run_experiment(spec: ExperimentSpec) -> StudyResult:
    """Run one experiment and return its table and verdicts."""
    p = spec.params
    if spec.kind is Kind.CORNER:
        return _corner(spec)
    if spec.kind is Kind.TILTED:
        return _tilted(spec)
    cfg = _solver_config(p)
    if spec.kind is Kind.BMO_STABILITY:
        return bmo_stability(float(p["p"]), spec.resolutions or (32, 64, 128), p.get("family", "jump"), config=cfg)
    if spec.kind is Kind.HOLDER_SCALING:
        return holder_scaling(float(p["p"]), float(p["beta"]), spec.resolutions or (32, 64, 128), config=cfg)
    if spec.kind is Kind.HOMOGENEITY:
        n = spec.resolutions[0] if spec.resolutions else 32
        return homogeneity_check(float(p["p"]), p.get("family", "jump"), tuple(p.get("lambdas", (0.1, 8.0))), n, cfg)
    if spec.kind is Kind.REFLECTION:
        n = spec.resolutions[0] if spec.resolutions else 32
        return reflection_experiment(float(p["p"]), n, p.get("data", "cubic"), spec.seed, cfg)
    raise ValueError(f"unhandled kind {spec.kind}")  # pragma: no cover


def run_many(specs, jobs: int = 1) -> list:
    """Run independent experiments, in parallel when ``jobs > 1``; order is preserved."""
    specs = list(specs)
    if jobs <= 1 or len(specs) <= 1:
        return [run_experiment(s) for s in specs]
    with ProcessPoolExecutor(max_workers=min(jobs, len(specs))) as pool:
        return list(pool.map(run_experiment, specs))
