"""Command-line entry point: ``slipstokes <command> [options]``.

Exit status is 0 when every acceptance rule of the run passes, 1 when a rule
fails or a solve does not converge, and 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .io import ConfigError, load_config, phi_from_config, write_json, write_manifest, write_rows_csv

log = logging.getLogger("slipstokes")

OUT_ENV = "SLIPSTOKES_OUT"
COMMANDS = ("solve", "corner", "tilted", "scaling", "bmo", "homogeneity", "reflect", "proptest")

_DEFAULTS = {
    "corner": {"beta": 3 * np.pi / 4, "q": [2.0, 2.9, 3.1, 4.0], "levels": 40},
    "tilted": {"alpha": [0.3, 0.5], "order": 2, "grid": [64, 128, 256]},
    "scaling": {"p": [2.0], "beta": [0.3], "resolutions": [32, 64, 128]},
    "bmo": {"p": [1.5, 2.0, 3.0], "resolutions": [32, 64, 128], "family": "jump"},
    "homogeneity": {"p": [1.5, 3.0], "lambdas": [0.1, 8.0], "n": 32},
    "reflect": {"p": [2.0], "n": 32, "data": "cubic"},
    "proptest": {"module": "orlicz", "samples": 10000, "models": None},
    "solve": {},
}
_LIST_KEYS = {
    "corner": ("q",),
    "tilted": ("alpha", "grid"),
    "scaling": ("p", "beta", "resolutions"),
    "bmo": ("p", "resolutions"),
    "homogeneity": ("p", "lambdas"),
    "reflect": ("p",),
}


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _angle(text):
    """Float or a multiple of pi such as ``3pi/4`` or ``0.75pi``."""
    t = str(text).replace(" ", "").lower()
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("/")
    coef = num.replace("*", "").replace("pi", "") or "1"
    try:
        return float(coef) * math.pi / (float(den) if den else 1.0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse angle {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slipstokes", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file; keys match the option names")
    common.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./slipstokes-out)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--jobs", type=int, default=None, help="worker processes for parameter lattices")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="solve one problem from a config")
    p = sub.add_parser("corner", parents=[common], help="corner L^q integrability sequences")
    p.add_argument("--beta", type=_angle, help="opening angle, e.g. 2.356 or 3pi/4")
    p.add_argument("--q", type=_floats)
    p.add_argument("--levels", type=int)
    p = sub.add_parser("tilted", parents=[common], help="tilted boundary exponent fits")
    p.add_argument("--alpha", type=_floats)
    p.add_argument("--order", type=int)
    p.add_argument("--grid", type=_ints)
    p = sub.add_parser("scaling", parents=[common], help="Hoelder scaling ratios")
    p.add_argument("--p", type=_floats)
    p.add_argument("--beta", type=_floats)
    p.add_argument("--resolutions", type=_ints)
    p = sub.add_parser("bmo", parents=[common], help="BMO stability ratios")
    p.add_argument("--p", type=_floats)
    p.add_argument("--resolutions", type=_ints)
    p.add_argument("--family")
    p = sub.add_parser("homogeneity", parents=[common], help="power-law homogeneity")
    p.add_argument("--p", type=_floats)
    p.add_argument("--lambdas", type=_floats)
    p.add_argument("--n", type=int)
    p = sub.add_parser("reflect", parents=[common], help="reflection consistency")
    p.add_argument("--p", type=_floats)
    p.add_argument("--n", type=int)
    p.add_argument("--data", choices=["constant", "cubic", "random"])
    p = sub.add_parser("proptest", parents=[common], help="property suites against frozen envelopes")
    p.add_argument("--module", choices=["orlicz", "oscillation"])
    p.add_argument("--samples", type=int)
    p.add_argument("--models", type=lambda s: [m for m in s.split(",") if m])
    return ap


def resolve(args) -> dict:
    """Merge defaults, the config file and explicit options (in increasing priority)."""
    cfg = dict(_DEFAULTS[args.command])
    if args.config:
        cfg.update(load_config(args.config))
    for key, val in vars(args).items():
        if key in ("command", "config", "out", "verbose") or val is None:
            continue
        cfg[key] = val
    cfg.setdefault("seed", 0)
    cfg.setdefault("jobs", 1)
    for key in _LIST_KEYS.get(args.command, ()):
        if not isinstance(cfg[key], (list, tuple)):
            cfg[key] = [cfg[key]]
    return cfg


def _outdir(args, command) -> Path:
    root = Path(args.out or os.environ.get(OUT_ENV) or "slipstokes-out")
    out = root / command
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc.strerror}") from exc
    return out


def _specs(command, cfg):
    from .experiments import ExperimentSpec

    seed = int(cfg["seed"])
    solver = cfg.get("solver")
    extra = {"solver": solver} if solver else {}
    if command == "corner":
        return [ExperimentSpec("corner", {"beta": _angle(cfg["beta"]), "q": q, "levels": int(cfg["levels"])}, seed=seed) for q in cfg["q"]]
    if command == "tilted":
        return [ExperimentSpec("tilted", {"alpha": a, "order": int(cfg["order"])}, tuple(cfg["grid"]), seed=seed) for a in cfg["alpha"]]
    if command == "scaling":
        return [
            ExperimentSpec("scaling", {"p": p, "beta": b, **extra}, tuple(cfg["resolutions"]), seed=seed)
            for p in cfg["p"]
            for b in cfg["beta"]
        ]
    if command == "bmo":
        return [ExperimentSpec("bmo", {"p": p, "family": cfg["family"], **extra}, tuple(cfg["resolutions"]), seed=seed) for p in cfg["p"]]
    if command == "homogeneity":
        return [ExperimentSpec("homogeneity", {"p": p, "lambdas": cfg["lambdas"], **extra}, (int(cfg["n"]),), seed=seed) for p in cfg["p"]]
    if command == "reflect":
        return [ExperimentSpec("reflect", {"p": p, "data": cfg["data"], **extra}, (int(cfg["n"]),), seed=seed) for p in cfg["p"]]
    raise ConfigError(f"no experiment for {command}")  # pragma: no cover


def _run_experiments(command, cfg, out):
    from .experiments import run_many

    specs = _specs(command, cfg)
    results = run_many(specs, int(cfg["jobs"]))
    rows, verdicts = [], []
    for spec, res in zip(specs, results):
        for r in res.rows:
            row = {"seed": spec.seed}
            row.update({k: v for k, v in spec.params.items() if k != "solver" and not isinstance(v, (list, dict))})
            row.update(r)
            rows.append(row)
        verdicts.append({"params": {k: v for k, v in spec.params.items() if k != "solver"}, "summary": res.summary, "rules": res.rules, "passed": res.passed})
    files = [out / "results.csv", out / "summary.json"]
    write_rows_csv(files[0], rows)
    passed = all(v["passed"] for v in verdicts)
    write_json(files[1], {"command": command, "seed": cfg["seed"], "experiments": verdicts, "passed": passed})
    return passed, files


_CASES = {
    "cubic_stream": ("cubic_stream_velocity", "cubic_stream_gradient"),
    "constant_strain": ("constant_strain_velocity", "constant_strain_gradient"),
}


def _run_solve(cfg, out):
    from . import experiments as ex
    from .fields import CellGrid, read_grid_csv, write_grid_csv
    from .geometry import BoundaryGraph, GraphDomain
    from .orlicz import stress
    from .solver import MACGrid, SolverConfig, Transformed, make_problem, solve, strain_arrays
    from .solver.diagnostics import cell_velocity, v_distance

    try:
        phi = phi_from_config(cfg.get("phi") or cfg.get("model") or {"model": "power", "p": 2.0})
        g = cfg.get("grid", {})
        n = int(g.get("nx", g.get("n", 32)))
        if "ny" in g and int(g["ny"]) * 2 != n:
            raise ConfigError(f"half cube needs ny = nx / 2, got nx={n}, ny={g['ny']}")
        grid = MACGrid.half_cube(n, float(g.get("R", 1.0)), g.get("bottom", "slip"))
        solver_cfg = SolverConfig(**(cfg.get("solver") or {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    forcing = cfg.get("forcing", "zero")
    boundary = cfg.get("boundary", "zero")
    exact = None
    if boundary in _CASES:
        vel, grad = (getattr(ex, n) for n in _CASES[boundary])
        bc, exact = vel, grad
    elif boundary == "zero":
        bc = None
    else:
        raise ConfigError(f"unknown boundary data {boundary!r}")
    if isinstance(forcing, dict) and "cells" in forcing:
        _, F, _ = read_grid_csv(forcing["cells"])
    elif forcing == "cubic_stream":
        F = ex.cubic_stream_forcing(phi)
    else:
        try:
            F = ex.forcing_family(forcing if isinstance(forcing, str) else forcing.get("family", "zero"), None if isinstance(forcing, str) else forcing.get("exponent"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    mode = None
    dom = cfg.get("domain", "flat")
    if dom != "flat" and not (isinstance(dom, dict) and ("path" in dom or "coeffs" in dom)):
        raise ConfigError(f"solve supports flat or graph domains, got {dom!r}")
    if dom != "flat":
        cfg.setdefault("graph", dom)
    if cfg.get("graph"):
        gr = cfg["graph"]
        graph = BoundaryGraph.load(gr["path"]) if "path" in gr else BoundaryGraph.polynomial(gr["coeffs"], float(g.get("R", 1.0)))
        mode = Transformed(GraphDomain(graph))
        exact = None
    problem = make_problem(grid, phi, F, bc, mode)
    rep = solve(grid, phi, config=solver_cfg, problem=problem)
    z = np.concatenate([rep.state.u1.ravel(), rep.state.u2.ravel()])
    D = strain_arrays(problem, z)
    cg = CellGrid(grid.nx, grid.ny, grid.dx, grid.dy, grid.x0, grid.y0)
    files = [out / n for n in ("velocity.csv", "pressure.csv", "stress.csv", "residual_history.csv", "summary.json")]
    write_grid_csv(files[0], cg, cell_velocity(rep.state))
    write_grid_csv(files[1], cg, rep.state.pi, names=("pi",))
    write_grid_csv(files[2], cg, stress(phi, D))
    write_rows_csv(files[3], [{"step": k, "residual": r} for k, r in enumerate(rep.residual_history)])
    summary = {
        "seed": cfg["seed"],
        "residual": rep.residual,
        "divergence": rep.divergence,
        "converged": rep.converged,
        "stages": rep.stages,
        "rules": {"converged": rep.converged},
    }
    if exact is not None:
        summary["v_distance"] = v_distance(phi, D, exact(grid.cell_points()), grid.cell_area)
    summary["passed"] = all(summary["rules"].values())
    write_json(files[4], summary)
    return summary["passed"], files


def _run_proptest(cfg, out):
    from .properties import MODELS, orlicz_suite, oscillation_suite

    module = cfg.get("module", "orlicz")
    n = int(cfg["samples"])
    seed = int(cfg["seed"])
    if module == "orlicz":
        models = cfg.get("models") or list(MODELS)
        unknown = [m for m in models if m not in MODELS]
        if unknown:
            raise ConfigError(f"unknown models {unknown}")
        report = {m: orlicz_suite(m, n, seed) for m in models}
    elif module == "oscillation":
        report = {"oscillation": oscillation_suite(min(n, 1000), seed)}
    else:
        raise ConfigError(f"unknown module {module!r}")
    rows = [{"seed": seed, "suite": s, "property": k, **{kk: vv for kk, vv in v.items() if kk != "envelope"}} for s, props in report.items() for k, v in props.items()]
    passed = all(v["violations"] == 0 for props in report.values() for v in props.values())
    files = [out / "properties.csv", out / "summary.json"]
    write_rows_csv(files[0], rows, ["seed", "suite", "property", "max", "min", "violations"])
    write_json(files[1], {"module": module, "seed": seed, "samples": n, "results": report, "passed": passed})
    return passed, files


def run(argv=None) -> int:
    """Parse ``argv`` and execute; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s", stream=sys.stderr)
    from .solver import IllPosedData, NonConvergence

    t0 = time.perf_counter()
    try:
        cfg = resolve(args)
        if args.command == "solve" and not args.config:
            raise ConfigError("solve needs --config")
        out = _outdir(args, args.command)
        if args.command == "solve":
            passed, files = _run_solve(cfg, out)
        elif args.command == "proptest":
            passed, files = _run_proptest(cfg, out)
        else:
            passed, files = _run_experiments(args.command, cfg, out)
    except (ConfigError, IllPosedData, KeyError) as exc:
        print(f"slipstokes: config error: {exc}", file=sys.stderr)
        return 2
    except NonConvergence as exc:
        print(f"slipstokes: solver failed: {exc}", file=sys.stderr)
        return 1
    write_manifest(out, args.command, cfg, int(cfg["seed"]), time.perf_counter() - t0, files)
    log.info("wrote %s", ", ".join(str(f) for f in files))
    if not passed:
        print(f"slipstokes: {args.command}: acceptance rules FAILED (see {out / 'summary.json'})", file=sys.stderr)
    return 0 if passed else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
