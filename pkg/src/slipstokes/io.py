"""Config parsing and deterministic CSV/JSON artifacts."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
from pathlib import Path

import numpy as np

__all__ = [
    "ConfigError",
    "load_config",
    "config_hash",
    "to_jsonable",
    "write_json",
    "write_rows_csv",
    "file_sha256",
    "write_manifest",
    "phi_from_config",
]


class ConfigError(ValueError):
    """Invalid or unreadable run configuration."""


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def to_jsonable(obj):
    """Recursively convert numpy scalars and non-finite floats (as strings)."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def config_hash(config: dict) -> str:
    blob = json.dumps(to_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows_csv(path, rows, columns=None) -> None:
    """Write dict rows with a fixed column order; floats use ``repr`` for exact round trips."""
    rows = list(rows)
    if columns is None:
        columns = []
        for r in rows:
            columns.extend(k for k in r if k not in columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(outdir, command: str, config: dict, seed: int, wall_time: float, files) -> Path:
    """Write ``manifest.json`` with the config hash, library versions, wall time and file hashes."""
    import scipy

    from . import __version__

    outdir = Path(outdir)
    manifest = {
        "command": command,
        "config": config,
        "config_sha256": config_hash(config),
        "seed": seed,
        "wall_time_s": wall_time,
        "versions": {
            "slipstokes": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "files": {Path(f).name: file_sha256(f) for f in sorted(files)},
    }
    path = outdir / "manifest.json"
    write_json(path, manifest)
    return path


def phi_from_config(cfg) -> "object":
    """Potential from ``{"model": "power"|"carreau"|"table", "p": ..., "mu0": ..., "path": ...}``."""
    from .orlicz import load_table, make_carreau, make_power

    if not isinstance(cfg, dict):
        raise ConfigError("phi must be an object")
    model = cfg.get("model", "power")
    try:
        if model == "power":
            return make_power(float(cfg["p"]), float(cfg.get("mu0", 1.0)))
        if model == "carreau":
            return make_carreau(float(cfg["p"]), float(cfg.get("mu0", 1.0)))
        if model == "table":
            return load_table(cfg["path"])
    except KeyError as exc:
        raise ConfigError(f"phi: missing key {exc.args[0]!r}") from exc
    except (ValueError, OSError) as exc:
        raise ConfigError(f"phi: {exc}") from exc
    raise ConfigError(f"phi: unknown model {model!r}")
