"""CSV ingestion/emission and run manifests.

Floats are written with ``repr`` (shortest round-trip form), which is
locale-independent and full precision.
"""
from __future__ import annotations

import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__


SIMULATE_EXTRA_COLUMNS = ("phi_r_deg", "saturated", "h", "v", "d", "a")


class ParseError(ValueError):
    pass


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header, columns):
    """Write equal-length ``columns`` under ``header``; newline is always ``\\n``."""
    path = Path(path)
    rows = zip(*columns)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_numeric_csv(path, required, optional=()):
    """Read a headed numeric CSV into a dict of float arrays.

    Blank lines and ``#`` comments are skipped. Errors name the offending line.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        lines = [(i, row) for i, row in enumerate(csv.reader(fh), start=1)
                 if row and any(cell.strip() for cell in row) and not row[0].lstrip().startswith("#")]
    if not lines:
        raise ParseError(f"{path}: empty data file")
    header_line, header = lines[0]
    header = [h.strip() for h in header]
    missing = [c for c in required if c not in header]
    if missing:
        raise ParseError(f"{path}:{header_line}: header lacks column(s) {missing}; got {header}")
    unknown = [c for c in header if c not in required and c not in optional]
    if unknown:
        raise ParseError(f"{path}:{header_line}: unexpected column(s) {unknown}")
    data = {c: [] for c in header}
    for lineno, row in lines[1:]:
        if len(row) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        for name, cell in zip(header, row):
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: column {name!r} is not a number: {cell!r}") from None
            if not np.isfinite(value):
                raise ParseError(f"{path}:{lineno}: column {name!r} is not finite")
            data[name].append(value)
    if not data[required[0]]:
        raise ParseError(f"{path}: no data rows")
    return {k: np.asarray(v, dtype=float) for k, v in data.items()}


def read_phase_csv(path):
    """``detuning_ueV,phi_deg[,weight]`` -> (detuning ueV, phi rad, weight).

    The extra columns written by ``simulate-phase`` are accepted and ignored, so
    its output can be fed straight back to ``fit``.
    """
    data = read_numeric_csv(path, ("detuning_ueV", "phi_deg"), ("weight",) + SIMULATE_EXTRA_COLUMNS)
    det = data["detuning_ueV"]
    if np.any(np.diff(det) <= 0):
        bad = int(np.flatnonzero(np.diff(det) <= 0)[0]) + 1
        raise ParseError(f"{path}: detunings must be strictly increasing (data row {bad + 1})")
    weight = data.get("weight")
    if weight is not None and np.any(weight < 0):
        raise ParseError(f"{path}: weights must be >= 0")
    return det, np.radians(data["phi_deg"]), weight


def read_gamma_table(path):
    """``detuning_meV,gamma_ratio`` -> (detuning ueV, ratio)."""
    data = read_numeric_csv(path, ("detuning_meV", "gamma_ratio"))
    return data["detuning_meV"] * 1000.0, data["gamma_ratio"]


def read_lifetime_csv(path):
    """``detuning_meV,inverse_t1_per_ns`` -> (detuning ueV, 1/T1)."""
    data = read_numeric_csv(path, ("detuning_meV", "inverse_t1_per_ns"))
    return data["detuning_meV"] * 1000.0, data["inverse_t1_per_ns"]


def finite_or_none(obj):
    """Recursively replace non-finite floats by None so the JSON stays strict."""
    if isinstance(obj, dict):
        return {k: finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [finite_or_none(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return finite_or_none(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def write_json(path, obj):
    Path(path).write_text(json.dumps(finite_or_none(obj), indent=2, allow_nan=False) + "\n")


def manifest_path(out_path) -> Path:
    out_path = Path(out_path)
    return out_path.with_name(out_path.name + ".manifest.json")


def write_manifest(out_path, cfg, started, extra=None, argv=None):
    """Sidecar JSON describing how ``out_path`` was produced.

    Timestamps live only here, so data files stay byte-identical across reruns.
    """
    manifest = {
        "output": Path(out_path).name,
        "config_digest": cfg.digest(),
        "tool_version": __version__,
        "seed": cfg.jitter.seed,
        "started_utc": started.isoformat(),
        "finished_utc": datetime.now(timezone.utc).isoformat(),
        "command_line": list(sys.argv if argv is None else argv),
        "config": cfg.to_dict(),
    }
    if extra:
        manifest.update(extra)
    path = manifest_path(out_path)
    write_json(path, manifest)
    return path
