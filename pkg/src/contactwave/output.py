"""Result persistence: series CSVs, a JSON summary and columnar snapshots.

Every float is written with ``repr``, the shortest text that parses back
to the same double, so files round-trip exactly. Nothing time-dependent is
written, so a rerun with the same configuration gives identical bytes.
"""

from __future__ import annotations

import gzip
import hashlib
import io
import json
import math
import os
from pathlib import Path

import numpy as np

from .errors import SchemaVersionError
from .experiments import RunRecord
from .params import PhysParams

SNAPSHOT_SCHEMA = 1
SNAPSHOT_COLUMNS = ("x", "v", "u", "theta", "V", "U", "Theta", "phi", "psi", "zeta")
DEFAULT_OUT = "contactwave_out"
OUT_ENV = "CONTACTWAVE_OUT"


def default_output_root() -> Path:
    return Path(os.environ.get(OUT_ENV, DEFAULT_OUT))


def params_hash(params: PhysParams) -> str:
    text = json.dumps({k: repr(float(v)) for k, v in params.as_dict().items()}, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_text(path: Path, text: str):
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_series_csv(path: Path, times, values):
    rows = ["t,value"]
    rows += [f"{float(t)!r},{float(v)!r}" for t, v in zip(times, values)]
    _write_text(path, "\n".join(rows) + "\n")


def read_series_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "t,value":
            raise ValueError(f"{path}: unexpected header {header!r}")
        data = [tuple(map(float, line.split(","))) for line in fh if line.strip()]
    arr = np.array(data, dtype=float).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def scenario_echo(record: RunRecord) -> dict:
    s = record.scenario
    return {
        "name": s.name,
        "seed": s.seed,
        "params": s.params.as_dict(),
        "params_hash": params_hash(s.params),
        "grid": {"half_width": s.grid.half_width, "dx": s.grid.dx, "refine": s.grid.refine},
        "t_final": s.t_final,
        "extend_factor": s.extend_factor,
        "initial": {
            "shape": s.initial.shape,
            "amp_phi": s.initial.amp_phi,
            "amp_psi": s.initial.amp_psi,
            "amp_zeta": s.initial.amp_zeta,
            "center": s.initial.center,
            "width": s.initial.width,
            "seed": s.initial.seed,
        },
    }


def summary_dict(record: RunRecord) -> dict:
    return _clean(
        {
            "scenario": scenario_echo(record),
            "ok": record.ok,
            "passed": record.passed,
            "error": record.error,
            "audits": record.audits,
            "values": record.values,
            "fits": {k: f.to_dict() for k, f in record.fits.items()},
            "tables": record.tables,
            "flags": [f.to_dict() for f in record.flags],
        }
    )


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=1) + "\n"


def emit_series(record: RunRecord, directory, compress: bool = False) -> list[Path]:
    """Write one ``series_<name>.csv`` per series, ``summary.json`` and the snapshots."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror or exc}") from exc
    written = []
    for name, series in sorted(record.series.items()):
        path = out / f"series_{name}.csv"
        write_series_csv(path, series.times, series.values)
        written.append(path)
    path = out / "summary.json"
    _write_text(path, dump_json(summary_dict(record)))
    written.append(path)
    for k, (state, profile) in enumerate(record.snapshots):
        path = out / (f"snapshot_{k:03d}.csv" + (".gz" if compress else ""))
        write_snapshot(path, state, profile, record.scenario.params, record.grid.x, compress)
        written.append(path)
    return written


# --------------------------------------------------------------------------
# Snapshots


def snapshot_text(state, profile, params: PhysParams, x) -> str:
    cols = [
        np.asarray(x), state.v, state.u, state.theta, profile.V, profile.U, profile.Theta,
        state.v - profile.V, state.u - profile.U, state.theta - profile.Theta,
    ]
    buf = io.StringIO()
    buf.write(f"# schema={SNAPSHOT_SCHEMA}\n")
    buf.write(f"# params_hash={params_hash(params)}\n")
    buf.write(f"# t={float(state.t)!r}\n")
    buf.write(",".join(SNAPSHOT_COLUMNS) + "\n")
    for row in zip(*(c.tolist() for c in cols)):
        buf.write(",".join(repr(v) for v in row) + "\n")
    return buf.getvalue()


def write_snapshot(path, state, profile, params: PhysParams, x, compress: bool = False):
    """Write one snapshot on nodes ``x``; gzip when asked or when the name ends in .gz."""
    path = Path(path)
    text = snapshot_text(state, profile, params, x)
    try:
        if compress or path.suffix == ".gz":
            # mtime=0 and no stored filename keep the bytes reproducible
            with open(path, "wb") as raw, gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as gz:
                gz.write(text.encode())
        else:
            path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_snapshot(path, expected_schema: int = SNAPSHOT_SCHEMA) -> dict:
    """Read a snapshot into {'t', 'params_hash', 'schema', column arrays}.

    Raises SchemaVersionError when the file's schema differs from ``expected_schema``.
    """
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt", encoding="utf-8") as fh:
        text = fh.read()
    lines = text.splitlines()
    meta = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, _, value = lines[i][1:].strip().partition("=")
        meta[key.strip()] = value.strip()
        i += 1
    schema = int(meta.get("schema", "-1"))
    if schema != expected_schema:
        raise SchemaVersionError(
            f"{path}: snapshot schema {schema} cannot be read by a reader expecting schema {expected_schema}"
        )
    header = tuple(lines[i].split(","))
    if header != SNAPSHOT_COLUMNS:
        raise SchemaVersionError(f"{path}: columns {header} do not match schema {schema}")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[i + 1 :] if ln], dtype=float)
    out = {"schema": schema, "params_hash": meta.get("params_hash", ""), "t": float(meta["t"])}
    for k, name in enumerate(SNAPSHOT_COLUMNS):
        out[name] = data[:, k] if data.size else np.zeros(0)
    return out
