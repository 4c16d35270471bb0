"""Artifact emission: schema-validated JSON reports, CSV series, binary dumps.

Every writer is deterministic: fixed key order, fixed float formatting, no
timestamps.  Identical inputs produce identical bytes, which the test suite
checks; reports validate against the schemas shipped with the package.
"""

from __future__ import annotations

import json
import struct
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import jsonschema
except ImportError:  # pragma: no cover - hard dependency, but degrade gently
    jsonschema = None

__all__ = ["ConfigError", "load_config", "validate", "write_json",
           "write_csv", "write_trajectory_csv", "write_trajectory_binary",
           "read_trajectory_binary", "write_modes_csv"]

FLOAT_FMT = "%.17g"


class ConfigError(ValueError):
    """Configuration file malformed or schema-invalid."""


def _schema(name: str) -> dict:
    path = resources.files("ringflow") / "schemas" / f"{name}.schema.json"
    return json.loads(path.read_text())


def validate(obj: dict, schema_name: str) -> None:
    if jsonschema is None:
        return
    try:
        jsonschema.validate(obj, _schema(schema_name))
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{schema_name} schema violation: {exc.message}") from exc


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    validate(cfg, "config")
    return cfg


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, obj: dict, schema_name: str = None) -> None:
    obj = _jsonable(obj)
    if schema_name is not None:
        validate(obj, schema_name)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def write_csv(path, header, columns) -> None:
    """Column-oriented CSV with fixed float formatting."""
    cols = [np.asarray(c) for c in columns]
    n = len(cols[0])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            cells = []
            for c in cols:
                v = c[i]
                if isinstance(v, (np.floating, float)):
                    cells.append(FLOAT_FMT % v)
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")


def write_trajectory_csv(path, traj) -> None:
    """Long format (t, k, x, v), one row per particle per sample."""
    t = traj.times
    pos = traj.positions
    vel = traj.velocities
    S, N = pos.shape
    tt = np.repeat(t, N)
    kk = np.tile(np.arange(N), S)
    write_csv(path, ["t", "k", "x", "v"],
              [tt, kk, pos.reshape(-1), vel.reshape(-1)])


def write_trajectory_binary(path, traj) -> None:
    """Header (uint64 N, uint64 samples), then little-endian float64 blocks:
    times, positions (row-major samples x particles), velocities."""
    t = np.asarray(traj.times, dtype="<f8")
    pos = np.ascontiguousarray(traj.positions, dtype="<f8")
    vel = np.ascontiguousarray(traj.velocities, dtype="<f8")
    S, N = pos.shape
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", N, S))
        fh.write(t.tobytes())
        fh.write(pos.tobytes())
        fh.write(vel.tobytes())


def read_trajectory_binary(path):
    """Returns (times, positions, velocities) from the binary layout."""
    raw = Path(path).read_bytes()
    N, S = struct.unpack_from("<QQ", raw, 0)
    off = 16
    t = np.frombuffer(raw, dtype="<f8", count=S, offset=off)
    off += 8 * S
    pos = np.frombuffer(raw, dtype="<f8", count=S * N, offset=off).reshape(S, N)
    off += 8 * S * N
    vel = np.frombuffer(raw, dtype="<f8", count=S * N, offset=off).reshape(S, N)
    return t, pos, vel


def write_modes_csv(path, field, stride: int = 1) -> None:
    """Mode series (n, t, re, im, weight), downsampled in t by stride."""
    t = field.times[::stride]
    vals = field.values[:, ::stride]
    N, S = vals.shape
    nn = np.repeat(np.arange(N), S)
    tt = np.tile(t, N)
    ww = np.repeat(field.weights, S)
    write_csv(path, ["n", "t", "re", "im", "weight"],
              [nn, tt, vals.real.reshape(-1), vals.imag.reshape(-1), ww])
