"""Plain-text persistence: trajectory CSVs and initial-condition files.

Trajectory CSV layout::

    # key = <json value>          (metadata, one per line)
    t,Re_d1u,Im_d1u,Re_d1d,Im_d1d,...,amp_1u,amp_1d,...
    0,0,0,0,0,...,1,1,...

Floats are written with ``%.17g`` so a write/read round trip is lossless
and identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .oscillator import NodeTrajectory
from .phase import OVERFLOW_GUARD, Trajectory, amplitudes, mode_labels

FLOAT_FMT = "%.17g"


class FormatError(ValueError):
    """Malformed input file."""


def trajectory_columns(m: int) -> list[str]:
    labels = mode_labels(m)
    cols = ["t"]
    for lab in labels:
        cols += [f"Re_d{lab}", f"Im_d{lab}"]
    cols += [f"amp_{lab}" for lab in labels]
    return cols


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def _write_meta(fh, meta: dict) -> None:
    for key in sorted(meta):
        fh.write(f"# {key} = {json.dumps(meta[key], sort_keys=True)}\n")


def _read_meta_line(line: str, meta: dict) -> None:
    body = line[1:].strip()
    if "=" not in body:
        return
    key, _, value = body.partition("=")
    try:
        meta[key.strip()] = json.loads(value.strip())
    except json.JSONDecodeError:
        meta[key.strip()] = value.strip()


def write_table(path, header: list[str], columns: list[np.ndarray], meta: dict | None = None) -> Path:
    """Write equal-length numeric columns as CSV with an optional ``#`` header."""
    path = Path(path)
    rows = len(columns[0]) if columns else 0
    if any(len(c) != rows for c in columns):
        raise ValueError("columns differ in length")
    with path.open("w", newline="") as fh:
        if meta:
            _write_meta(fh, meta)
        fh.write(",".join(header) + "\n")
        for i in range(rows):
            fh.write(",".join(_fmt(float(c[i])) for c in columns) + "\n")
    return path


def read_table(path) -> tuple[dict, list[str], np.ndarray]:
    """Inverse of :func:`write_table`: ``(meta, header, data[rows, cols])``."""
    meta: dict = {}
    header = None
    rows = []
    with Path(path).open(newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                _read_meta_line(line, meta)
                continue
            if not line.strip():
                continue
            if header is None:
                header = next(csv.reader([line]))
                continue
            rows.append([float(x) for x in line.strip().split(",")])
    if header is None:
        raise FormatError(f"{path}: no header row")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return meta, header, data


def write_trajectory_csv(path, traj: Trajectory, guard: float = OVERFLOW_GUARD) -> Path:
    amps, saturated = amplitudes(traj, guard)
    cols = [traj.times]
    for lab in traj.labels:
        cols += [traj.re(lab), traj.im(lab)]
    cols += [amps[lab] for lab in traj.labels]
    meta = dict(traj.meta)
    meta["m"] = traj.m
    meta["diverged"] = bool(traj.diverged)
    meta["halt_time"] = traj.halt_time
    meta["saturated"] = sorted(k for k, v in saturated.items() if v)
    return write_table(path, trajectory_columns(traj.m), cols, meta)


def read_trajectory_csv(path) -> Trajectory:
    meta, header, data = read_table(path)
    if "m" not in meta:
        raise FormatError(f"{path}: metadata lacks 'm'")
    m = int(meta["m"])
    expected = trajectory_columns(m)
    if header != expected:
        raise FormatError(f"{path}: unexpected columns {header}")
    col = {name: i for i, name in enumerate(header)}
    labels = mode_labels(m)
    ups, dns = labels[0::2], labels[1::2]
    blocks = [[f"Re_d{lab}" for lab in ups], [f"Im_d{lab}" for lab in ups],
              [f"Re_d{lab}" for lab in dns], [f"Im_d{lab}" for lab in dns]]
    order = [col[name] for block in blocks for name in block]
    states = data[:, order] if len(data) else np.empty((0, 4 * m))
    diverged = bool(meta.pop("diverged", False))
    halt = meta.pop("halt_time", None)
    meta.pop("saturated", None)
    return Trajectory(data[:, 0].copy() if len(data) else np.empty(0), states.copy(), m,
                      meta, diverged=diverged, halt_time=halt)


def read_initial_conditions(path) -> tuple[np.ndarray, np.ndarray]:
    """Initial-condition file: one ``x v`` pair per node, ``#`` comments allowed."""
    xs, vs = [], []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected 'x v', got {line!r}")
            try:
                xs.append(float(parts[0]))
                vs.append(float(parts[1]))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    return np.array(xs), np.array(vs)


def write_node_trajectory_csv(path_or_fh, traj: NodeTrajectory) -> None:
    """``t, x_0..x_{n-1}, v_0..v_{n-1}`` (velocities only when present)."""
    n = traj.x.shape[1]
    header = ["t"] + [f"x_{i}" for i in range(n)]
    cols = [traj.times] + [traj.x[:, i].real for i in range(n)]
    if traj.v is not None:
        header += [f"v_{i}" for i in range(n)]
        cols += [traj.v[:, i].real for i in range(n)]
    if hasattr(path_or_fh, "write"):
        _write_meta(path_or_fh, traj.meta)
        path_or_fh.write(",".join(header) + "\n")
        for i in range(len(traj.times)):
            path_or_fh.write(",".join(_fmt(float(c[i])) for c in cols) + "\n")
    else:
        write_table(path_or_fh, header, cols, traj.meta)
