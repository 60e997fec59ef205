"""Readers and writers: CSV / binary paths, NDJSON snapshots, JSON results."""
from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .pde import Grid, GridFunction, SpaceTimePath

_MAGIC = b"LGPATH1\0"
_HEADER = struct.Struct("<8sqqqd16s8s")


def _fmt(x):
    return repr(float(x))


def write_path_csv(path, file):
    """Long format: one row (t, u, value) per frame and grid point."""
    u = path.grid.coords(path.loc)
    with open(file, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "u", "value"])
        for t, frame in zip(path.times, path.frames):
            for x, val in zip(u, frame):
                w.writerow([_fmt(t), _fmt(x), _fmt(val)])


def read_path_csv(file, M, periodic=False, kind="density", loc="node"):
    data = np.loadtxt(file, delimiter=",", skiprows=1, ndmin=2)
    grid = Grid(M, periodic)
    npts = grid.coords(loc).size
    if data.shape[0] % npts:
        raise ValidationError("row count is not a multiple of the grid size")
    frames = data[:, 2].reshape(-1, npts)
    times = data[::npts, 0]
    return SpaceTimePath(grid, times, frames, kind, loc)


def write_path_binary(path, file):
    """Header (magic, M, periodic, K frames, dt, kind, loc) then float64 frames, little endian."""
    K = path.times.size
    dt = path.dt if K > 1 else 0.0
    head = _HEADER.pack(_MAGIC, path.grid.M, int(path.grid.periodic), K, dt,
                        path.kind.encode()[:16], path.loc.encode()[:8])
    with open(file, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(path.frames, dtype="<f8").tobytes())


def read_path_binary(file):
    raw = Path(file).read_bytes()
    magic, M, periodic, K, dt, kind, loc = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValidationError("not a latgas path file")
    grid = Grid(M, bool(periodic))
    kind = kind.rstrip(b"\0").decode()
    loc = loc.rstrip(b"\0").decode()
    npts = grid.coords(loc).size
    frames = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(K, npts)
    return SpaceTimePath(grid, np.arange(K) * dt, frames.copy(), kind, loc)


def read_profile_csv(file, grid):
    """Tabulated profile (u, value), interpolated linearly onto the grid nodes."""
    data = np.loadtxt(file, delimiter=",", ndmin=2, comments="#",
                      skiprows=_header_rows(file))
    if data.shape[1] < 2:
        raise ValidationError(f"{file}: need two columns u,value")
    u, v = data[:, 0], data[:, 1]
    if np.any(np.diff(u) <= 0):
        raise ValidationError(f"{file}: u must be strictly increasing")
    return GridFunction(grid, np.interp(grid.nodes, u, v), "density")


def _header_rows(file):
    with open(file) as fh:
        first = fh.readline()
    try:
        [float(x) for x in first.split(",")]
        return 0
    except ValueError:
        return 1


def write_trajectory_ndjson(trajectories, file):
    """One JSON object per snapshot: replica, t, eta (sites 1..N-1), W (bonds 0..N-1)."""
    with open(file, "w") as fh:
        for tr in trajectories:
            for k in range(len(tr)):
                rec = {"replica": tr.replica, "t": float(tr.times[k]),
                       "eta": tr.eta[k].tolist(), "W": tr.W[k].tolist()}
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def write_profile_stats_csv(stats, file, exact=None):
    with open(file, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["site", "mean", "stderr"] + (["exact", "z"] if exact is not None else [])
        w.writerow(head)
        for i, (m, s) in enumerate(zip(stats.mean, stats.mean_stderr)):
            row = [i + 1, _fmt(m), _fmt(s)]
            if exact is not None:
                z = (m - exact[i]) / s if s > 0 else math.nan
                row += [_fmt(exact[i]), _fmt(z)]
            w.writerow(row)


def write_correlation_csv(stats, file, pairs=None, exact=None):
    """Rows (x, y, corr, stderr[, exact]) for the given pairs or all x < y."""
    N = stats.N
    if pairs is None:
        pairs = [(x, y) for x in range(1, N) for y in range(x + 1, N)]
    with open(file, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "corr", "stderr"] + (["exact"] if exact else []))
        for x, y in pairs:
            c, s = stats.correlation(x, y)
            row = [x, y, _fmt(c), _fmt(s)]
            if exact:
                row.append(_fmt(exact(x, y)))
            w.writerow(row)


def write_phase_csv(report, file):
    with open(file, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "U", "U_envelope", "traveling_wave", "class"])
        for q, U, env, tw, lab in report.rows():
            w.writerow([_fmt(q), _fmt(U), _fmt(env), _fmt(tw), lab])


def to_jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(obj, file):
    with open(file, "w") as fh:
        json.dump(to_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
