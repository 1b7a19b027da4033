"""Snapshot and diagnostics files.

IWSK snapshot layout (little endian)::

    b"IWSK"  u32 version=1  u32 N_h  u32 N_y  f64 b  f64 L_y
    N_h * N_y complex values as (re, im) f64 pairs, row-major,
    Hermite index outer, Fourier index inner in FFT order.
"""
from __future__ import annotations

import csv
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .field import SpectralField, make_grid

MAGIC = b"IWSK"
VERSION = 1
_HEADER = struct.Struct("<4sIIIdd")


class SnapshotError(ValueError):
    pass


def encode_snapshot(u):
    grid = u.grid
    head = _HEADER.pack(MAGIC, VERSION, grid.N_h, grid.N_y, float(grid.b), float(grid.L_y))
    body = np.ascontiguousarray(u.coeffs, dtype="<c16").tobytes()
    return head + body


def decode_snapshot(data, grid=None):
    """Parse snapshot bytes. Without ``grid`` a default-quadrature grid is rebuilt."""
    if len(data) < _HEADER.size:
        raise SnapshotError("truncated header")
    magic, version, n_h, n_y, b, L_y = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported version {version}")
    expected = _HEADER.size + 16 * n_h * n_y
    if len(data) != expected:
        raise SnapshotError(f"expected {expected} bytes, got {len(data)}")
    coeffs = np.frombuffer(data, dtype="<c16", offset=_HEADER.size).reshape(n_h, n_y)
    if grid is None:
        grid = make_grid(b, n_h, n_y, L_y)
    elif (grid.N_h, grid.N_y, grid.b, grid.L_y) != (n_h, n_y, b, L_y):
        raise SnapshotError("snapshot header does not match the supplied grid")
    return SpectralField(grid, coeffs.astype(complex))


def atomic_write_bytes(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def write_snapshot(path, u):
    atomic_write_bytes(path, encode_snapshot(u))


def read_snapshot(path, grid=None):
    return decode_snapshot(Path(path).read_bytes(), grid)


def write_json(path, payload):
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def trajectory_rows(traj, n_modes=8):
    n_modes = min(n_modes, traj.grid.N_h)
    masses = traj.mode_masses(n_modes)
    header = ["t", "mass", "sigma2_norm"] + [f"mode{n}_mass" for n in range(n_modes)]
    rows = [[repr(float(t)), repr(float(m)), repr(float(s))] + [repr(float(v)) for v in mm]
            for t, m, s, mm in zip(traj.times, traj.mass, traj.sigma2, masses)]
    return header, rows


def write_trajectory_csv(path, traj, n_modes=8):
    import io as _io
    header, rows = trajectory_rows(traj, n_modes)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def read_trajectory_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(header)}
