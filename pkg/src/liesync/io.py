"""Trajectory, diagnostics and summary persistence.

CSV files use ``repr``-exact float formatting (``%.17g``), so identical runs
produce byte-identical files.  The binary snapshot stores a versioned header
followed by little-endian doubles and round-trips states exactly.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .analysis import DiagnosticsRecord
from .dynamics import Event, Trajectory
from .lie_core import GroupDescriptor

__all__ = [
    "SnapshotError",
    "trajectory_columns",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_snapshot",
    "read_snapshot",
    "write_diagnostics_csv",
    "write_summary",
    "read_summary",
]

MAGIC = b"LSYNCSNP"
VERSION = 1
_HEADER = struct.Struct("<8sHHIII")  # magic, version, family length, d, N, M


class SnapshotError(ValueError):
    pass


def _fmt(x: float) -> str:
    return "%.17g" % x


def trajectory_columns(N: int, d: int) -> list[str]:
    cols = ["t"]
    for i in range(N):
        for r in range(d):
            for c in range(d):
                cols += [f"X{i}_{r}{c}_re", f"X{i}_{r}{c}_im"]
    cols.append("membership")
    return cols


def write_trajectory_csv(path, traj: Trajectory) -> None:
    """One row per recorded state: time, row-major real/imag pairs, drift."""
    M, N, d, _ = traj.states.shape
    flat = np.stack([traj.states.real, traj.states.imag], axis=-1).reshape(M, -1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_columns(N, d))
        for k in range(M):
            w.writerow([_fmt(traj.times[k]), *map(_fmt, flat[k]), _fmt(traj.membership[k])])


def read_trajectory_csv(path, group: GroupDescriptor) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float).reshape(len(rows) - 1, -1)
    d = group.matrix_size
    N = (len(header) - 2) // (2 * d * d)
    vals = body[:, 1:-1].reshape(-1, N, d, d, 2)
    states = vals[..., 0] + 1j * vals[..., 1]
    return Trajectory(group, body[:, 0], states, body[:, -1])


def write_snapshot(path, traj: Trajectory) -> None:
    """Binary dump: header, times, then states as interleaved (re, im) doubles."""
    fam = traj.group.family.encode()
    M, N, d, _ = traj.states.shape
    ev = b""
    if traj.event is not None:
        ev = f"{traj.event.kind}|{traj.event.t_last_valid!r}|{traj.event.t_detected!r}|{traj.event.reason}".encode()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, len(fam), d, N, M))
        fh.write(fam)
        fh.write(struct.pack("<I", len(ev)))
        fh.write(ev)
        fh.write(np.asarray(traj.times, dtype="<f8").tobytes())
        inter = np.stack([traj.states.real, traj.states.imag], axis=-1)
        fh.write(np.ascontiguousarray(inter, dtype="<f8").tobytes())
        fh.write(np.asarray(traj.membership, dtype="<f8").tobytes())


def read_snapshot(path, group: GroupDescriptor) -> Trajectory:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise SnapshotError("file too short for a snapshot header")
    magic, version, flen, d, N, M = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise SnapshotError("not a snapshot file")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    off = _HEADER.size
    fam = data[off:off + flen].decode()
    off += flen
    if fam != group.family or d != group.matrix_size:
        raise SnapshotError(f"snapshot is for {fam}({d}), not {group.family}({group.matrix_size})")
    (elen,) = struct.unpack_from("<I", data, off)
    off += 4
    ev_raw = data[off:off + elen].decode()
    off += elen
    times = np.frombuffer(data, "<f8", M, off).copy()
    off += 8 * M
    inter = np.frombuffer(data, "<f8", M * N * d * d * 2, off).reshape(M, N, d, d, 2)
    off += 8 * inter.size
    membership = np.frombuffer(data, "<f8", M, off).copy()
    event = None
    if ev_raw:
        kind, t0, t1, reason = ev_raw.split("|", 3)
        event = Event(kind, float(t0), float(t1), reason)
    return Trajectory(group, times, inter[..., 0] + 1j * inter[..., 1], membership, event)


def write_diagnostics_csv(path, records: Iterable[DiagnosticsRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DiagnosticsRecord.columns())
        for rec in records:
            w.writerow([_fmt(v) for v in rec.as_tuple()])


def _value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return _fmt(float(v))
    return str(v)


def write_summary(path, items: Mapping[str, object]) -> None:
    """``key = value`` lines in insertion order."""
    lines = [f"{k} = {_value(v)}" for k, v in items.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_summary(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line and not line.lstrip().startswith("#"):
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out
