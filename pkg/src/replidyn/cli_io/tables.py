"""CSV output: trajectories and basin maps."""

from __future__ import annotations

import csv
import io
from typing import BinaryIO

import numpy as np

from replidyn.analysis import BasinMap
from replidyn.integrate import Termination, TerminationKind, Trajectory

__all__ = ["fmt", "read_trajectory_csv", "write_basins_csv", "write_trajectory_csv"]


def fmt(v: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(v), ".17g")


def _write_text(sink: BinaryIO, text: str):
    sink.write(text.encode("utf-8"))


def write_trajectory_csv(traj: Trajectory, sink: BinaryIO) -> None:
    if len(traj.t) == 0:
        raise ValueError("empty trajectory")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("t", "x", "y"))
    for row in zip(traj.t, traj.x, traj.y):
        writer.writerow([fmt(v) for v in row])
    buf.write(f"#termination={traj.termination}\n")
    buf.write(f"#accepted={traj.accepted}\n")
    buf.write(f"#rejected={traj.rejected}\n")
    _write_text(sink, buf.getvalue())


def _parse_termination(text: str) -> Termination:
    for kind in TerminationKind:
        if text.startswith(kind.value):
            rest = text[len(kind.value):]
            if kind is TerminationKind.OrbitClosed:
                return Termination(kind, period=float(rest.strip("()")))
            return Termination(kind, message=rest.strip("()"))
    raise ValueError(f"unknown termination {text!r}")


def read_trajectory_csv(source: BinaryIO) -> Trajectory:
    """Inverse of :func:`write_trajectory_csv` (sink locations are kept as text)."""
    lines = source.read().decode("utf-8").split("\n")
    if lines[0] != "t,x,y":
        raise ValueError("missing t,x,y header")
    rows, meta = [], {}
    for line in lines[1:]:
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key] = value
        else:
            rows.append([float(v) for v in line.split(",")])
    data = np.array(rows, dtype=float).reshape(-1, 3)
    term = _parse_termination(meta.get("termination", "ReachedTMax"))
    return Trajectory(
        data[:, 0].copy(), data[:, 1].copy(), data[:, 2].copy(), term,
        int(meta.get("accepted", 0)), int(meta.get("rejected", 0)),
    )


def write_basins_csv(bm: BasinMap, sink: BinaryIO) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("i", "j", "x", "y", "label"))
    for i in range(bm.n):
        for j in range(bm.n):
            x, y = bm.center(i, j)
            writer.writerow((i, j, fmt(x), fmt(y), bm.labels[i, j]))
    _write_text(sink, buf.getvalue())
