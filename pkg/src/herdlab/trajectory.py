"""Uniformly sampled time series and their on-disk formats.

CSV layout: ``#``-prefixed metadata lines (``# key: <json>``, the first one
always ``# grid: {"t0": .., "dt": ..}``), one header row
``t,<col>,...``, then LF-terminated rows with ``.`` decimals.

Binary layout, all integers unsigned 64-bit little-endian, floats IEEE
binary64 little-endian::

    b"HLTRAJ01"                 magic, 8 bytes
    u64 meta_len, meta_len bytes of UTF-8 JSON (includes "columns")
    u64 n_rows, u64 n_cols
    f64 t0, f64 dt
    n_rows*n_cols f64 values, row-major
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np

__all__ = ["Trajectory", "EventLog", "Occupation", "read_csv", "read_binary"]

_MAGIC = b"HLTRAJ01"


@dataclass
class Occupation:
    """Time-weighted occupancy collected alongside a simulation.

    ``weights[k]`` is the time spent in bin/state ``k`` after burn-in and
    ``visits[k]`` the number of integration steps or jump-chain visits.
    """

    weights: np.ndarray
    visits: np.ndarray
    edges: Optional[np.ndarray] = None

    @property
    def pmf(self) -> np.ndarray:
        total = self.weights.sum()
        return self.weights / total if total > 0 else self.weights.copy()


@dataclass
class Trajectory:
    """Values sampled at ``t0 + k*dt``; ``values`` has shape ``(n,)`` or ``(n, k)``."""

    t0: float
    dt: float
    values: np.ndarray
    columns: Sequence[str] = ("value",)
    meta: Dict[str, Any] = field(default_factory=dict)
    occupation: Optional[Occupation] = None
    events: Optional["EventLog"] = None

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.values.shape[0] == 0:
            raise ValueError("trajectory must be non-empty")
        ncol = 1 if self.values.ndim == 1 else self.values.shape[1]
        if len(self.columns) != ncol:
            raise ValueError(f"{len(self.columns)} column names for {ncol} columns")
        self.columns = tuple(self.columns)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    def column(self, name: str) -> np.ndarray:
        if self.values.ndim == 1:
            if name != self.columns[0]:
                raise KeyError(name)
            return self.values
        return self.values[:, self.columns.index(name)]

    def with_values(self, values: np.ndarray, columns: Sequence[str], skip: int = 0, **meta) -> "Trajectory":
        """Same grid spacing, starting ``skip`` samples later, new values."""
        return Trajectory(self.t0 + skip * self.dt, self.dt, values, columns, {**self.meta, **meta})

    def drop_burn_in(self, fraction: float) -> "Trajectory":
        k = int(round(fraction * len(self)))
        return Trajectory(self.t0 + k * self.dt, self.dt, self.values[k:], self.columns, dict(self.meta))

    # -- CSV ---------------------------------------------------------------

    def to_csv(self, path) -> None:
        buf = io.StringIO()
        buf.write(f"# grid: {json.dumps({'t0': self.t0, 'dt': self.dt})}\n")
        for key, val in self.meta.items():
            buf.write(f"# {key}: {json.dumps(val, sort_keys=True)}\n")
        buf.write(",".join(("t",) + tuple(self.columns)) + "\n")
        data = np.column_stack([self.times, self.values.reshape(len(self), -1)])
        np.savetxt(buf, data, delimiter=",", fmt="%.17g")
        Path(path).write_text(buf.getvalue(), newline="\n")

    # -- binary ------------------------------------------------------------

    def to_binary(self, path) -> None:
        meta = dict(self.meta)
        meta["columns"] = list(self.columns)
        blob = json.dumps(meta, sort_keys=True).encode("utf-8")
        vals = np.ascontiguousarray(self.values.reshape(len(self), -1), dtype="<f8")
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            fh.write(struct.pack("<QQdd", vals.shape[0], vals.shape[1], self.t0, self.dt))
            fh.write(vals.tobytes())


@dataclass
class EventLog:
    """Event times (strictly increasing) and the channel index that fired."""

    times: np.ndarray
    channels: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.channels = np.asarray(self.channels, dtype=np.int64)
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("event times must be strictly increasing")


def read_csv(path) -> Trajectory:
    meta = {}
    header = None
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(":")
                meta[key.strip()] = json.loads(val)
            else:
                header = line.strip().split(",")
                break
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if header is None or header[0] != "t":
        raise ValueError(f"{path}: missing 't,...' header row")
    grid = meta.pop("grid", None)
    if grid is None:
        t = data[:, 0]
        grid = {"t0": float(t[0]), "dt": float(t[1] - t[0]) if len(t) > 1 else 1.0}
    values = data[:, 1] if data.shape[1] == 2 else data[:, 1:]
    return Trajectory(grid["t0"], grid["dt"], values, header[1:], meta)


def read_binary(path) -> Trajectory:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError(f"{path}: not a trajectory file")
        (mlen,) = struct.unpack("<Q", fh.read(8))
        meta = json.loads(fh.read(mlen).decode("utf-8"))
        n, k, t0, dt = struct.unpack("<QQdd", fh.read(32))
        vals = np.frombuffer(fh.read(8 * n * k), dtype="<f8").reshape(n, k)
    columns = meta.pop("columns")
    values = vals[:, 0].copy() if k == 1 else vals.copy()
    return Trajectory(t0, dt, values, columns, meta)
