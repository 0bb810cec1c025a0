"""Binary snapshots, trace CSV and PGM renders."""
from __future__ import annotations

import base64
import csv
import os
import struct

import numpy as np

from .diagnostics import TRACE_COLUMNS, DiagnosticsRecord
from .grid import Grid2D, MACField
from .model import SimState

MAGIC = "NSCHS1"
HEADER_BYTES = 64


class SnapshotError(ValueError):
    pass


def _enc(x: float) -> str:
    return base64.urlsafe_b64encode(struct.pack("<d", x)).decode("ascii").rstrip("=")


def _dec(s: str) -> float:
    return struct.unpack("<d", base64.urlsafe_b64decode(s + "="))[0]


def write_snapshot(state: SimState, path: str) -> None:
    """64-byte text header, then little-endian float64 phi, rho, p, ux, uy in C order.

    The header floats are base64 of their 8 raw bytes, so they round-trip exactly.
    """
    g = state.grid
    head = f"{MAGIC} {g.nx} {g.ny} {_enc(g.Lx)} {_enc(g.Ly)} {_enc(state.t)}"
    if len(head) >= HEADER_BYTES:
        raise SnapshotError("grid too large for the snapshot header")
    head = head.ljust(HEADER_BYTES - 1) + "\n"
    with open(path, "wb") as fh:
        fh.write(head.encode("ascii"))
        for arr in (state.phi, state.rho, state.p, state.u.ux, state.u.uy):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_snapshot(path: str) -> SimState:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < HEADER_BYTES:
        raise SnapshotError("shape mismatch: file shorter than the header")
    parts = data[:HEADER_BYTES].decode("ascii", errors="replace").split()
    if not parts or parts[0] != MAGIC or len(parts) != 6:
        raise SnapshotError("bad magic: not a snapshot file")
    try:
        nx, ny = int(parts[1]), int(parts[2])
        Lx, Ly, t = (_dec(s) for s in parts[3:6])
    except (ValueError, struct.error) as exc:
        raise SnapshotError(f"corrupt header: {exc}") from None
    shapes = [(nx, ny), (nx, ny), (nx, ny), (nx + 1, ny), (nx, ny + 1)]
    need = HEADER_BYTES + 8 * sum(a * b for a, b in shapes)
    if len(data) != need:
        raise SnapshotError(f"shape mismatch: expected {need} bytes for {nx}x{ny}, found {len(data)}")
    arrays, off = [], HEADER_BYTES
    for shp in shapes:
        n = shp[0] * shp[1]
        arrays.append(np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(shp).astype(float))
        off += 8 * n
    g = Grid2D(nx, ny, Lx, Ly)
    phi, rho, p, ux, uy = arrays
    return SimState(g, phi, rho, u=MACField(ux, uy), p=p, t=t)


class TraceWriter:
    """Streams trace rows; floats are written with ``repr`` so reruns are byte-identical."""

    def __init__(self, path: str):
        self._fh = open(path, "w", newline="", encoding="ascii")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(TRACE_COLUMNS)

    def write(self, rec: DiagnosticsRecord) -> None:
        self._w.writerow([repr(v) if isinstance(v, float) else str(v) for v in rec.row()])

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trace(path: str) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if tuple(header) != TRACE_COLUMNS:
        raise ValueError("unexpected trace header")
    cols = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: cols[:, i] for i, name in enumerate(header)}


def write_pgm(field: np.ndarray, path: str) -> None:
    """8-bit binary PGM, linearly mapping [min, max] to [0, 255]; x to the right, y up."""
    f = np.asarray(field, dtype=float)
    lo, hi = float(f.min()), float(f.max())
    scaled = np.zeros_like(f) if hi <= lo else (f - lo) / (hi - lo)
    img = np.round(255.0 * scaled).astype(np.uint8).T[::-1]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
