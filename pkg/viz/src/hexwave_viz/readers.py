"""File readers for the hexwave interchange formats.

The HGR1 layout is re-implemented here on purpose: the viz side depends
only on the documented bytes, not on the solver package.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_HEADER = struct.Struct("<4sIIII dddd")
SUPPORTED_TOOL = "hexwave"
SUPPORTED_MAJOR = 0


class ReaderError(ValueError):
    pass


@dataclass
class HgrGrid:
    components: list[np.ndarray]
    x0: float
    y0: float
    dx: float
    dy: float

    def extent(self):
        """matplotlib imshow extent (x_min, x_max, y_min, y_max)."""
        nx, ny = self.components[0].shape
        return (self.x0, self.x0 + nx * self.dx, self.y0, self.y0 + ny * self.dy)


def read_hgr(path) -> HgrGrid:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ReaderError(f"{path}: too short for an HGR1 header")
    magic, version, n_comp, nx, ny, x0, y0, dx, dy = _HEADER.unpack_from(raw)
    if magic != b"HGR1" or version != 1:
        raise ReaderError(f"{path}: not an HGR1 file (magic {magic!r}, version {version})")
    if len(raw) != _HEADER.size + n_comp * nx * ny * 16:
        raise ReaderError(f"{path}: payload length mismatch")
    comps = []
    off = _HEADER.size
    for _ in range(n_comp):
        flat = np.frombuffer(raw, dtype="<f8", count=2 * nx * ny, offset=off)
        comps.append((flat[0::2] + 1j * flat[1::2]).reshape(nx, ny).copy())
        off += nx * ny * 16
    return HgrGrid(components=comps, x0=x0, y0=y0, dx=dx, dy=dy)


def read_manifest(path) -> dict:
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ReaderError(f"{path}: not valid JSON: {exc}")
    tool = manifest.get("tool")
    version = str(manifest.get("version", ""))
    if tool != SUPPORTED_TOOL:
        raise ReaderError(f"{path}: produced by {tool!r}, expected {SUPPORTED_TOOL!r}")
    major = int(version.split(".")[0]) if version else -1
    if major != SUPPORTED_MAJOR:
        raise ReaderError(f"{path}: unsupported tool version {version}")
    return manifest


def read_csv_columns(path, columns: list[str]) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ReaderError(f"{path}: empty CSV")
    missing = [c for c in columns if c not in rows[0]]
    if missing:
        raise ReaderError(f"{path}: missing columns {missing}")
    return {c: np.array([float(r[c]) for r in rows]) for c in columns}
