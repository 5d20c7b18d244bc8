"""HGR1 binary grid format.

Layout: magic b"HGR1"; header of unsigned 32-bit little-endian fields
(version=1, n_components, nx, ny); then 64-bit little-endian floats
(x0, y0, dx, dy); payload of component-major, row-major complex samples
stored as (real, imaginary) float64 pairs.  Round trips are bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"HGR1"
_HEADER = struct.Struct("<4sIIII dddd")


class HgrFormatError(ValueError):
    pass


@dataclass
class HgrFile:
    """In-memory image of an HGR1 file: components are (nx, ny) complex grids."""

    components: list[np.ndarray]
    x0: float
    y0: float
    dx: float
    dy: float
    version: int = 1

    @property
    def nx(self) -> int:
        return self.components[0].shape[0]

    @property
    def ny(self) -> int:
        return self.components[0].shape[1]


def write_hgr(path, components, x0: float, y0: float, dx: float, dy: float) -> None:
    comps = [np.ascontiguousarray(c, dtype=np.complex128) for c in components]
    if not comps:
        raise HgrFormatError("at least one component is required")
    nx, ny = comps[0].shape
    for c in comps:
        if c.shape != (nx, ny):
            raise HgrFormatError("all components must share one grid shape")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, 1, len(comps), nx, ny, x0, y0, dx, dy))
        for c in comps:
            interleaved = np.empty((nx, ny, 2), dtype="<f8")
            interleaved[..., 0] = c.real
            interleaved[..., 1] = c.imag
            fh.write(interleaved.tobytes())


def read_hgr(path) -> HgrFile:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise HgrFormatError("file too short for an HGR1 header")
    magic, version, n_comp, nx, ny, x0, y0, dx, dy = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise HgrFormatError(f"bad magic {magic!r}; not an HGR1 file")
    if version != 1:
        raise HgrFormatError(f"unsupported HGR version {version}")
    expected = _HEADER.size + n_comp * nx * ny * 16
    if len(raw) != expected:
        raise HgrFormatError(f"payload length {len(raw) - _HEADER.size} does not match "
                             f"n_components*nx*ny*16 = {expected - _HEADER.size}")
    comps = []
    off = _HEADER.size
    for _ in range(n_comp):
        flat = np.frombuffer(raw, dtype="<f8", count=2 * nx * ny, offset=off)
        comps.append((flat[0::2] + 1j * flat[1::2]).reshape(nx, ny).copy())
        off += nx * ny * 16
    return HgrFile(components=comps, x0=x0, y0=y0, dx=dx, dy=dy, version=version)
