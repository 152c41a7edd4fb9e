"""Binary map files.

Layout (little-endian):
    magic   4s      "VASC"
    version u8      1
    h, w    u16 each
    outset  u16 row, u16 col
    target  u16 row, u16 col
    lumen   ceil(h*w/8) bytes, row-major bits, MSB first
"""

import struct

import numpy as np

from vascnav.errors import DataFormatError
from vascnav.sim.mapgen import VascularMap

_MAGIC = b"VASC"
_VERSION = 1
_HEADER = struct.Struct("<4sBHHHHHH")


def save_map(vmap, path):
    vessel = np.asarray(vmap.vessel, dtype=bool)
    h, w = vessel.shape
    head = _HEADER.pack(
        _MAGIC, _VERSION, h, w, vmap.outset[0], vmap.outset[1], vmap.target[0], vmap.target[1]
    )
    bits = np.packbits(vessel.reshape(-1)).tobytes()
    with open(path, "wb") as f:
        f.write(head + bits)


def load_map(path):
    """Read a map file and rebuild the derived fields. Raises DataFormatError."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise DataFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, h, w, orow, ocol, trow, tcol = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    nbytes = (h * w + 7) // 8
    body = raw[_HEADER.size :]
    if len(body) != nbytes:
        raise DataFormatError(f"{path}: lumen payload {len(body)} bytes, expected {nbytes}")
    vessel = np.unpackbits(np.frombuffer(body, dtype=np.uint8), count=h * w).reshape(h, w).astype(bool)
    if not (orow < h and ocol < w and trow < h and tcol < w):
        raise DataFormatError(f"{path}: outset/target outside {h}x{w} raster")
    return VascularMap.build(vessel, (orow, ocol), (trow, tcol))
