"""Wire format of the teleoperation session protocol.

JSON text messages over one bidirectional stream. Client to server:

    {"type": "start", "map_seed": int}
    {"type": "step", "action_id": 0..9}
    {"type": "reset"}
    {"type": "end"}

Server to client:

    {"type": "frame", "step": int, "reward": real, "done": bool,
     "info": {...}, "vessel": raster?, "guidewire": raster,
     "hud": {"force": real, "dist": real}}
    {"type": "error", "message": str}

The vessel raster rides only on the step-0 frame of each episode (it
never changes within one); every frame carries the guidewire raster.
Rasters are base64 text of a self-describing payload: two little-endian
u16 for (height, width), then the boolean grid bit-packed row-major,
most significant bit first. Keeping the dimensions inside the payload
leaves the JSON schema fixed while letting a client decode without out
of band shape knowledge.
"""

import base64
import struct

import numpy as np

from vascnav.errors import DataFormatError


def raster_encode(grid):
    grid = np.asarray(grid, dtype=bool)
    h, w = grid.shape
    payload = struct.pack("<HH", h, w) + np.packbits(grid).tobytes()
    return base64.b64encode(payload).decode("ascii")


def raster_decode(text):
    try:
        payload = base64.b64decode(text.encode("ascii"), validate=True)
    except Exception as e:
        raise DataFormatError(f"raster payload is not valid base64: {e}")
    if len(payload) < 4:
        raise DataFormatError("raster payload shorter than its header")
    h, w = struct.unpack("<HH", payload[:4])
    need = (h * w + 7) // 8
    if len(payload) - 4 != need:
        raise DataFormatError(
            f"raster payload is {len(payload) - 4} bytes, {h}x{w} needs "
            f"{need}")
    bits = np.unpackbits(np.frombuffer(payload[4:], dtype=np.uint8),
                         count=h * w)
    return bits.reshape(h, w).astype(bool)
