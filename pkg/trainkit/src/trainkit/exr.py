"""Reader for the dataset's depth images.

Depth files are single-part scanline OpenEXR with one 32-bit float channel
and no compression; that documented subset is all this reader handles.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

_MAGIC = b"\x76\x2f\x31\x01"


def _string(buf: bytes, pos: int) -> tuple[bytes, int]:
    end = buf.index(b"\0", pos)
    return buf[pos:end], end + 1


def read_exr(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if buf[:4] != _MAGIC:
        raise ValueError(f"not an EXR file: {path}")
    pos = 8
    attrs: dict[bytes, bytes] = {}
    while buf[pos] != 0:
        name, pos = _string(buf, pos)
        _typ, pos = _string(buf, pos)
        size = struct.unpack_from("<i", buf, pos)[0]
        pos += 4
        attrs[name] = buf[pos : pos + size]
        pos += size
    pos += 1
    if attrs.get(b"compression", b"\x00") != b"\x00":
        raise ValueError(f"unsupported EXR compression in {path}")
    chans = attrs[b"channels"]
    n_channels = 0
    cpos = 0
    while chans[cpos] != 0:
        _name, cpos = _string(chans, cpos)
        if struct.unpack_from("<i", chans, cpos)[0] != 2:  # FLOAT
            raise ValueError(f"unsupported channel type in {path}")
        cpos += 16
        n_channels += 1
    if n_channels != 1:
        raise ValueError(f"expected one channel in {path}")
    x0, y0, x1, y1 = struct.unpack("<4i", attrs[b"dataWindow"])
    w, h = x1 - x0 + 1, y1 - y0 + 1
    offsets = struct.unpack_from("<%dQ" % h, buf, pos)
    out = np.empty((h, w), dtype="<f4")
    for off in offsets:
        y, size = struct.unpack_from("<ii", buf, off)
        if size != 4 * w:
            raise ValueError(f"bad scanline in {path}")
        out[y - y0] = np.frombuffer(buf, dtype="<f4", count=w, offset=off + 8)
    return out
