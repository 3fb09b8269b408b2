"""Image file I/O: 8-bit grayscale PNG/BMP and float32 OpenEXR depth maps.

EXR support is a minimal reader/writer pair for single-part scanline files
with one FLOAT channel and no compression. Writing is byte-deterministic,
which the resumable dataset builder and reproducibility checks rely on.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

_EXR_MAGIC = b"\x76\x2f\x31\x01"
_PT_FLOAT = 2


def quantize_u8(img: np.ndarray) -> np.ndarray:
    """Clip to [0, 1] and quantize to uint8."""
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def png_bytes(img: np.ndarray) -> bytes:
    """Encode a [0, 1] float raster as 8-bit grayscale PNG bytes."""
    import io

    buf = io.BytesIO()
    Image.fromarray(quantize_u8(img), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def write_gray(path, img: np.ndarray) -> None:
    """Write a [0, 1] float raster as 8-bit grayscale (PNG or BMP by suffix)."""
    Image.fromarray(quantize_u8(img), mode="L").save(Path(path))


def read_gray(path) -> np.ndarray:
    """Read an 8-bit grayscale image back into [0, 1] float64."""
    with Image.open(Path(path)) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float64)
    return arr / 255.0


def _attr(name: bytes, typ: bytes, data: bytes) -> bytes:
    return name + b"\0" + typ + b"\0" + struct.pack("<i", len(data)) + data


def exr_bytes(img: np.ndarray, channel: str = "Z") -> bytes:
    """Encode a 2D float raster as an uncompressed scanline EXR (32-bit
    float, single channel, increasing-y line order)."""
    arr = np.ascontiguousarray(np.asarray(img, dtype="<f4"))
    if arr.ndim != 2:
        raise ValueError(f"EXR writer expects a 2D raster, got shape {arr.shape}")
    h, w = arr.shape
    ch = channel.encode("ascii")

    chlist = ch + b"\0" + struct.pack("<iBBBBii", _PT_FLOAT, 0, 0, 0, 0, 1, 1) + b"\0"
    box = struct.pack("<4i", 0, 0, w - 1, h - 1)
    header = b"".join(
        [
            _attr(b"channels", b"chlist", chlist),
            _attr(b"compression", b"compression", b"\x00"),
            _attr(b"dataWindow", b"box2i", box),
            _attr(b"displayWindow", b"box2i", box),
            _attr(b"lineOrder", b"lineOrder", b"\x00"),
            _attr(b"pixelAspectRatio", b"float", struct.pack("<f", 1.0)),
            _attr(b"screenWindowCenter", b"v2f", struct.pack("<2f", 0.0, 0.0)),
            _attr(b"screenWindowWidth", b"float", struct.pack("<f", 1.0)),
            b"\0",
        ]
    )
    preamble = _EXR_MAGIC + struct.pack("<i", 2) + header
    table_start = len(preamble)
    data_start = table_start + 8 * h
    chunk_size = 8 + 4 * w  # y + size prefix + one scanline of floats
    offsets = struct.pack("<%dQ" % h, *(data_start + i * chunk_size for i in range(h)))
    chunks = b"".join(
        struct.pack("<ii", y, 4 * w) + arr[y].tobytes() for y in range(h)
    )
    return preamble + offsets + chunks


def write_exr(path, img: np.ndarray, channel: str = "Z") -> None:
    Path(path).write_bytes(exr_bytes(img, channel))


def _read_string(buf: bytes, pos: int) -> tuple[bytes, int]:
    end = buf.index(b"\0", pos)
    return buf[pos:end], end + 1


def read_exr(path) -> np.ndarray:
    """Read a single-channel uncompressed scanline EXR into float32."""
    buf = Path(path).read_bytes()
    if buf[:4] != _EXR_MAGIC:
        raise ValueError(f"not an EXR file: {path}")
    version = struct.unpack_from("<i", buf, 4)[0]
    if version & 0x200:
        raise ValueError(f"multi-part EXR not supported: {path}")
    pos = 8
    attrs: dict[bytes, bytes] = {}
    while buf[pos] != 0:
        name, pos = _read_string(buf, pos)
        _typ, pos = _read_string(buf, pos)
        size = struct.unpack_from("<i", buf, pos)[0]
        pos += 4
        attrs[name] = buf[pos : pos + size]
        pos += size
    pos += 1  # header terminator

    if attrs.get(b"compression", b"\x00") != b"\x00":
        raise ValueError(f"only uncompressed EXR is supported: {path}")
    chans = attrs[b"channels"]
    cpos = 0
    names = []
    while chans[cpos] != 0:
        cname, cpos = _read_string(chans, cpos)
        ptype = struct.unpack_from("<i", chans, cpos)[0]
        if ptype != _PT_FLOAT:
            raise ValueError(f"only FLOAT channels are supported: {path}")
        names.append(cname)
        cpos += 16
    if len(names) != 1:
        raise ValueError(f"expected a single channel, got {names}: {path}")
    x0, y0, x1, y1 = struct.unpack("<4i", attrs[b"dataWindow"])
    w, h = x1 - x0 + 1, y1 - y0 + 1

    offsets = struct.unpack_from("<%dQ" % h, buf, pos)
    out = np.empty((h, w), dtype="<f4")
    for row, off in enumerate(offsets):
        y, size = struct.unpack_from("<ii", buf, off)
        if size != 4 * w:
            raise ValueError(f"unexpected scanline size in {path}")
        out[y - y0] = np.frombuffer(buf, dtype="<f4", count=w, offset=off + 8)
    return out
