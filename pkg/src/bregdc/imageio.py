"""Grayscale image files: binary PGM (P5, 8/16 bit) and raw float32 ``BDCF``.

``BDCF`` layout: magic ``BDCF``, little-endian u32 height and width, then
``H*W`` little-endian float32 values in row-major order.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

__all__ = ["read_image", "write_image", "read_pgm", "write_pgm", "read_bdcf", "write_bdcf"]

BDCF_MAGIC = b"BDCF"


def _pgm_tokens(data, count, path):
    # header tokens separated by whitespace, '#' comments run to end of line
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i:i + 1].isspace() and data[i:i + 1] != b"#":
            i += 1
        if start == i:
            raise InvalidInputError(f"{path}: truncated PGM header")
        tokens.append(data[start:i])
    # exactly one whitespace byte separates header and raster
    return tokens, i + 1


def read_pgm(path):
    data = Path(path).read_bytes()
    (magic, w, h, maxval), offset = _pgm_tokens(data, 4, path)
    if magic != b"P5":
        raise InvalidInputError(f"{path}: only binary PGM (P5) is supported")
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise InvalidInputError(f"{path}: malformed PGM header")
    if not (0 < maxval < 65536) or w <= 0 or h <= 0:
        raise InvalidInputError(f"{path}: invalid PGM dimensions or maxval")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = w * h * dtype.itemsize
    raster = data[offset:offset + need]
    if len(raster) != need:
        raise InvalidInputError(f"{path}: expected {need} raster bytes, got {len(raster)}")
    return np.frombuffer(raster, dtype=dtype).reshape(h, w).astype(np.float64)


def write_pgm(img, path, bits=8):
    """Write ``img`` rounded and clipped to the ``bits``-bit integer range."""
    if bits not in (8, 16):
        raise InvalidInputError("PGM bit depth must be 8 or 16")
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise InvalidInputError("PGM images must be 2-D")
    maxval = 255 if bits == 8 else 65535
    dtype = "u1" if bits == 8 else ">u2"
    q = np.clip(np.rint(img), 0, maxval).astype(dtype)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(q.tobytes())


def read_bdcf(path):
    data = Path(path).read_bytes()
    if data[:4] != BDCF_MAGIC or len(data) < 12:
        raise InvalidInputError(f"{path}: not a BDCF file")
    h, w = struct.unpack("<II", data[4:12])
    body = data[12:]
    if len(body) != 4 * h * w:
        raise InvalidInputError(f"{path}: expected {4 * h * w} payload bytes, got {len(body)}")
    return np.frombuffer(body, dtype="<f4").reshape(h, w).astype(np.float64)


def write_bdcf(img, path):
    img = np.asarray(img)
    if img.ndim != 2:
        raise InvalidInputError("BDCF images must be 2-D")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(BDCF_MAGIC + struct.pack("<II", h, w))
        fh.write(img.astype("<f4").tobytes())


def read_image(path):
    """Dispatch on content: ``P5`` PGM or ``BDCF`` raw."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head[:2] == b"P5":
        return read_pgm(path)
    if head == BDCF_MAGIC:
        return read_bdcf(path)
    raise InvalidInputError(f"{path}: unrecognised image format")


def write_image(img, path, bits=8):
    """Write by extension: ``.pgm`` (8/16 bit) or anything else as BDCF."""
    if str(path).lower().endswith(".pgm"):
        write_pgm(img, path, bits=bits)
    else:
        write_bdcf(img, path)
