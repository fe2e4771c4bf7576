"""Flat binary container used for models and datasets.

Layout: 8-byte magic, uint32 header length n, n little-endian int64 dims,
then row-major little-endian float64 payload.
"""

import struct

import numpy as np

from .errors import ParseError

_LEN = struct.Struct("<I")


def write(path, magic, dims, arrays):
    if len(magic) != 8:
        raise ValueError("magic must be 8 bytes")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(_LEN.pack(len(dims)))
        fh.write(np.asarray(dims, dtype="<i8").tobytes())
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read(path, magic):
    """Return (dims, payload) where payload is a flat float64 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != magic:
        raise ParseError(f"bad magic {data[:8]!r}, expected {magic!r}", 0)
    if len(data) < 12:
        raise ParseError("truncated header", len(data))
    (n,) = _LEN.unpack_from(data, 8)
    end = 12 + 8 * n
    if len(data) < end:
        raise ParseError("truncated dims header", len(data))
    dims = np.frombuffer(data[12:end], dtype="<i8").astype(int).tolist()
    body = data[end:]
    if len(body) % 8:
        raise ParseError("payload is not a whole number of float64 values", len(data))
    return dims, np.frombuffer(body, dtype="<f8").astype(float)
