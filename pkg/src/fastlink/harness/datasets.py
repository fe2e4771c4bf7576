"""Image sources: synthetic Gauss-Markov textures and binary PGM/PPM files."""

import numpy as np
from scipy.linalg import cholesky, toeplitz

from ..codec import ImageSample
from ..errors import ConfigurationError, ParseError

__all__ = ["synth_dataset", "load_image", "save_pgm"]

# marginal std of the texture before mapping to [0, 1]; 3 sigma spans the range
_PIXEL_STD = 1.0 / 6.0


def synth_dataset(count, size=16, rho=0.9, seed=0):
    """Separable AR(1) textures with lag-1 correlation ``rho`` along both axes.

    Unit-variance Gaussian fields are mapped affinely to mean 0.5, std 1/6
    and clipped to [0, 1].
    """
    if not 0 <= rho < 1:
        raise ConfigurationError(f"rho must be in [0, 1), got {rho}")
    if count == 0:
        return []
    L = cholesky(toeplitz(rho ** np.arange(size)), lower=True)
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((count, size, size))
    X = L @ Z @ L.T
    X = np.clip(0.5 + _PIXEL_STD * X, 0.0, 1.0)
    return [ImageSample(x.ravel(), size, size, 1) for x in X]


def _read_token(data, pos):
    """Next whitespace-delimited header token, skipping '#' comments."""
    n = len(data)
    while pos < n:
        ch = data[pos:pos + 1]
        if ch == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ParseError("unexpected end of header", start)
    return data[start:pos], start, pos


def _read_int(data, pos, what):
    tok, start, pos = _read_token(data, pos)
    if not tok.isdigit():
        raise ParseError(f"invalid {what} {tok!r}", start)
    return int(tok), start, pos


def load_image(path):
    """Parse a binary PGM (P5) or PPM (P6) into an ImageSample scaled to [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise ParseError(f"unsupported magic {magic!r} (only P5 and P6)", 0)
    channels = 1 if magic == b"P5" else 3
    pos = 2
    width, start, pos = _read_int(data, pos, "width")
    height, hstart, pos = _read_int(data, pos, "height")
    maxval, mstart, pos = _read_int(data, pos, "maxval")
    if width < 1 or height < 1:
        raise ParseError(f"non-positive dimensions {width}x{height}", start)
    if not 0 < maxval < 65536:
        raise ParseError(f"maxval {maxval} out of range", mstart)
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise ParseError("missing whitespace after maxval", pos)
    pos += 1
    bpp = 1 if maxval < 256 else 2
    count = width * height * channels
    need = count * bpp
    if len(data) - pos < need:
        raise ParseError(f"truncated payload: need {need} bytes, have {len(data) - pos}", len(data))
    dtype = np.uint8 if bpp == 1 else np.dtype(">u2")
    raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos).astype(float)
    if np.any(raw > maxval):
        bad = int(np.argmax(raw > maxval))
        raise ParseError(f"sample {int(raw[bad])} exceeds maxval {maxval}", pos + bad * bpp)
    return ImageSample(raw / maxval, width, height, channels)


def save_pgm(image, path, maxval=255):
    """Write a grayscale ImageSample as P5 (clamped to [0, 1])."""
    if image.channels != 1:
        raise ConfigurationError("save_pgm expects a single-channel image")
    vals = np.rint(np.clip(image.pixels, 0, 1) * maxval)
    body = vals.astype(np.uint8 if maxval < 256 else ">u2").tobytes()
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.width} {image.height}\n{maxval}\n".encode("ascii"))
        fh.write(body)
