"""Binary PGM (P5) / PPM (P6) rasters, max value 255."""
import re
from pathlib import Path

import numpy as np

from explainer_app.exceptions import FormatError, ShapeError

MAXVAL = 255
_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


def quantize(raster):
    return np.rint(np.clip(np.asarray(raster, dtype=np.float64), 0.0, 1.0) * MAXVAL).astype(np.uint8)


def raster_suffix(raster):
    return ".pgm" if np.ndim(raster) == 2 or np.shape(raster)[2] == 1 else ".ppm"


def write_pnm(path, raster):
    """Write a [0, 1] raster; gray (H, W[, 1]) → P5, (H, W, 3) → P6."""
    pixels = quantize(raster)
    if pixels.ndim == 3 and pixels.shape[2] == 1:
        pixels = pixels[:, :, 0]
    if pixels.ndim == 2:
        magic = b"P5"
    elif pixels.ndim == 3 and pixels.shape[2] == 3:
        magic = b"P6"
    else:
        raise ShapeError(f"cannot write a raster of shape {pixels.shape}", dimension="channels")
    height, width = pixels.shape[:2]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(b"%s\n%d %d\n%d\n" % (magic, width, height, MAXVAL))
        fh.write(np.ascontiguousarray(pixels).tobytes())
    return path


def read_pnm(path):
    """(H, W) float raster for P5, (H, W, 3) for P6."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read raster {path}: {exc}", field="raster") from exc

    tokens, position = [], 0
    for _ in range(4):
        match = _TOKEN.match(data, position)
        if match is None:
            raise FormatError(f"{path}: truncated header", field="header", offset=position)
        tokens.append(match.group(1))
        position = match.end()
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: unsupported magic {magic!r}", field="magic", offset=0)
    try:
        width, height, maxval = (int(token) for token in tokens[1:])
    except ValueError:
        raise FormatError(f"{path}: non-numeric header", field="header", offset=position) from None
    if maxval != MAXVAL:
        raise FormatError(f"{path}: max value {maxval} != {MAXVAL}", field="maxval", offset=position)
    position += 1       # single whitespace byte before the raster

    channels = 3 if magic == b"P6" else 1
    expected = width * height * channels
    if len(data) - position < expected:
        raise FormatError(f"{path}: raster needs {expected} bytes", field="pixels", offset=len(data))
    pixels = np.frombuffer(data, dtype=np.uint8, count=expected, offset=position)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return pixels.reshape(shape).astype(np.float64) / MAXVAL
