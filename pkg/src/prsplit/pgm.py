"""Minimal portable-graymap (PGM) reader and writer for the demo CLI.

Images travel as float arrays in [0, 1], row-major.  The writer emits binary
``P5`` at 8 bits; the reader accepts ``P2`` and ``P5`` up to 16 bits.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

__all__ = ["read_pgm", "write_pgm"]


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    # header: magic, width, height, maxval, with '#' comments allowed
    tokens = []
    pos = 0
    while len(tokens) < 4:
        chunk = data[pos:pos + 1]
        if not chunk:
            raise IOError(f"{path}: truncated PGM header")
        if chunk == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        if chunk.isspace():
            pos += 1
            continue
        m = re.match(rb"[^\s#]+", data[pos:])
        tokens.append(m.group(0))
        pos += m.end()
    magic, width, height, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic not in (b"P2", b"P5"):
        raise IOError(f"{path}: not a PGM file (magic {magic!r})")
    if not (0 < maxval < 65536):
        raise IOError(f"{path}: bad maxval {maxval}")
    if magic == b"P2":
        values = np.array(data[pos:].split(), dtype=float)
    else:
        pos += 1  # exactly one whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.uint8
        values = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos).astype(float)
    if values.size != width * height:
        raise IOError(f"{path}: expected {width * height} pixels, got {values.size}")
    return values.reshape(height, width) / maxval


def write_pgm(path, image: np.ndarray, maxval: int = 255) -> None:
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise IOError("PGM images must be 2-D")
    if not (0 < maxval < 65536):
        raise ValueError(f"bad maxval {maxval}")
    scaled = np.clip(np.rint(img * maxval), 0, maxval)
    dtype = np.dtype(">u2") if maxval > 255 else np.uint8
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode()
    Path(path).write_bytes(header + scaled.astype(dtype).tobytes())
