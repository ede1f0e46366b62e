"""Image and feature file I/O.

PGM (binary P5, 8-bit) is always available. PNG grayscale goes through
Pillow when it is installed. Feature files use the little-endian ``AGFF``
layout: 4 magic bytes, ``u32 M``, ``u32 N``, then ``M*N`` float32 values in
node-major order.
"""

import os
import re
import struct

import numpy as np

from agf.errors import InputError

AGFF_MAGIC = b"AGFF"

_PGM_HEADER = re.compile(rb"\AP5(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


def read_pgm(path):
    """Read a binary 8-bit PGM into a float64 array in [0, 255]."""
    with open(path, "rb") as fh:
        data = fh.read()
    match = _PGM_HEADER.match(data)
    if match is None:
        raise InputError(f"{path}: not a binary P5 PGM file")
    width, height, maxval = (int(g) for g in match.groups())
    if width < 1 or height < 1:
        raise InputError(f"{path}: empty image ({width}x{height})")
    if not 1 <= maxval <= 255:
        raise InputError(f"{path}: only 8-bit PGM supported, got maxval {maxval}")
    raw = data[match.end():match.end() + width * height]
    if len(raw) != width * height:
        raise InputError(f"{path}: truncated pixel data")
    img = np.frombuffer(raw, dtype=np.uint8).reshape(height, width).astype(np.float64)
    if maxval != 255:
        img *= 255.0 / maxval
    return img


def to_uint8(img):
    """Round to nearest and clamp into [0, 255]."""
    return np.clip(np.rint(np.asarray(img, dtype=np.float64)), 0, 255).astype(np.uint8)


def write_pgm(path, img):
    """Write ``img`` as binary P5 PGM, maxval 255."""
    pixels = to_uint8(img)
    if pixels.ndim != 2:
        raise InputError("PGM output must be a 2-D grayscale image")
    height, width = pixels.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height))
        fh.write(pixels.tobytes())


def _pillow():
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise InputError("PNG support requires Pillow (pip install 'artifact[png]')") from exc
    return Image


def read_image(path):
    """Read a grayscale PGM or PNG image as float64."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".png":
        Image = _pillow()
        try:
            with Image.open(path) as im:
                return np.asarray(im.convert("L"), dtype=np.float64)
        except OSError as exc:
            raise InputError(f"{path}: cannot read PNG ({exc})") from exc
    try:
        return read_pgm(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc}") from exc


def write_image(path, img):
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".png":
        Image = _pillow()
        Image.fromarray(to_uint8(img), mode="L").save(path)
    else:
        write_pgm(path, img)


def write_agff(path, vectors):
    """Write an ``M x N`` feature matrix in AGFF format."""
    vectors = np.asarray(vectors, dtype="<f4")
    if vectors.ndim != 2:
        raise InputError("feature matrix must be 2-D (M x N)")
    rows, cols = vectors.shape
    with open(path, "wb") as fh:
        fh.write(AGFF_MAGIC)
        fh.write(struct.pack("<II", rows, cols))
        fh.write(np.ascontiguousarray(vectors).tobytes())


def read_agff(path, expected_m=None, expected_n=None):
    """Read an AGFF feature file, optionally checking its shape.

    Raises
    ------
    InputError
        If the file is missing, has a bad magic, is truncated, or its
        ``(M, N)`` does not match the expected values.
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read feature file {path}: {exc}") from exc
    if len(data) < 12 or data[:4] != AGFF_MAGIC:
        raise InputError(f"{path}: not an AGFF feature file")
    rows, cols = struct.unpack("<II", data[4:12])
    if expected_m is not None and rows != expected_m:
        raise InputError(f"{path}: expected M={expected_m} nodes, file has {rows}")
    if expected_n is not None and cols != expected_n:
        raise InputError(f"{path}: expected N={expected_n} channels, file has {cols}")
    payload = data[12:]
    if len(payload) != 4 * rows * cols:
        raise InputError(f"{path}: payload size {len(payload)} does not match {rows}x{cols} float32")
    out = np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float64)
    if not np.all(np.isfinite(out)):
        raise InputError(f"{path}: non-finite feature values")
    return out


def agff_name(stem, index):
    """File name for the feature file of patch ``index``."""
    return f"{stem}_k{index}.agff"
