"""Grayscale image input/output.

Inputs: 8- or 16-bit grayscale PNG or PGM, scaled to [0, 1]. Outputs:
display PNGs (8-bit, clipped) and raw float64 dumps with a small binary
header for exact downstream analysis.

Raw format: 8-byte magic "PLGRAY64", uint32 height, uint32 width (both
little-endian), followed by height*width float64 values (little-endian,
row-major).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = ["load_image", "write_png", "write_raw", "read_raw"]

RAW_MAGIC = b"PLGRAY64"


def load_image(path):
    """Load a grayscale PNG/PGM as floats in [0, 1].

    16-bit inputs are scaled by 65535, 8-bit by 255; RGB inputs are
    converted to luminance first.
    """
    with Image.open(path) as im:
        if im.mode == "I;16":
            arr = np.asarray(im, dtype=np.float64) / 65535.0
        elif im.mode == "I":
            arr = np.asarray(im, dtype=np.float64) / 65535.0
        else:
            arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    return arr


def write_png(path, image, lo=0.0, hi=1.0):
    """Write a display PNG, clipping [lo, hi] to 8-bit grayscale.

    Display-only: values are clipped here, never in the raw dumps.
    """
    image = np.asarray(image, dtype=float)
    if hi <= lo:
        raise ValueError("need hi > lo for display scaling")
    scaled = np.clip((image - lo) / (hi - lo), 0.0, 1.0)
    Image.fromarray((scaled * 255.0 + 0.5).astype(np.uint8), mode="L").save(path)


def write_raw(path, image):
    """Dump float64 pixels with the 16-byte PLGRAY64 header."""
    image = np.ascontiguousarray(np.asarray(image, dtype="<f8"))
    if image.ndim != 2:
        raise ValueError("raw dumps hold a single 2D image")
    header = RAW_MAGIC + struct.pack("<II", image.shape[0], image.shape[1])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(image.tobytes())


def read_raw(path):
    """Read back a PLGRAY64 dump written by write_raw."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != RAW_MAGIC:
        raise ValueError(f"{path} is not a PLGRAY64 dump")
    height, width = struct.unpack("<II", data[8:16])
    expected = 16 + height * width * 8
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    return np.frombuffer(data[16:], dtype="<f8").reshape(height, width).copy()
