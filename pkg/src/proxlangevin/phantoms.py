"""Synthetic piecewise-constant test images.

A built-in phantom of disks and rectangles on a flat background lets
every experiment run without external data.
"""

from __future__ import annotations

import numpy as np

__all__ = ["make_phantom"]


def make_phantom(height=64, width=None):
    """Piecewise-constant phantom with disks and rectangles, values in [0, 1].

    The layout scales with the requested size; edges are axis-aligned or
    circular so total-variation priors have a meaningful structure to
    recover.
    """
    width = height if width is None else width
    if height < 8 or width < 8:
        raise ValueError("phantom needs at least 8x8 pixels")
    img = np.full((height, width), 0.15)
    ii, jj = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")

    def disk(ci, cj, r, value):
        mask = (ii - ci * height) ** 2 + (jj - cj * width) ** 2 <= (r * min(height, width)) ** 2
        img[mask] = value

    def rect(i0, i1, j0, j1, value):
        img[int(i0 * height):int(i1 * height), int(j0 * width):int(j1 * width)] = value

    rect(0.10, 0.45, 0.08, 0.30, 0.55)
    rect(0.55, 0.90, 0.55, 0.92, 0.35)
    rect(0.62, 0.83, 0.62, 0.85, 0.75)
    disk(0.32, 0.68, 0.16, 0.95)
    disk(0.72, 0.28, 0.12, 0.65)
    disk(0.72, 0.28, 0.05, 0.25)
    rect(0.05, 0.08, 0.40, 0.95, 0.85)
    return img
