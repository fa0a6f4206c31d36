"""Per-frame raster primitives on depth images.

A depth image is a 2-D array of millimeters, row-major (height, width),
where 0 marks a pixel without a depth reading. Sensor frames are unsigned
16-bit integers; float arrays are accepted too (synthetic frames rendered
without quantization). Gray images are ``uint8`` arrays of the same shape.

All rounding is half away from zero; every value rounded here is
non-negative, so this reduces to ``floor(x + 0.5)`` and is done in integer
arithmetic where the operands are integers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def round_half_away(x):
    """Round half away from zero (``np.round`` rounds half to even)."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def as_depth(img) -> np.ndarray:
    a = np.asarray(img)
    if a.ndim != 2:
        raise ValueError(f"depth image must be 2-D, got shape {a.shape}")
    if a.dtype.kind not in "uif":
        raise ValueError(f"depth image must hold millimeters, got dtype {a.dtype}")
    if a.dtype.kind == "f" and not np.isfinite(a).all():
        raise ValueError("depth image contains non-finite values")
    if a.dtype.kind != "u" and a.size and a.min() < 0:
        raise ValueError("depth image contains negative values")
    return a


def valid_mask(img) -> np.ndarray:
    return np.asarray(img) > 0


def _box_sum(a: np.ndarray, r: int) -> np.ndarray:
    """Sum of ``a`` over the (2r+1)^2 window around each pixel, zero padded."""
    h, w = a.shape
    s = np.zeros((h + 1, w + 1), dtype=np.float64 if a.dtype.kind == "f" else np.int64)
    s[1:, 1:] = a.cumsum(0).cumsum(1)
    r0 = np.clip(np.arange(h) - r, 0, h)
    r1 = np.clip(np.arange(h) + r + 1, 0, h)
    c0 = np.clip(np.arange(w) - r, 0, w)
    c1 = np.clip(np.arange(w) + r + 1, 0, w)
    return (s[r1][:, c1] - s[r0][:, c1] - s[r1][:, c0] + s[r0][:, c0])


def fill_holes(img, kernel_radius: int = 2, max_passes: int = 3) -> np.ndarray:
    """Mean-filter hole filling.

    Each invalid pixel that has at least one valid pixel in its
    ``(2r+1) x (2r+1)`` neighbourhood takes the rounded mean of those valid
    neighbours. Passes repeat until nothing changes or ``max_passes`` is hit.
    Valid pixels are never modified. Each pass reads the previous pass's
    result only, so the outcome does not depend on scan order. Float images
    get the exact mean instead of a rounded one.
    """
    if kernel_radius < 1:
        raise ValueError("kernel_radius must be >= 1")
    out = as_depth(img).copy()
    for _ in range(max_passes):
        valid = out > 0
        holes = ~valid
        if not holes.any():
            break
        counts = _box_sum(valid.astype(np.int64), kernel_radius)
        sums = _box_sum(np.where(valid, out, 0), kernel_radius)
        fill = holes & (counts > 0)
        if not fill.any():
            break
        c = counts[fill]
        if out.dtype.kind == "f":
            out[fill] = sums[fill] / c
        else:
            out[fill] = (2 * sums[fill] + c) // (2 * c)
    return out


def normalize(img, depth_range: tuple[float, float] | None = None) -> np.ndarray:
    """Stretch valid depths to 0..255.

    By default the frame's own valid minimum and maximum are used. Passing
    ``depth_range=(lo, hi)`` in millimeters uses a fixed range instead (valid
    depths are clipped into it), which keeps gray levels stable over a video.
    Invalid pixels, and every pixel of a frame with no depth spread, map to 0.
    """
    d = as_depth(img)
    valid = d > 0
    out = np.zeros(d.shape, dtype=np.uint8)
    if not valid.any():
        return out
    if depth_range is None and d.dtype.kind == "f":
        vals = d[valid]
        depth_range = (float(vals.min()), float(vals.max()))
        if depth_range[1] == depth_range[0]:
            return out
    if depth_range is None:
        vals = d[valid].astype(np.int64)
        lo, hi = int(vals.min()), int(vals.max())
        if hi == lo:
            return out
        # exact integer form of round(255 * (v - lo) / (hi - lo))
        out[valid] = (510 * (vals - lo) + (hi - lo)) // (2 * (hi - lo))
        return out
    lo, hi = (float(x) for x in depth_range)
    if not hi > lo:
        raise ValueError(f"depth_range must be increasing, got {depth_range}")
    vals = np.clip(d[valid].astype(float), lo, hi)
    out[valid] = round_half_away(255.0 * (vals - lo) / (hi - lo)).astype(np.uint8)
    return out


def equalize(gray, valid=None) -> np.ndarray:
    """256-bin histogram equalization restricted to ``valid`` pixels.

    ``out = round(255 * (cdf(v) - cdf_min) / (n_valid - cdf_min))`` where
    ``cdf_min`` is the smallest non-zero CDF value. Invalid pixels become 0.
    A frame with no valid pixels, or whose valid pixels share one level, is
    returned unchanged over its valid pixels.
    """
    g = np.asarray(gray)
    if g.dtype != np.uint8:
        raise ValueError(f"gray image must be uint8, got {g.dtype}")
    mask = np.ones(g.shape, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    if mask.shape != g.shape:
        raise ValueError(f"mask shape {mask.shape} does not match image shape {g.shape}")
    out = np.zeros_like(g)
    vals = g[mask]
    n = vals.size
    if n == 0:
        return out
    cdf = np.bincount(vals, minlength=256).cumsum().astype(np.int64)
    cdf_min = int(cdf[cdf > 0][0])
    if cdf_min == n:
        out[mask] = vals
        return out
    lut = (510 * (cdf - cdf_min) + (n - cdf_min)) // (2 * (n - cdf_min))
    lut = np.clip(lut, 0, 255).astype(np.uint8)  # levels below the minimum are unused
    out[mask] = lut[vals]
    return out


@dataclass(frozen=True)
class Box:
    """Axis-aligned pixel rectangle: columns ``[x, x+w)``, rows ``[y, y+h)``."""

    x: int
    y: int
    w: int
    h: int

    @classmethod
    def square(cls, x: int, y: int, side: int) -> "Box":
        return cls(x, y, side, side)

    def __iter__(self):
        return iter((self.x, self.y, self.w, self.h))


class ValidityIntegral:
    """Summed-area table of the validity mask of one depth frame.

    ``table[i, j]`` is the number of valid pixels in rows ``[0, i)`` and
    columns ``[0, j)``; the table has one more row and column than the image.
    """

    def __init__(self, table: np.ndarray):
        self.table = table

    @property
    def height(self) -> int:
        return self.table.shape[0] - 1

    @property
    def width(self) -> int:
        return self.table.shape[1] - 1

    def clip(self, x0, y0, x1, y1):
        return (np.clip(x0, 0, self.width), np.clip(y0, 0, self.height),
                np.clip(x1, 0, self.width), np.clip(y1, 0, self.height))

    def count(self, box: Box) -> int:
        x0, y0, x1, y1 = self.clip(box.x, box.y, box.x + box.w, box.y + box.h)
        t = self.table
        return int(t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0])

    def counts(self, x, y, side):
        """Vectorised valid counts and clipped areas for square windows."""
        x = np.asarray(x)
        y = np.asarray(y)
        side = np.asarray(side)
        x0, y0, x1, y1 = self.clip(x, y, x + side, y + side)
        t = self.table
        cnt = t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0]
        area = (x1 - x0) * (y1 - y0)
        return cnt, area


def build_validity_integral(img) -> ValidityIntegral:
    v = valid_mask(as_depth(img))
    h, w = v.shape
    table = np.zeros((h + 1, w + 1), dtype=np.int32)
    v.cumsum(0, dtype=np.int32, out=table[1:, 1:])
    table[1:, 1:].cumsum(1, out=table[1:, 1:])
    return ValidityIntegral(table)


def valid_fraction(integral: ValidityIntegral, box: Box) -> float:
    """Fraction of valid pixels in ``box`` after clipping it to the image."""
    x0, y0, x1, y1 = integral.clip(box.x, box.y, box.x + box.w, box.y + box.h)
    area = int((x1 - x0) * (y1 - y0))
    if area <= 0:
        raise ValueError(f"{box} has zero area inside the {integral.width}x{integral.height} image")
    return integral.count(box) / area
