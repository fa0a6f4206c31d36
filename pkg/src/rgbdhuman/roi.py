"""Depth-driven region-of-interest selection.

Three stages feed each other:

* ground plane detection (GPD): lower-half points are binned on a 10x10
  grid over their x-z footprint, cells whose heights spread too much are
  dropped, and RANSAC fits a plane to the rest;
* scale-informed search (SIS): every valid lattice pixel away from the
  ground anchors one square window whose side is ``fx * W / Z``;
* candidate filtering (CPF): windows made mostly of invalid pixels are
  discarded using an integral image of the validity mask.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .depthimage import (Box, ValidityIntegral, as_depth, build_validity_integral,
                         round_half_away)
from .geometry import (CameraIntrinsics, GroundPlane, NoPlaneError, back_project_pixels,
                       fit_plane_ransac)

STAGES = ("gpd", "sis", "cpf")


class Proposal(NamedTuple):
    """Square window with top-left corner (x, y) and its anchor depth."""

    x: int
    y: int
    side: int
    depth_m: float

    @property
    def box(self) -> Box:
        return Box(self.x, self.y, self.side, self.side)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "side": self.side, "depth_m": self.depth_m}


@dataclass
class RoiConfig:
    human_width_m: float = 0.6
    vstd_threshold: float = 0.15
    plane_dist_threshold: float = 0.10
    valid_fraction_min: float = 1.0 / 3.0
    stride: int = 8
    min_side: int = 50
    grid_cells: int = 10
    ransac_iterations: int = 200
    ransac_tol: float = 0.05

    def __post_init__(self):
        for name in ("human_width_m", "vstd_threshold", "plane_dist_threshold", "stride",
                     "min_side", "grid_cells", "ransac_iterations", "ransac_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"RoiConfig.{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.valid_fraction_min <= 1:
            raise ValueError(
                f"RoiConfig.valid_fraction_min must lie in (0, 1], got {self.valid_fraction_min}")


@dataclass
class GridStats:
    """Per-cell point counts and height spread (VSTD) over the x-z footprint."""

    counts: np.ndarray
    vstd: np.ndarray
    extent: tuple[float, float, float, float]  # xmin, xmax, zmin, zmax
    cell_of_point: np.ndarray = field(repr=False)

    def kept_cells(self, threshold: float) -> np.ndarray:
        return (self.counts > 0) & (self.vstd <= threshold)


def sample_ground_candidates(img, K: CameraIntrinsics, stride: int) -> np.ndarray:
    """Back-projected valid pixels of the image's lower half on a stride lattice."""
    d = as_depth(img)
    h = d.shape[0]
    v0 = h // 2
    v0 += (-v0) % stride  # stay on the global lattice
    sub = d[v0::stride, ::stride]
    rows, cols = np.nonzero(sub)
    return back_project_pixels(cols * stride, rows * stride + v0, sub[rows, cols], K)


def grid_stats(points: np.ndarray, cells: int = 10) -> GridStats:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        z = np.zeros((cells, cells))
        return GridStats(z.astype(int), z, (0.0, 0.0, 0.0, 0.0), np.zeros(0, dtype=int))
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    xmin, xmax, zmin, zmax = x.min(), x.max(), z.min(), z.max()

    def bin_of(v, lo, hi):
        if hi <= lo:
            return np.zeros(len(v), dtype=int)
        return np.minimum(((v - lo) / (hi - lo) * cells).astype(int), cells - 1)

    cell = bin_of(z, zmin, zmax) * cells + bin_of(x, xmin, xmax)
    n = np.bincount(cell, minlength=cells * cells)
    s1 = np.bincount(cell, weights=y, minlength=cells * cells)
    nz = np.maximum(n, 1)
    mean = s1 / nz
    s2 = np.bincount(cell, weights=(y - mean[cell]) ** 2, minlength=cells * cells)
    vstd = np.sqrt(s2 / nz)
    return GridStats(n.reshape(cells, cells), vstd.reshape(cells, cells),
                     (float(xmin), float(xmax), float(zmin), float(zmax)), cell)


def ground_candidates(img, K: CameraIntrinsics, cfg: RoiConfig):
    """Lower-half points surviving the VSTD cell filter, plus the grid used."""
    pts = sample_ground_candidates(img, K, cfg.stride)
    stats = grid_stats(pts, cfg.grid_cells)
    keep = stats.kept_cells(cfg.vstd_threshold).ravel()
    return pts[keep[stats.cell_of_point]] if len(pts) else pts, stats


def detect_ground_plane(img, K: CameraIntrinsics, cfg: RoiConfig | None = None,
                        seed: int = 0) -> Optional[GroundPlane]:
    """Ground plane of a depth frame, or ``None`` when none can be fitted."""
    cfg = cfg or RoiConfig()
    pts, _ = ground_candidates(img, K, cfg)
    if len(pts) < 3:
        return None
    try:
        return fit_plane_ransac(pts, cfg.ransac_iterations, cfg.ransac_tol, seed)
    except NoPlaneError:
        return None


def window_width(depth_m, K: CameraIntrinsics, cfg: RoiConfig | None = None):
    """Window side ``round(fx * W / Z)`` in pixels, floored at ``cfg.min_side``.

    Accepts a scalar or an array of depths.
    """
    cfg = cfg or RoiConfig()
    z = np.asarray(depth_m, dtype=float)
    if np.any(~(z > 0)):
        raise ValueError("window width needs positive depths")
    side = np.maximum(round_half_away(K.fx * cfg.human_width_m / z), cfg.min_side).astype(int)
    return int(side) if side.ndim == 0 else side


def anchor_arrays(img, plane: GroundPlane | None, K: CameraIntrinsics, cfg: RoiConfig):
    """Row-major lattice anchors (u, v, depth_mm) that are valid and off the plane."""
    d = as_depth(img)
    s = cfg.stride
    sub = d[::s, ::s]
    rows, cols = np.nonzero(sub)
    depth = sub[rows, cols]
    u, v = cols * s, rows * s
    if plane is not None and len(depth):
        pts = back_project_pixels(u, v, depth, K)
        keep = np.abs(plane.signed_distance(pts)) > cfg.plane_dist_threshold
        u, v, depth = u[keep], v[keep], depth[keep]
    return u, v, depth


def place_windows(u, v, side, width: int, height: int):
    """Centre square windows on their anchors, then shift them inside the image."""
    side = np.minimum(side, min(width, height))
    x = np.clip(u - side // 2, 0, width - side)
    y = np.clip(v - side // 2, 0, height - side)
    return x, y, side


def generate_proposals(img, plane: GroundPlane | None, K: CameraIntrinsics,
                       cfg: RoiConfig | None = None) -> list[Proposal]:
    """Scale-informed sliding window over the non-ground valid pixels."""
    cfg = cfg or RoiConfig()
    d = as_depth(img)
    u, v, depth = anchor_arrays(d, plane, K, cfg)
    if len(depth) == 0:
        return []
    z = depth / 1000.0
    side = window_width(z, K, cfg)
    x, y, side = place_windows(u, v, side, d.shape[1], d.shape[0])
    return list(map(Proposal, x.tolist(), y.tolist(), side.tolist(), z.tolist()))


def filter_proposals(proposals: list[Proposal], integral: ValidityIntegral,
                     cfg: RoiConfig | None = None) -> list[Proposal]:
    """Keep proposals whose valid-pixel fraction reaches ``cfg.valid_fraction_min``."""
    cfg = cfg or RoiConfig()
    if not proposals:
        return []
    x, y, side, _ = (np.array(c) for c in zip(*proposals))
    cnt, area = integral.counts(x.astype(int), y.astype(int), side.astype(int))
    # cnt / area >= f without division
    keep = (area > 0) & (cnt >= cfg.valid_fraction_min * area)
    return [p for p, k in zip(proposals, keep.tolist()) if k]


@dataclass
class RoiResult:
    proposals: list[Proposal]
    plane: GroundPlane | None
    n_sis: int


def select_rois(img, K: CameraIntrinsics, cfg: RoiConfig | None = None, seed: int = 0,
                stages=STAGES) -> RoiResult:
    """Run the enabled ROI stages on one frame; SIS always runs."""
    cfg = cfg or RoiConfig()
    stages = set(stages)
    unknown = stages - set(STAGES)
    if unknown:
        raise ValueError(f"unknown ROI stages: {sorted(unknown)}")
    plane = detect_ground_plane(img, K, cfg, seed) if "gpd" in stages else None
    props = generate_proposals(img, plane, K, cfg)
    n_sis = len(props)
    if "cpf" in stages:
        props = filter_proposals(props, build_validity_integral(img), cfg)
    return RoiResult(props, plane, n_sis)
