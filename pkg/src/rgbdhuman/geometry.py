"""Pinhole camera math: back-projection, planes and RANSAC plane fitting.

Camera frame convention is the image one: x right, y down, z forward.
A floor seen by a level camera therefore has a normal close to (0, 1, 0).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np


class InvalidDepthError(ValueError):
    """Raised when a depth of 0 (no measurement) or less is back-projected."""


class NoPlaneError(ValueError):
    """Raised when a point set cannot support a plane hypothesis."""


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    def check_image(self, width: int, height: int) -> None:
        if not (0 <= self.cx < width and 0 <= self.cy < height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside a {width}x{height} image"
            )

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        try:
            return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]))
        except KeyError as e:
            raise ValueError(f"intrinsics missing key {e.args[0]!r}") from None

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}

    @classmethod
    def load(cls, path) -> "CameraIntrinsics":
        with open(Path(path)) as f:
            return cls.from_dict(json.load(f))

    def save(self, path) -> None:
        with open(Path(path), "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")


class Point3(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class GroundPlane:
    """Plane ``normal . p + offset = 0`` with the statistics of its inlier set."""

    normal: tuple[float, float, float]
    offset: float
    inlier_count: int = 0
    inlier_rms: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError(f"plane normal must be unit length, got |n|={np.linalg.norm(n)}")

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """Signed distances of an (..., 3) array of points."""
        return np.asarray(points, dtype=float) @ np.asarray(self.normal) + self.offset

    def angle_to(self, other: "GroundPlane") -> float:
        """Unsigned angle between the two planes' normals, in degrees."""
        c = abs(float(np.dot(self.normal, other.normal)))
        return float(np.degrees(np.arccos(min(1.0, c))))

    def aligned_offset(self, other: "GroundPlane") -> float:
        """This plane's offset after flipping its normal to agree with ``other``."""
        return self.offset if np.dot(self.normal, other.normal) >= 0 else -self.offset


def back_project(u: float, v: float, depth_mm: float, K: CameraIntrinsics) -> Point3:
    if not depth_mm > 0:
        raise InvalidDepthError(f"cannot back-project pixel ({u}, {v}) with depth {depth_mm}")
    z = depth_mm / 1000.0
    return Point3((u - K.cx) * z / K.fx, (v - K.cy) * z / K.fy, z)


def back_project_pixels(u, v, depth_mm, K: CameraIntrinsics) -> np.ndarray:
    """Vectorised :func:`back_project`; returns an (N, 3) array in meters.

    Callers are responsible for passing valid (positive) depths only.
    """
    z = np.asarray(depth_mm, dtype=float) / 1000.0
    x = (np.asarray(u, dtype=float) - K.cx) * z / K.fx
    y = (np.asarray(v, dtype=float) - K.cy) * z / K.fy
    return np.stack([x, y, z], axis=-1)


def project(p, K: CameraIntrinsics) -> tuple[float, float]:
    x, y, z = p
    return x * K.fx / z + K.cx, y * K.fy / z + K.cy


def plane_distance(p, plane: GroundPlane) -> float:
    return abs(float(np.dot(plane.normal, p)) + plane.offset)


def _canonical(normal: np.ndarray, offset: float) -> tuple[np.ndarray, float]:
    # Sign fixed so the dominant component is positive; keeps fits reproducible.
    if normal[np.argmax(np.abs(normal))] < 0:
        return -normal, -offset
    return normal, offset


def fit_plane_lsq(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Orthogonal least-squares plane through ``points``.

    The normal is the eigenvector of the point covariance with the smallest
    eigenvalue.
    """
    pts = np.asarray(points, dtype=float)
    centroid = pts.mean(axis=0)
    d = pts - centroid
    _, vecs = np.linalg.eigh(d.T @ d)
    normal = vecs[:, 0]
    normal = normal / np.linalg.norm(normal)
    return _canonical(normal, -float(normal @ centroid))


def fit_plane_ransac(
    points,
    iterations: int = 200,
    inlier_tol: float = 0.05,
    rng_seed: int = 0,
) -> GroundPlane:
    """Fit a plane with RANSAC and refine it on the winning inlier set.

    Every hypothesis is the exact plane through three randomly drawn points;
    the one with the most points within ``inlier_tol`` wins (first one on
    ties) and is refit by orthogonal least squares.

    Raises
    ------
    NoPlaneError
        Fewer than three points, or no non-degenerate triple was drawn.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(pts)
    if n < 3:
        raise NoPlaneError(f"need at least 3 points to fit a plane, got {n}")
    rng = np.random.default_rng(rng_seed)
    idx = rng.integers(0, n, size=(iterations, 3))

    a, b, c = pts[idx[:, 0]], pts[idx[:, 1]], pts[idx[:, 2]]
    normals = np.cross(b - a, c - a)
    norms = np.linalg.norm(normals, axis=1)
    scale = np.maximum(np.linalg.norm(b - a, axis=1) * np.linalg.norm(c - a, axis=1), 1e-300)
    ok = norms > 1e-9 * scale  # rejects repeated and collinear samples
    if not ok.any():
        raise NoPlaneError("all sampled point triples are degenerate (collinear points?)")
    normals = normals[ok] / norms[ok, None]
    offsets = -np.einsum("ij,ij->i", normals, a[ok])

    # process hypotheses in chunks to bound memory for large clouds
    best_count, best_mask = -1, None
    chunk = max(1, 2_000_000 // max(n, 1))
    for s in range(0, len(normals), chunk):
        dist = np.abs(pts @ normals[s:s + chunk].T + offsets[s:s + chunk])
        inl = dist <= inlier_tol
        counts = inl.sum(axis=0)
        k = int(np.argmax(counts))
        if counts[k] > best_count:
            best_count, best_mask = int(counts[k]), inl[:, k]

    inliers = pts[best_mask]
    if len(inliers) < 3:
        raise NoPlaneError("best hypothesis has fewer than 3 inliers")
    normal, offset = fit_plane_lsq(inliers)
    resid = inliers @ normal + offset
    return GroundPlane(
        normal=tuple(float(x) for x in normal),
        offset=float(offset),
        inlier_count=len(inliers),
        inlier_rms=float(np.sqrt(np.mean(resid ** 2))),
    )
