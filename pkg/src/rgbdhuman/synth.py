"""Synthetic depth scenes with known ground truth.

A level camera looks at a flat floor ``floor_height_m`` below it; people are
upright, camera-facing slabs standing on the floor. Each person's
annotation is the top ``width x width`` square of its slab, i.e. the upper
body. Rendering is a z-buffer over the floor, the slabs and an optional
back wall, followed by Gaussian depth noise and random pixel dropout.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .depthimage import round_half_away
from .evaluation import Annotation
from .fusion import iou_matrix
from .geometry import CameraIntrinsics, GroundPlane
from .roi import Proposal

KINECT = CameraIntrinsics(fx=525.0, fy=525.0, cx=319.5, cy=239.5)


@dataclass(frozen=True)
class Person:
    x_m: float
    z_m: float
    width_m: float = 0.6
    height_m: float = 1.75

    def __post_init__(self):
        if not (self.z_m > 0 and self.width_m > 0 and self.height_m > 0):
            raise ValueError(f"person needs positive depth and size: {self}")


@dataclass(frozen=True)
class SceneSpec:
    camera: CameraIntrinsics = KINECT
    width: int = 640
    height: int = 480
    floor_height_m: float = 1.4
    persons: tuple[Person, ...] = ()
    depth_noise_sigma_mm: float = 0.0
    invalid_fraction: float = 0.0
    seed: int = 0
    max_range_m: float = 8.0
    wall_z_m: float | None = None
    care_min_visible: float = 0.5

    def __post_init__(self):
        if not self.floor_height_m > 0:
            raise ValueError("the floor must lie below the camera (floor_height_m > 0)")
        if not 0.0 <= self.invalid_fraction <= 1.0:
            raise ValueError(f"invalid_fraction must lie in [0, 1], got {self.invalid_fraction}")
        self.camera.check_image(self.width, self.height)
        object.__setattr__(self, "persons", tuple(self.persons))

    @property
    def ground_plane(self) -> GroundPlane:
        return GroundPlane((0.0, 1.0, 0.0), -self.floor_height_m)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["camera"] = self.camera.to_dict()
        d["persons"] = [asdict(p) for p in self.persons]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        if "camera" in d:
            d["camera"] = CameraIntrinsics.from_dict(d["camera"])
        d["persons"] = tuple(Person(**p) for p in d.get("persons", ()))
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SceneSpec":
        with open(Path(path)) as f:
            return cls.from_dict(json.load(f))

    def save(self, path) -> None:
        with open(Path(path), "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")


class RenderedScene(NamedTuple):
    depth: np.ndarray
    annotations: list[Annotation]
    plane: GroundPlane


def _zbuffer(spec: SceneSpec):
    """Noise-free depth in meters (inf = nothing) and the person id per pixel (-1 = none)."""
    K = spec.camera
    a = (np.arange(spec.width) - K.cx) / K.fx
    b = (np.arange(spec.height) - K.cy) / K.fy
    A, B = np.meshgrid(a, b)
    depth = np.full(A.shape, np.inf)
    with np.errstate(divide="ignore"):
        floor = np.where(B > 0, spec.floor_height_m / B, np.inf)
    depth = np.minimum(depth, floor)
    if spec.wall_z_m is not None:
        depth = np.minimum(depth, spec.wall_z_m)
    owner = np.full(A.shape, -1, dtype=int)
    for i, p in enumerate(spec.persons):
        x, y = A * p.z_m, B * p.z_m
        hit = ((np.abs(x - p.x_m) <= p.width_m / 2)
               & (y >= spec.floor_height_m - p.height_m) & (y <= spec.floor_height_m)
               & (p.z_m < depth))
        depth[hit] = p.z_m
        owner[hit] = i
    return depth, owner


def upper_body_box(p: Person, spec: SceneSpec) -> tuple[int, int, int]:
    """Projected (x, y, side) of a person's top square, rounded to pixels."""
    K = spec.camera
    top = spec.floor_height_m - p.height_m
    u0 = K.fx * (p.x_m - p.width_m / 2) / p.z_m + K.cx
    v0 = K.fy * top / p.z_m + K.cy
    side = K.fx * p.width_m / p.z_m
    return int(round_half_away(u0)), int(round_half_away(v0)), max(1, int(round_half_away(side)))


def render(spec: SceneSpec, frame: int = 0, quantize: bool = True) -> RenderedScene:
    """Render a depth frame with its annotations and the true ground plane.

    The frame is uint16 millimeters, like a sensor's; ``quantize=False``
    keeps float millimeters so that noise-free geometry stays exact.
    """
    depth_m, owner = _zbuffer(spec)
    rng = np.random.default_rng(spec.seed)
    valid = depth_m <= spec.max_range_m
    mm = np.where(valid, depth_m * 1000.0, 0.0)
    noise = rng.standard_normal(mm.shape)
    if spec.depth_noise_sigma_mm > 0:
        mm = np.where(valid, mm + spec.depth_noise_sigma_mm * noise, 0.0)
    if quantize:
        mm = np.where(valid, np.clip(round_half_away(mm), 1, 65535), 0).astype(np.uint16)
    else:
        mm = np.where(valid, np.maximum(mm, 1e-3), 0.0)
    drop = rng.random(mm.shape) < spec.invalid_fraction
    mm[drop] = 0

    anns = []
    for i, p in enumerate(spec.persons):
        x, y, side = upper_body_box(p, spec)
        x0, y0 = max(x, 0), max(y, 0)
        x1, y1 = min(x + side, spec.width), min(y + side, spec.height)
        seen = int((owner[y0:y1, x0:x1] == i).sum()) if x1 > x0 and y1 > y0 else 0
        if seen == 0:
            continue
        anns.append(Annotation(frame, x, y, side, seen / side ** 2 >= spec.care_min_visible))
    return RenderedScene(mm, anns, spec.ground_plane)


def random_scene(seed: int, n_persons=(1, 3), noise_mm: float = 10.0,
                 invalid_fraction: float = 0.1, **kw) -> SceneSpec:
    """A floor plus 1-3 people that do not overlap in the image.

    People stand between 1.5 and 7 m away, fully inside the frame.
    """
    rng = np.random.default_rng(seed)
    base = SceneSpec(depth_noise_sigma_mm=noise_mm, invalid_fraction=invalid_fraction,
                     seed=seed, **kw)
    K = base.camera
    n = int(rng.integers(n_persons[0], n_persons[1] + 1))
    persons, spans = [], []
    for _ in range(200):
        if len(persons) == n:
            break
        z = float(rng.uniform(1.5, 7.0))
        w = float(rng.uniform(0.5, 0.7))
        h = float(rng.uniform(1.55, 1.9))
        half_fov = min(K.cx, base.width - K.cx) / K.fx
        xm = float(rng.uniform(-1, 1)) * (half_fov * z - w / 2 - 0.1)
        u0 = K.fx * (xm - w / 2) / z + K.cx
        u1 = K.fx * (xm + w / 2) / z + K.cx
        v0 = K.fy * (base.floor_height_m - h) / z + K.cy
        if v0 < 2 or any(u0 < b + 4 and u1 > a - 4 for a, b in spans):
            continue
        persons.append(Person(xm, z, w, h))
        spans.append((u0, u1))
    return replace(base, persons=tuple(persons))


@dataclass(frozen=True)
class NoiseProfile:
    """Label noise of an oracle scorer, applied in logit space.

    The logit of a window is ``slope * (max IoU - centre)``. Gaussian jitter
    with standard deviation ``jitter + jitter_per_m * max(0, depth - ref_depth_m)``
    is added, and with probability ``flip`` the probability is inverted.
    """

    slope: float = 20.0
    centre: float = 0.5
    jitter: float = 0.0
    jitter_per_m: float = 0.0
    ref_depth_m: float = 1.0
    flip: float = 0.0

    def sigma(self, depth_m: float) -> float:
        return self.jitter + self.jitter_per_m * max(0.0, depth_m - self.ref_depth_m)


NOISELESS = NoiseProfile()
# colour detections are equally unreliable at every distance
COLOR_NOISE = NoiseProfile(jitter=4.0, flip=0.01)
# depth detections are sharp up close and degrade with range
DEPTH_NOISE = NoiseProfile(jitter=0.5, jitter_per_m=2.0, flip=0.01)


_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _uniforms(key: tuple[int, ...], n: int) -> list[float]:
    """``n`` uniforms in (0, 1) that depend only on ``key`` (order-free scoring)."""
    h = 0
    for k in key:
        h = _splitmix64(h ^ (k & _MASK64))
    out = []
    for _ in range(n):
        h = _splitmix64(h)
        out.append(((h >> 11) + 0.5) / float(1 << 53))
    return out


_STREAMS = {"color": 1, "depth": 2}


class OracleScorer:
    """Stand-in classifier that scores windows by their overlap with the truth."""

    def __init__(self, annotations, profile: NoiseProfile = NOISELESS, seed: int = 0,
                 stream: str = "color"):
        self.profile = profile
        self.seed = seed
        self.stream = _STREAMS.get(stream, 0) if isinstance(stream, str) else int(stream)
        boxes: dict[int, list] = {}
        for a in annotations:
            boxes.setdefault(a.frame, []).append(a.box)
        self._boxes = {f: np.array(b, dtype=float) for f, b in boxes.items()}

    def max_iou(self, frame: int, proposal: Proposal) -> float:
        b = self._boxes.get(int(frame))
        if b is None:
            return 0.0
        box = (proposal.x, proposal.y, proposal.side, proposal.side)
        return float(iou_matrix(box, b).max())

    def score(self, frame: int, proposal: Proposal) -> float:
        prof = self.profile
        logit = prof.slope * (self.max_iou(frame, proposal) - prof.centre)
        sigma = prof.sigma(proposal.depth_m)
        if sigma > 0 or prof.flip > 0:
            u1, u2, u3 = _uniforms((self.seed, self.stream, int(frame), proposal.x,
                                    proposal.y, proposal.side), 3)
            logit += sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
            if u3 < prof.flip:
                logit = -logit
        if logit >= 0:
            return 1.0 / (1.0 + math.exp(-logit))
        e = math.exp(logit)
        return e / (1.0 + e)


def oracle_scorer(annotations, noise: NoiseProfile = NOISELESS, seed: int = 0,
                  stream: str = "color") -> OracleScorer:
    return OracleScorer(annotations, noise, seed, stream)


def render_sequence(spec: SceneSpec, n_frames: int) -> list[RenderedScene]:
    """Frames of one scene that differ only in their noise and dropout draws."""
    return [render(replace(spec, seed=spec.seed + i), frame=i) for i in range(n_frames)]
