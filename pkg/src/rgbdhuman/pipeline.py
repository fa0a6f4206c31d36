"""End-to-end per-frame detection and its configuration."""
from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .depthimage import build_validity_integral, fill_holes
from .encoding import EncodingScheme, encode
from .fusion import (ConstantScorer, FileScorer, FusionWeightParams, ScoredProposal, Scorer,
                     nms, score_frame)
from .geometry import CameraIntrinsics, GroundPlane
from .roi import (STAGES, Proposal, RoiConfig, detect_ground_plane, filter_proposals,
                  generate_proposals)

TIMED_STAGES = ("fill", "encode", "gpd", "sis", "integral", "cpf", "fusion", "nms")


@dataclass
class PipelineConfig:
    """Every tunable of a detection run; JSON round-trippable.

    Scorers are given as ``"oracle"``, ``"file:<path>"`` or ``"constant:<p>"``.
    """

    intrinsics: CameraIntrinsics | None = None
    roi: RoiConfig = field(default_factory=RoiConfig)
    fusion: FusionWeightParams = field(default_factory=FusionWeightParams)
    encoding: EncodingScheme = EncodingScheme.CECD
    nms_iou: float = 0.3
    score_min: float = 0.5
    fill_radius: int = 2
    fill_passes: int = 3
    stages: tuple[str, ...] = STAGES
    color_scorer: str = "constant:0.5"
    depth_scorer: str = "constant:0.5"
    oracle_noise: bool = False
    seed: int = 0

    def __post_init__(self):
        self.encoding = EncodingScheme.parse(self.encoding)
        self.stages = tuple(self.stages)
        bad = set(self.stages) - set(STAGES)
        if bad or "sis" not in self.stages:
            raise ValueError(f"stages must include 'sis' and come from {STAGES}, got {self.stages}")
        if not 0 <= self.nms_iou <= 1 or not 0 <= self.score_min <= 1:
            raise ValueError("nms_iou and score_min must lie in [0, 1]")
        for s in (self.color_scorer, self.depth_scorer):
            parse_scorer_spec(s)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["intrinsics"] = self.intrinsics.to_dict() if self.intrinsics else None
        d["roi"] = asdict(self.roi)
        d["fusion"] = asdict(self.fusion)
        d["encoding"] = self.encoding.value
        d["stages"] = list(self.stages)
        return d

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "PipelineConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        intr = d.get("intrinsics")
        if isinstance(intr, str):
            path = Path(intr)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            d["intrinsics"] = CameraIntrinsics.load(path)
        elif isinstance(intr, dict):
            d["intrinsics"] = CameraIntrinsics.from_dict(intr)
        if "roi" in d:
            d["roi"] = RoiConfig(**d["roi"])
        if "fusion" in d:
            d["fusion"] = FusionWeightParams(**d["fusion"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        with open(path) as f:
            return cls.from_dict(json.load(f), base_dir=path.parent)


def parse_scorer_spec(spec: str) -> tuple[str, str | None]:
    kind, _, arg = str(spec).partition(":")
    if kind == "oracle" and not arg:
        return kind, None
    if kind == "file" and arg:
        return kind, arg
    if kind == "constant" and arg:
        p = float(arg)
        if not 0 <= p <= 1:
            raise ValueError(f"constant score {p} outside [0, 1]")
        return kind, arg
    raise ValueError(f"bad scorer {spec!r}; use oracle, file:<path> or constant:<p>")


def make_scorer(spec: str, modality: str, annotations=None, noisy: bool = False,
                seed: int = 0) -> Scorer:
    kind, arg = parse_scorer_spec(spec)
    if kind == "constant":
        return ConstantScorer(float(arg))
    if kind == "file":
        return FileScorer.load(arg)
    from . import synth
    if annotations is None:
        raise ValueError("the oracle scorer needs ground-truth annotations")
    profile = {"color": synth.COLOR_NOISE, "depth": synth.DEPTH_NOISE}[modality] \
        if noisy else synth.NOISELESS
    return synth.OracleScorer(annotations, profile, seed, modality)


class FrameResult(NamedTuple):
    frame: int
    detections: list[ScoredProposal]
    proposals: list[Proposal]
    plane: GroundPlane | None
    encoded: np.ndarray | None


class StageTimer:
    """Accumulates wall time per stage name, in seconds."""

    def __init__(self):
        self.times: dict[str, float] = {}

    @contextmanager
    def __call__(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.times[name] = self.times.get(name, 0.0) + time.perf_counter() - t0


@contextmanager
def _untimed(name):
    yield


def detect_frame(depth, frame: int, cfg: PipelineConfig, color_scorer: Scorer,
                 depth_scorer: Scorer, timer: StageTimer | None = None,
                 with_encoding: bool = True) -> FrameResult:
    """Fill, encode, select ROIs, score, fuse and suppress one frame.

    ROI selection reads the raw (unfilled) raster; hole filling only feeds
    the encoded image handed to the depth classifier.
    """
    if cfg.intrinsics is None:
        raise ValueError("camera intrinsics are required")
    K = cfg.intrinsics
    K.check_image(depth.shape[1], depth.shape[0])
    t = timer or _untimed
    encoded = None
    if with_encoding:
        with t("fill"):
            filled = fill_holes(depth, cfg.fill_radius, cfg.fill_passes)
        with t("encode"):
            encoded = encode(filled, cfg.encoding)
    plane = None
    if "gpd" in cfg.stages:
        with t("gpd"):
            plane = detect_ground_plane(depth, K, cfg.roi, cfg.seed)
    with t("sis"):
        props = generate_proposals(depth, plane, K, cfg.roi)
    if "cpf" in cfg.stages:
        with t("integral"):
            integral = build_validity_integral(depth)
        with t("cpf"):
            props = filter_proposals(props, integral, cfg.roi)
    with t("fusion"):
        scored = score_frame(props, color_scorer, depth_scorer, cfg.fusion, frame)
    with t("nms"):
        dets = nms(scored, cfg.nms_iou, cfg.score_min)
    return FrameResult(frame, dets, props, plane, encoded)
