"""Colour/depth score fusion and non-maximum suppression."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Protocol, runtime_checkable

import numpy as np

from .io import read_jsonl
from .roi import Proposal

EPS = 1e-9


class MissingScoreError(KeyError):
    """A file-backed scorer has no entry for a queried proposal."""

    def __init__(self, frame, proposal: Proposal, source=None):
        self.frame = frame
        self.proposal = proposal
        self.source = source
        super().__init__(frame, proposal)

    def __str__(self):
        where = f" in {self.source}" if self.source else ""
        return (f"no score{where} for frame {self.frame} window "
                f"x={self.proposal.x} y={self.proposal.y} side={self.proposal.side}")


@dataclass(frozen=True)
class FusionWeightParams:
    d_near: float = 1.0
    d_far: float = 6.0

    def __post_init__(self):
        if not 0 < self.d_near < self.d_far:
            raise ValueError(f"need 0 < d_near < d_far, got {self.d_near}, {self.d_far}")


def weight(d: float, params: FusionWeightParams | None = None) -> float:
    """Depth weight: 1 up to ``d_near``, 0 from ``d_far``, linear in between."""
    p = params or FusionWeightParams()
    if d <= p.d_near:
        return 1.0
    if d >= p.d_far:
        return 0.0
    return 1.0 - (d - p.d_near) / (p.d_far - p.d_near)


def fuse(p_color: float, p_depth: float, w: float) -> float:
    """Weighted log-likelihood fusion normalised over the two classes.

    Equivalent to ``pc^(1-w) pd^w / (pc^(1-w) pd^w + (1-pc)^(1-w) (1-pd)^w)``
    with both inputs clamped to ``[EPS, 1 - EPS]``.
    """
    pc = min(max(p_color, EPS), 1.0 - EPS)
    pd = min(max(p_depth, EPS), 1.0 - EPS)
    pos = (1.0 - w) * math.log(pc) + w * math.log(pd)
    neg = (1.0 - w) * math.log1p(-pc) + w * math.log1p(-pd)
    t = neg - pos
    if t > 0:
        e = math.exp(-t)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(t))


def iou(a, b) -> float:
    """Intersection over union of two ``(x, y, w, h)`` boxes."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (aw * ah + bw * bh - inter)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between (N, 4) and (M, 4) arrays of ``(x, y, w, h)`` boxes."""
    a = np.asarray(a, dtype=float).reshape(-1, 4)
    b = np.asarray(b, dtype=float).reshape(-1, 4)
    ax1, ay1 = a[:, 0, None], a[:, 1, None]
    ax2, ay2 = ax1 + a[:, 2, None], ay1 + a[:, 3, None]
    bx1, by1 = b[None, :, 0], b[None, :, 1]
    bx2, by2 = bx1 + b[None, :, 2], by1 + b[None, :, 3]
    iw = np.clip(np.minimum(ax2, bx2) - np.maximum(ax1, bx1), 0, None)
    ih = np.clip(np.minimum(ay2, by2) - np.maximum(ay1, by1), 0, None)
    inter = iw * ih
    union = a[:, 2, None] * a[:, 3, None] + b[None, :, 2] * b[None, :, 3] - inter
    return inter / union


class ScoredProposal(NamedTuple):
    proposal: Proposal
    p_color: float
    p_depth: float
    p_fused: float

    @property
    def box(self) -> tuple[int, int, int, int]:
        p = self.proposal
        return (p.x, p.y, p.side, p.side)

    def to_dict(self, frame=None) -> dict:
        p = self.proposal
        d = {} if frame is None else {"frame": frame}
        d.update(x=p.x, y=p.y, side=p.side, p_color=self.p_color,
                 p_depth=self.p_depth, p_fused=self.p_fused)
        return d


def rank_order(scores, ys, xs) -> list[int]:
    """Indices by descending score, ties broken by smaller y then smaller x."""
    return sorted(range(len(scores)), key=lambda i: (-scores[i], ys[i], xs[i]))


def nms(scored: list[ScoredProposal], iou_threshold: float = 0.3,
        score_min: float = 0.5) -> list[ScoredProposal]:
    """Greedy NMS on fused scores; kept windows come out in rank order."""
    cand = [s for s in scored if s.p_fused >= score_min]
    if not cand:
        return []
    order = np.array(rank_order([s.p_fused for s in cand], [s.proposal.y for s in cand],
                                [s.proposal.x for s in cand]))
    boxes = np.array([s.box for s in cand], dtype=float)
    x1, y1, side = boxes[:, 0], boxes[:, 1], boxes[:, 2]
    x2, y2 = x1 + side, y1 + side
    area = side * side
    keep = []
    while order.size:
        i, rest = order[0], order[1:]
        keep.append(cand[i])
        iw = np.clip(np.minimum(x2[i], x2[rest]) - np.maximum(x1[i], x1[rest]), 0, None)
        ih = np.clip(np.minimum(y2[i], y2[rest]) - np.maximum(y1[i], y1[rest]), 0, None)
        inter = iw * ih
        overlap = inter / (area[i] + area[rest] - inter)
        order = rest[overlap <= iou_threshold]
    return keep


@runtime_checkable
class Scorer(Protocol):
    def score(self, frame: int, proposal: Proposal) -> float:
        ...


@dataclass(frozen=True)
class ConstantScorer:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"constant score must lie in [0, 1], got {self.p}")

    def score(self, frame: int, proposal: Proposal) -> float:
        return self.p


class FileScorer:
    """Scores read from JSON lines ``{"frame", "x", "y", "side", "p"}``.

    The whole file is loaded up front into an immutable mapping, so a
    FileScorer can be shared between threads.
    """

    def __init__(self, scores: dict, source=None):
        self._scores = dict(scores)
        self.source = source

    @classmethod
    def from_records(cls, records: Iterable[dict], source=None) -> "FileScorer":
        scores = {}
        for i, r in enumerate(records, 1):
            try:
                key = (int(r["frame"]), int(r["x"]), int(r["y"]), int(r["side"]))
                p = float(r["p"])
            except (KeyError, TypeError, ValueError) as e:
                raise ValueError(f"{source or 'scores'}:{i}: bad score record ({e})") from None
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{source or 'scores'}:{i}: probability {p} outside [0, 1]")
            scores[key] = p
        return cls(scores, source)

    @classmethod
    def load(cls, path) -> "FileScorer":
        return cls.from_records(read_jsonl(path), source=str(Path(path)))

    def score(self, frame: int, proposal: Proposal) -> float:
        try:
            return self._scores[(int(frame), proposal.x, proposal.y, proposal.side)]
        except KeyError:
            raise MissingScoreError(frame, proposal, self.source) from None


def score_frame(proposals: list[Proposal], color_scorer: Scorer, depth_scorer: Scorer,
                params: FusionWeightParams | None = None, frame: int = 0
                ) -> list[ScoredProposal]:
    params = params or FusionWeightParams()
    out = []
    for p in proposals:
        pc = float(color_scorer.score(frame, p))
        pd = float(depth_scorer.score(frame, p))
        out.append(ScoredProposal(p, pc, pd, fuse(pc, pd, weight(p.depth_m, params))))
    return out

