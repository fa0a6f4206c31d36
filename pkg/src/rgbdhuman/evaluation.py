"""Detection-vs-annotation matching, precision/recall curves and AP.

Matching is greedy in score order with one-to-one consumption of "care"
annotations at an IoU of at least ``iou_min`` (0.5 by default). A second
detection on an already matched person counts as a false positive.
Annotations flagged ``care=False`` follow the no-reward-no-penalty rule:
a detection whose best overlap is such a region is ignored.
"""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .fusion import iou_matrix, rank_order
from .io import FormatError, read_jsonl

TP, FP, IGNORED = "tp", "fp", "ignored"


class Annotation(NamedTuple):
    frame: int
    x: int
    y: int
    side: int
    care: bool = True

    @property
    def box(self):
        return (self.x, self.y, self.side, self.side)

    @classmethod
    def from_dict(cls, d: dict) -> "Annotation":
        care = d.get("care", True)
        if not isinstance(care, bool):
            raise ValueError(f"'care' must be true or false, got {care!r}")
        a = cls(int(d["frame"]), int(d["x"]), int(d["y"]), int(d["side"]), care)
        if a.side <= 0:
            raise ValueError(f"annotation side must be positive, got {a.side}")
        return a

    def to_dict(self) -> dict:
        return self._asdict()


class Detection(NamedTuple):
    frame: int
    x: int
    y: int
    side: int
    score: float

    @property
    def box(self):
        return (self.x, self.y, self.side, self.side)

    @classmethod
    def from_dict(cls, d: dict, key: str = "p_fused") -> "Detection":
        return cls(int(d["frame"]), int(d["x"]), int(d["y"]), int(d["side"]), float(d[key]))


class MatchResult(NamedTuple):
    tp: int
    fp: int
    fn: int
    ignored: int


@dataclass(frozen=True)
class PrPoint:
    threshold: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int


def _sorted(dets):
    order = rank_order([d.score for d in dets], [d.y for d in dets], [d.x for d in dets])
    return [dets[i] for i in order]


def label_detections(dets, anns, iou_min: float = 0.5) -> tuple[list, list[str], int]:
    """Greedy labelling of one frame's detections.

    Returns the detections in rank order, their labels (``"tp"``, ``"fp"``
    or ``"ignored"``) and the number of care annotations left unmatched.
    """
    dets = _sorted(list(dets))
    anns = list(anns)
    n_care = sum(a.care for a in anns)
    if not dets:
        return dets, [], n_care
    if not anns:
        return dets, [FP] * len(dets), 0
    overlap = iou_matrix([d.box for d in dets], [a.box for a in anns])
    care = np.array([a.care for a in anns])
    consumed = np.zeros(len(anns), dtype=bool)
    labels = []
    for i in range(len(dets)):
        row = overlap[i]
        open_care = care & ~consumed & (row >= iou_min)
        if open_care.any():
            j = int(np.argmax(np.where(open_care, row, -1.0)))
            consumed[j] = True
            labels.append(TP)
            continue
        j = int(np.argmax(row))
        if not care[j] and row[j] >= iou_min:
            labels.append(IGNORED)
        else:
            labels.append(FP)
    return dets, labels, int((care & ~consumed).sum())


def match_frame(dets, anns, iou_min: float = 0.5) -> MatchResult:
    _, labels, fn = label_detections(dets, anns, iou_min)
    return MatchResult(labels.count(TP), labels.count(FP), fn, labels.count(IGNORED))


def _by_frame(items) -> dict:
    out = defaultdict(list)
    for it in items:
        out[it.frame].append(it)
    return out


def _point(threshold, tp, fp, n_care) -> PrPoint:
    # nothing claimed: precision 1; nothing to find: recall 1
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / n_care if n_care else 1.0
    return PrPoint(float(threshold), precision, recall, tp, fp, n_care - tp)


def pr_curve(detections: Iterable[Detection], annotations: Iterable[Annotation],
             thresholds=None, iou_min: float = 0.5) -> list[PrPoint]:
    """Precision and recall at each score threshold (detections with score >= t).

    ``thresholds`` must be descending; by default the distinct detection
    scores are used. Greedy matching of a score-ordered prefix does not
    depend on later detections, so one labelling pass per frame serves every
    threshold.
    """
    detections = list(detections)
    annotations = list(annotations)
    if thresholds is None:
        thresholds = sorted({d.score for d in detections}, reverse=True)
    thresholds = [float(t) for t in thresholds]
    if any(a < b for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be sorted in descending order")
    n_care = sum(a.care for a in annotations)
    dets_f, anns_f = _by_frame(detections), _by_frame(annotations)
    scores, labels = [], []
    for frame, dets in dets_f.items():
        ranked, lab, _ = label_detections(dets, anns_f.get(frame, []), iou_min)
        scores.extend(d.score for d in ranked)
        labels.extend(lab)
    scores = np.asarray(scores, dtype=float)
    is_tp = np.array([lab == TP for lab in labels], dtype=bool)
    is_fp = np.array([lab == FP for lab in labels], dtype=bool)
    curve = []
    for t in thresholds:
        keep = scores >= t
        curve.append(_point(t, int((keep & is_tp).sum()), int((keep & is_fp).sum()), n_care))
    return curve


def pr_curve_bruteforce(detections, annotations, thresholds, iou_min: float = 0.5):
    """Reference curve that re-runs :func:`match_frame` for every threshold."""
    detections = list(detections)
    anns_f = _by_frame(annotations)
    n_care = sum(a.care for a in annotations)
    curve = []
    for t in thresholds:
        tp = fp = 0
        for frame, dets in _by_frame(d for d in detections if d.score >= t).items():
            r = match_frame(dets, anns_f.get(frame, []), iou_min)
            tp, fp = tp + r.tp, fp + r.fp
        curve.append(_point(t, tp, fp, n_care))
    return curve


def average_precision(curve: list[PrPoint]) -> float:
    """Trapezoidal area under precision over recall.

    The curve is walked in threshold order, starting from recall 0 at the
    first point's precision.
    """
    if not curve:
        raise ValueError("average precision of an empty curve")
    r = np.array([0.0] + [p.recall for p in curve])
    p = np.array([curve[0].precision] + [p.precision for p in curve])
    return float(np.sum(np.diff(r) * (p[1:] + p[:-1]) / 2.0))


def load_annotations(path) -> list[Annotation]:
    out = []
    for i, rec in enumerate(read_jsonl(path), 1):
        try:
            out.append(Annotation.from_dict(rec))
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"{path}:{i}: bad annotation ({e})") from None
    return out


def load_detections(path, key: str = "p_fused") -> list[Detection]:
    out = []
    for i, rec in enumerate(read_jsonl(path), 1):
        try:
            out.append(Detection.from_dict(rec, key))
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"{path}:{i}: bad detection ({e})") from None
    return out


def write_pr_csv(path, curve: list[PrPoint]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["threshold", "precision", "recall", "tp", "fp", "fn"])
        for p in curve:
            w.writerow([repr(p.threshold), repr(p.precision), repr(p.recall), p.tp, p.fp, p.fn])


def write_curve_dat(path, curve: list[PrPoint], label: str = "") -> None:
    """Gnuplot-friendly two-column recall/precision file."""
    with open(path, "w") as f:
        f.write(f"# {label}\n" if label else "")
        f.write("# recall precision\n")
        for p in curve:
            f.write(f"{p.recall!r} {p.precision!r}\n")
