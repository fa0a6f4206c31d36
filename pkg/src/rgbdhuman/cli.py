"""Command-line front end: synth, encode, rois, detect, eval and bench."""
from __future__ import annotations

import argparse
import csv
import gc
import json
import logging
import statistics
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io, synth
from .depthimage import fill_holes
from .encoding import EncodingScheme, encode
from .evaluation import (average_precision, load_annotations, load_detections, pr_curve,
                         write_curve_dat, write_pr_csv)
from .fusion import ConstantScorer, MissingScoreError
from .geometry import CameraIntrinsics
from .pipeline import PipelineConfig, StageTimer, detect_frame, make_scorer
from .roi import anchor_arrays, select_rois

log = logging.getLogger("rgbdhuman")


class CliError(Exception):
    pass


def _frames(path) -> list[tuple[int, Path]]:
    path = Path(path)
    if path.is_dir():
        frames = io.frame_files(path)
        if not frames:
            raise CliError(f"{path}: no numbered .pgm frames found")
        return frames
    if not path.exists():
        raise CliError(f"{path}: no such file")
    return [(int(path.stem) if path.stem.isdigit() else 0, path)]


def _read_depth(frame: int, path: Path) -> np.ndarray:
    try:
        return io.read_pgm(path)
    except (OSError, io.FormatError) as e:
        raise CliError(f"frame {frame}: {e}") from None


def _add_config_args(p: argparse.ArgumentParser, scorers: bool = True):
    g = p.add_argument_group("configuration (flags override --config)")
    g.add_argument("--config", help="pipeline config JSON")
    g.add_argument("--intrinsics", help="camera intrinsics JSON {fx, fy, cx, cy}")
    g.add_argument("--stages", help="comma list from gpd,sis,cpf (sis is mandatory)")
    g.add_argument("--stride", type=int)
    g.add_argument("--human-width", type=float, dest="human_width_m")
    g.add_argument("--vstd-threshold", type=float)
    g.add_argument("--plane-dist", type=float, dest="plane_dist_threshold")
    g.add_argument("--valid-fraction", type=float, dest="valid_fraction_min")
    g.add_argument("--min-side", type=int)
    g.add_argument("--seed", type=int)
    if scorers:
        g.add_argument("--encoding", choices=[s.value for s in EncodingScheme])
        g.add_argument("--nms-iou", type=float)
        g.add_argument("--score-min", type=float)
        g.add_argument("--d-near", type=float)
        g.add_argument("--d-far", type=float)
        g.add_argument("--color-scorer", help="oracle | file:<path> | constant:<p>")
        g.add_argument("--depth-scorer", help="oracle | file:<path> | constant:<p>")
        g.add_argument("--oracle-noise", action="store_true", default=None,
                       help="apply the declared colour/depth noise profiles to oracle scorers")


def build_config(args, default_intrinsics: CameraIntrinsics | None = None) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.intrinsics:
        cfg.intrinsics = CameraIntrinsics.load(args.intrinsics)
    roi_over = {k: getattr(args, k) for k in ("stride", "human_width_m", "vstd_threshold",
                                              "plane_dist_threshold", "valid_fraction_min",
                                              "min_side") if getattr(args, k, None) is not None}
    if roi_over:
        cfg.roi = replace(cfg.roi, **roi_over)
    if getattr(args, "d_near", None) is not None or getattr(args, "d_far", None) is not None:
        cfg.fusion = type(cfg.fusion)(args.d_near if args.d_near is not None else cfg.fusion.d_near,
                                      args.d_far if args.d_far is not None else cfg.fusion.d_far)
    if args.stages:
        cfg.stages = tuple(s.strip() for s in args.stages.split(",") if s.strip())
    for k in ("encoding", "nms_iou", "score_min", "color_scorer", "depth_scorer",
              "oracle_noise", "seed"):
        v = getattr(args, k, None)
        if v is not None:
            setattr(cfg, k, v)
    cfg.__post_init__()
    if cfg.intrinsics is None:
        cfg.intrinsics = default_intrinsics
    if cfg.intrinsics is None:
        raise CliError("camera intrinsics required: pass --intrinsics or set them in --config")
    return cfg


def cmd_synth(args) -> int:
    out = Path(args.out)
    (out / "depth").mkdir(parents=True, exist_ok=True)
    if args.scene:
        spec = synth.SceneSpec.load(args.scene)
        scenes = synth.render_sequence(spec, args.frames)
        spec.save(out / "scene.json")
        camera = spec.camera
    else:
        scenes = []
        for i in range(args.frames):
            spec = synth.random_scene(args.seed + i, noise_mm=args.noise_mm,
                                      invalid_fraction=args.invalid_fraction)
            scenes.append(synth.render(spec, frame=i))
        camera = spec.camera
    camera.save(out / "intrinsics.json")
    anns = []
    for i, sc in enumerate(scenes):
        io.write_pgm(out / "depth" / io.frame_name(i), sc.depth)
        anns.extend(a.to_dict() for a in sc.annotations)
    io.write_jsonl(out / "annotations.jsonl", anns)
    return 0


def cmd_encode(args) -> int:
    depth = _read_depth(0, Path(args.input))
    if not args.no_fill:
        depth = fill_holes(depth, args.fill_radius, args.fill_passes)
    rng = None
    if args.depth_range:
        lo, hi = (float(x) for x in args.depth_range.split(","))
        rng = (lo, hi)
    io.write_ppm(args.output, encode(depth, args.encoding, rng))
    return 0


def cmd_rois(args) -> int:
    cfg = build_config(args)
    frames = _frames(args.input)
    multi = Path(args.input).is_dir()
    records = []
    for fid, path in frames:
        depth = _read_depth(fid, path)
        res = select_rois(depth, cfg.intrinsics, cfg.roi, cfg.seed, cfg.stages)
        for p in res.proposals:
            records.append({"frame": fid, **p.to_dict()} if multi else p.to_dict())
    _write_records(args.output, records)
    return 0


def _write_records(path, records):
    if path in (None, "-"):
        for r in records:
            sys.stdout.write(json.dumps(r) + "\n")
    else:
        io.write_jsonl(path, records)


def _scorers(cfg: PipelineConfig, annotations_path):
    anns = load_annotations(annotations_path) if annotations_path else None
    return (make_scorer(cfg.color_scorer, "color", anns, cfg.oracle_noise, cfg.seed),
            make_scorer(cfg.depth_scorer, "depth", anns, cfg.oracle_noise, cfg.seed))


def cmd_detect(args) -> int:
    cfg = build_config(args)
    color, depth_s = _scorers(cfg, args.annotations)
    frames = _frames(args.frames)
    enc_dir = Path(args.encoded_dir) if args.encoded_dir else None
    if enc_dir:
        enc_dir.mkdir(parents=True, exist_ok=True)

    def run(item):
        fid, path = item
        depth = _read_depth(fid, path)
        try:
            res = detect_frame(depth, fid, cfg, color, depth_s, with_encoding=enc_dir is not None)
        except MissingScoreError as e:
            raise CliError(str(e)) from None
        except ValueError as e:
            raise CliError(f"frame {fid}: {e}") from None
        if enc_dir is not None:
            io.write_ppm(enc_dir / io.frame_name(fid, ".ppm"), res.encoded)
        return res

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(run, frames))
    records = [d.to_dict(frame=r.frame) for r in results for d in r.detections]
    _write_records(args.output, records)
    log.info("%d frames, %d detections", len(results), len(records))
    return 0


def cmd_eval(args) -> int:
    dets = load_detections(args.detections, args.score_key)
    anns = load_annotations(args.annotations)
    curve = pr_curve(dets, anns, iou_min=args.iou)
    if not curve:
        raise CliError(f"{args.detections}: no detections to evaluate")
    ap = average_precision(curve)
    if args.pr_out:
        write_pr_csv(args.pr_out, curve)
    if args.curve_out:
        write_curve_dat(args.curve_out, curve, label=Path(args.detections).name)
    sys.stdout.write(f"average_precision,{ap!r}\n")
    return 0


BENCH_COLUMNS = ["stride", "frames", "anchors_per_frame", "proposals_per_frame", "gpd_ms",
                 "sis_ms", "integral_ms", "cpf_ms", "sis_cpf_ms", "roi_ms", "fusion_ms", "nms_ms"]
_ROI_PARTS = ("gpd", "sis", "integral", "cpf")


def _timed_run(depth, fid, cfg, color, depth_s):
    timer = StageTimer()
    gc_was_on = gc.isenabled()
    gc.disable()  # as timeit does: keep collector pauses out of stage times
    try:
        res = detect_frame(depth, fid, cfg, color, depth_s, timer, with_encoding=False)
    finally:
        if gc_was_on:
            gc.enable()
    return res, timer.times


def bench(frames: list[np.ndarray], cfg: PipelineConfig, strides=None, repeats: int = 1,
          color=None, depth_s=None) -> list[dict]:
    """Median per-frame stage times (ms) over ``frames``, one row per stride.

    ``sis_cpf_ms`` covers window generation and filtering given a built
    integral image; ``roi_ms`` is the whole ROI selection including GPD and
    the integral image. Each stage of each frame keeps its fastest of
    ``repeats`` runs. Strides are interleaved run by run so that a change in
    machine load affects every stride alike.
    """
    color = color or ConstantScorer(0.5)
    depth_s = depth_s or ConstantScorer(0.5)
    strides = list(strides or [cfg.roi.stride])
    cfgs = [replace(cfg, roi=replace(cfg.roi, stride=s)) for s in strides]
    per = [{k: [] for k in (*_ROI_PARTS, "sis_cpf", "roi", "fusion", "nms")} for _ in strides]
    anchors = [[] for _ in strides]
    n_props = [[] for _ in strides]
    for fid, depth in enumerate(frames):
        best: list[dict[str, float]] = [{} for _ in strides]
        results = [None] * len(strides)
        for _ in range(max(1, repeats)):
            for i, c in enumerate(cfgs):
                results[i], times = _timed_run(depth, fid, c, color, depth_s)
                for k, v in times.items():
                    best[i][k] = min(v, best[i].get(k, v))
        for i, c in enumerate(cfgs):
            ms = {k: best[i].get(k, 0.0) * 1000 for k in (*_ROI_PARTS, "fusion", "nms")}
            ms["sis_cpf"] = ms["sis"] + ms["cpf"]
            ms["roi"] = sum(ms[k] for k in _ROI_PARTS)
            for k, v in ms.items():
                per[i][k].append(v)
            anchors[i].append(len(anchor_arrays(depth, results[i].plane, c.intrinsics, c.roi)[0]))
            n_props[i].append(len(results[i].proposals))
    return [{
        "stride": s, "frames": len(frames),
        "anchors_per_frame": statistics.fmean(anchors[i]),
        "proposals_per_frame": statistics.fmean(n_props[i]),
        **{f"{k}_ms": statistics.median(v) for k, v in per[i].items()},
    } for i, s in enumerate(strides)]


def cmd_bench(args) -> int:
    cfg = build_config(args, None if args.frames else synth.KINECT)
    if args.frames:
        frames = [_read_depth(fid, p) for fid, p in _frames(args.frames)]
    else:
        frames = [synth.render(synth.random_scene(cfg.seed + i, wall_z_m=args.wall)).depth
                  for i in range(args.synthetic)]
    if len(frames) < 10:
        log.warning("only %d frame(s); medians are noisy below 10", len(frames))
    strides = [int(s) for s in args.strides.split(",")] if args.strides else None
    rows = bench(frames, cfg, strides, args.repeats)
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.DictWriter(out, BENCH_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.4f}" if isinstance(v, float) else v) for k, v in r.items()})
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rgbdhuman", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic depth sequence with annotations")
    p.add_argument("--scene", help="SceneSpec JSON; omit for random scenes")
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-mm", type=float, default=10.0)
    p.add_argument("--invalid-fraction", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("encode", help="encode a 16-bit depth PGM into a 3-channel PPM")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--encoding", choices=[s.value for s in EncodingScheme], default="cecd")
    p.add_argument("--no-fill", action="store_true", help="skip mean-filter hole filling")
    p.add_argument("--fill-radius", type=int, default=2)
    p.add_argument("--fill-passes", type=int, default=3)
    p.add_argument("--depth-range", help="fixed normalisation range 'lo,hi' in millimeters")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("rois", help="select candidate windows (proposals JSON lines)")
    p.add_argument("input", help="depth PGM or directory of numbered frames")
    p.add_argument("-o", "--output", default="-")
    _add_config_args(p, scorers=False)
    p.set_defaults(func=cmd_rois)

    p = sub.add_parser("detect", help="run the full pipeline over a frame directory")
    p.add_argument("--frames", required=True, help="directory of numbered depth PGMs")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--annotations", help="ground truth JSON lines (needed by oracle scorers)")
    p.add_argument("--encoded-dir", help="also write the encoded depth frames here")
    p.add_argument("--jobs", type=int, default=1)
    _add_config_args(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="precision/recall curve and average precision")
    p.add_argument("--detections", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--score-key", default="p_fused", choices=["p_fused", "p_color", "p_depth"])
    p.add_argument("--pr-out", help="CSV of PR points")
    p.add_argument("--curve-out", help="gnuplot-style recall/precision file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="per-stage timing report (CSV)")
    p.add_argument("--frames", help="directory of numbered depth PGMs")
    p.add_argument("--synthetic", type=int, default=10,
                   help="random frames when --frames is absent")
    p.add_argument("--wall", type=float, default=6.0,
                   help="back-wall distance (m) of the synthetic rooms")
    p.add_argument("--strides", help="comma list of strides to sweep, e.g. 8,16")
    p.add_argument("--repeats", type=int, default=3, help="keep the fastest of N runs per frame")
    p.add_argument("-o", "--output")
    _add_config_args(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="rgbdhuman: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (CliError, io.FormatError, MissingScoreError, ValueError, OSError) as e:
        msg = str(e) if not isinstance(e, OSError) else f"{e.filename or ''}: {e.strerror or e}"
        sys.stderr.write(f"rgbdhuman: error: {msg}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
