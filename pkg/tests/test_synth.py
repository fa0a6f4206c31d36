from dataclasses import replace

import numpy as np
import pytest

from rgbdhuman import synth
from rgbdhuman.fusion import iou
from rgbdhuman.geometry import back_project_pixels
from rgbdhuman.pipeline import PipelineConfig, detect_frame, make_scorer
from rgbdhuman.roi import Proposal, RoiConfig, detect_ground_plane, sample_ground_candidates


def _lower_half_points(depth, K):
    v, u = np.nonzero(depth)
    keep = v >= depth.shape[0] // 2
    return back_project_pixels(u[keep], v[keep], depth[v[keep], u[keep]], K)


def test_empty_scene_lies_on_the_floor(kinect):
    spec = synth.SceneSpec()
    exact = synth.render(spec, quantize=False)
    pts = _lower_half_points(exact.depth, kinect)
    assert len(pts) > 50_000
    assert np.abs(pts[:, 1] - spec.floor_height_m).max() < 1e-9
    assert exact.annotations == []
    # 1 mm quantisation moves a point by at most 0.5 mm along its ray
    quant = synth.render(spec)
    assert quant.depth.dtype == np.uint16
    pts = _lower_half_points(quant.depth, kinect)
    bound = 0.0005 * (spec.height - 1 - kinect.cy) / kinect.fy
    assert np.abs(pts[:, 1] - spec.floor_height_m).max() <= bound


def test_annotation_side_at_three_meters():
    scene = synth.render(synth.SceneSpec(persons=(synth.Person(0.0, 3.0, 0.6),)))
    (a,) = scene.annotations
    assert abs(a.side - 105) <= 1 and a.care
    assert abs(a.x + a.side / 2 - 320) <= 1


def test_dropout_halves_the_valid_pixels():
    base = synth.SceneSpec(persons=(synth.Person(0.3, 2.0),), seed=3)
    full = int((synth.render(base).depth > 0).sum())
    half = int((synth.render(replace(base, invalid_fraction=0.5)).depth > 0).sum())
    assert abs(half - full / 2) <= 0.01 * full / 2


def test_render_is_deterministic():
    spec = synth.random_scene(9)
    a, b = synth.render(spec), synth.render(spec)
    assert a.depth.tobytes() == b.depth.tobytes() and a.annotations == b.annotations
    other = synth.render(replace(spec, seed=spec.seed + 1))
    assert other.depth.tobytes() != a.depth.tobytes()


def test_scene_json_round_trip(tmp_path):
    spec = synth.random_scene(4, wall_z_m=6.0)
    spec.save(tmp_path / "s.json")
    assert synth.SceneSpec.load(tmp_path / "s.json") == spec


def test_scene_validation():
    with pytest.raises(ValueError):
        synth.SceneSpec(floor_height_m=-1.0)
    with pytest.raises(ValueError):
        synth.Person(0.0, -2.0)
    with pytest.raises(ValueError):
        synth.SceneSpec(invalid_fraction=1.5)


def test_occluded_person_is_dont_care():
    front = synth.Person(0.0, 2.0)
    behind = synth.Person(0.35, 4.0)  # mostly hidden, a sliver shows
    anns = synth.render(synth.SceneSpec(persons=(front, behind))).annotations
    assert [a.care for a in anns] == [True, False]
    hidden = synth.Person(0.0, 4.0, width_m=0.3, height_m=1.0)
    assert len(synth.render(synth.SceneSpec(persons=(front, hidden))).annotations) == 1


def test_random_scenes_are_well_formed():
    for seed in range(20):
        spec = synth.random_scene(seed)
        assert 1 <= len(spec.persons) <= 3
        scene = synth.render(spec)
        assert all(a.care for a in scene.annotations)
        assert len(scene.annotations) == len(spec.persons)


def test_oracle_scorer_saturates():
    ann = synth.Annotation(0, 100, 100, 80)
    sc = synth.oracle_scorer([ann])
    assert sc.score(0, Proposal(100, 100, 80, 3.0)) >= 0.95
    assert sc.score(0, Proposal(300, 300, 80, 3.0)) <= 0.05
    assert sc.score(1, Proposal(100, 100, 80, 3.0)) <= 0.05  # no annotations in frame 1


def test_depth_profile_degrades_with_range():
    anns = [synth.Annotation(0, 5 * i, 0, 60) for i in range(400)]
    sc = synth.oracle_scorer(anns, synth.DEPTH_NOISE, seed=1, stream="depth")
    near = np.mean([sc.score(0, Proposal(a.x, a.y, a.side, 1.0)) for a in anns])
    far = np.mean([sc.score(0, Proposal(a.x, a.y, a.side, 7.0)) for a in anns])
    assert far < near


def test_oracle_scores_are_order_free():
    ann = [synth.Annotation(0, 10, 10, 60)]
    a = synth.oracle_scorer(ann, synth.COLOR_NOISE, seed=5)
    b = synth.oracle_scorer(ann, synth.COLOR_NOISE, seed=5)
    ps = [Proposal(x, 10, 60, 2.0) for x in range(0, 40, 4)]
    assert [a.score(0, p) for p in ps] == [b.score(0, p) for p in reversed(ps)][::-1]
    c = synth.oracle_scorer(ann, synth.COLOR_NOISE, seed=5, stream="depth")
    assert [a.score(0, p) for p in ps] != [c.score(0, p) for p in ps]


def test_noise_free_ground_plane_is_exact(kinect):
    spec = synth.SceneSpec(persons=(synth.Person(-0.5, 2.5), synth.Person(1.0, 4.5)))
    depth = synth.render(spec, quantize=False).depth
    plane = detect_ground_plane(depth, kinect)
    assert plane.inlier_rms < 1e-6
    assert plane.angle_to(spec.ground_plane) < 1e-6
    floor_pts = sample_ground_candidates(synth.render(synth.SceneSpec(), quantize=False).depth,
                                         kinect, RoiConfig().stride)
    assert np.abs(spec.ground_plane.signed_distance(floor_pts)).max() < 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_zero_noise_pipeline_finds_everyone(seed, kinect):
    spec = synth.random_scene(seed, noise_mm=0.0, invalid_fraction=0.0)
    scene = synth.render(spec)
    cfg = PipelineConfig(intrinsics=kinect)
    res = detect_frame(scene.depth, 0, cfg, make_scorer("oracle", "color", scene.annotations),
                       make_scorer("oracle", "depth", scene.annotations), with_encoding=False)
    for a in scene.annotations:
        assert max(iou(a.box, d.box) for d in res.detections) >= 0.5


def test_render_sequence_varies_noise_only():
    frames = synth.render_sequence(synth.random_scene(1), 3)
    assert [f.annotations[0].frame for f in frames] == [0, 1, 2]
    assert frames[0].depth.tobytes() != frames[1].depth.tobytes()
    assert [a.box for a in frames[0].annotations] == [a.box for a in frames[2].annotations]
