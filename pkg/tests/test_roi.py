from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rgbdhuman import synth
from rgbdhuman.depthimage import build_validity_integral
from rgbdhuman.fusion import iou
from rgbdhuman.geometry import CameraIntrinsics
from rgbdhuman.roi import (Proposal, RoiConfig, anchor_arrays, detect_ground_plane,
                           filter_proposals, generate_proposals, grid_stats,
                           sample_ground_candidates, select_rois, window_width)

K525 = CameraIntrinsics(525.0, 525.0, 319.5, 239.5)


@pytest.mark.parametrize("fx,z,side", [(525, 3.0, 105), (525, 1.5, 210), (500, 0.6, 500)])
def test_window_width_examples(fx, z, side):
    K = CameraIntrinsics(fx, fx, 10, 10)
    assert window_width(z, K, RoiConfig(min_side=1)) == side


def test_window_width_floor_and_errors():
    assert window_width(20.0, K525) == 50
    with pytest.raises(ValueError):
        window_width(0.0, K525)


@given(st.floats(0.3, 20))
def test_window_width_halves_with_double_depth(z):
    cfg = RoiConfig(min_side=1)
    near, far = window_width(z, K525, cfg), window_width(2 * z, K525, cfg)
    assert abs(far - near / 2) <= 1


def _single_pixel(u=320, v=240, mm=3000, shape=(480, 640)):
    img = np.zeros(shape, dtype=np.uint16)
    img[v, u] = mm
    return img


def test_empty_frame_gives_no_proposals():
    assert generate_proposals(np.zeros((48, 64), np.uint16), None, K525) == []


def test_single_valid_pixel():
    props = generate_proposals(_single_pixel(), None, K525)
    assert props == [Proposal(268, 188, 105, 3.0)]
    p = props[0]
    assert p.x + p.side / 2 == pytest.approx(320.5, abs=0.5)
    assert p.y + p.side / 2 == pytest.approx(240.5, abs=0.5)


def test_windows_shift_inside_the_image():
    img = _single_pixel(u=0, v=0, mm=1500, shape=(100, 120))
    (p,) = generate_proposals(img, None, CameraIntrinsics(525, 525, 60, 50), RoiConfig(stride=1))
    assert (p.x, p.y, p.side) == (0, 0, 100)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 9))
def test_sliding_window_degenerates_to_lattice_count(seed, stride):
    rng = np.random.default_rng(seed)
    img = rng.integers(400, 9000, (37, 53)).astype(np.uint16)
    img[rng.random(img.shape) < 0.5] = 0
    cfg = RoiConfig(stride=stride, min_side=3)
    K = CameraIntrinsics(30.0, 30.0, 26.0, 18.0)
    props = generate_proposals(img, None, K, cfg)
    lattice = [(u, v) for v in range(0, 37, stride) for u in range(0, 53, stride) if img[v, u]]
    assert len(props) == len(lattice)
    for p, (u, v) in zip(props, lattice):
        assert p.depth_m == img[v, u] / 1000
        assert p.side >= cfg.min_side
        assert 0 <= p.x and p.x + p.side <= 53 and 0 <= p.y and p.y + p.side <= 37


def test_filter_examples():
    img = np.zeros((3, 3), dtype=np.uint16)
    img[0, :2] = img[1, :2] = 1000  # 4 valid of 9
    ii = build_validity_integral(img)
    p = Proposal(0, 0, 3, 1.0)
    assert filter_proposals([p], ii, RoiConfig(valid_fraction_min=1 / 3)) == [p]
    assert filter_proposals([p], ii, RoiConfig(valid_fraction_min=0.5)) == []


def test_filter_full_and_empty_regions():
    img = np.full((20, 20), 1000, dtype=np.uint16)
    img[:, 10:] = 0
    props = [Proposal(0, 0, 10, 1.0), Proposal(10, 10, 10, 1.0), Proposal(5, 5, 10, 1.0)]
    kept = filter_proposals(props, build_validity_integral(img), RoiConfig())
    assert kept == [props[0], props[2]]
    ii = build_validity_integral(np.ones((20, 20), dtype=np.uint16))
    assert filter_proposals(props, ii, RoiConfig()) == props


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0))
def test_filter_subset_idempotent_and_exact(seed, frac):
    rng = np.random.default_rng(seed)
    img = (rng.random((30, 40)) < 0.5).astype(np.uint16)
    ii = build_validity_integral(img)
    props = [Proposal(int(x), int(y), int(s), 1.0) for x, y, s in
             zip(rng.integers(0, 35, 30), rng.integers(0, 25, 30), rng.integers(1, 6, 30))]
    cfg = RoiConfig(valid_fraction_min=frac)
    kept = filter_proposals(props, ii, cfg)
    assert filter_proposals(kept, ii, cfg) == kept
    want = [p for p in props
            if Fraction(int(img[p.y:p.y + p.side, p.x:p.x + p.side].sum()), p.side ** 2)
            >= Fraction(frac)]
    assert kept == want


def test_ground_plane_on_synthetic_scene(kinect):
    spec = synth.SceneSpec(persons=(synth.Person(-0.8, 2.5), synth.Person(0.9, 4.0)),
                           floor_height_m=1.4, depth_noise_sigma_mm=10, invalid_fraction=0.1,
                           seed=5)
    scene = synth.render(spec)
    plane = detect_ground_plane(scene.depth, kinect, seed=0)
    assert plane.angle_to(scene.plane) < 2.0
    assert abs(plane.aligned_offset(scene.plane) - scene.plane.offset) < 0.03


def test_vstd_drops_cells_with_people(kinect):
    spec = synth.SceneSpec(persons=(synth.Person(-0.8, 2.5), synth.Person(0.9, 4.0)))
    scene = synth.render(spec)
    cfg = RoiConfig()
    _, owner = synth._zbuffer(spec)
    pts = sample_ground_candidates(scene.depth, kinect, cfg.stride)
    stats = grid_stats(pts, cfg.grid_cells)
    # which lattice samples are people: same lattice walk as the sampler
    v0 = 240
    sub = owner[v0::cfg.stride, ::cfg.stride][scene.depth[v0::cfg.stride, ::cfg.stride] > 0]
    person_cells = np.unique(stats.cell_of_point[sub >= 0])
    assert len(person_cells) > 0
    assert (stats.vstd.ravel()[person_cells] > cfg.vstd_threshold).all()
    floor_only = np.setdiff1d(np.unique(stats.cell_of_point), person_cells)
    assert (stats.vstd.ravel()[floor_only] <= cfg.vstd_threshold).all()


def test_full_height_structures_exceed_vstd_threshold(kinect):
    # walls and people of height >= 1 m, at several distances
    for seed in range(8):
        spec = synth.random_scene(seed, noise_mm=10, invalid_fraction=0.1, wall_z_m=5.0 + seed / 4)
        scene = synth.render(spec)
        pts = sample_ground_candidates(scene.depth, kinect, 8)
        stats = grid_stats(pts)
        upright = pts[:, 1] < spec.floor_height_m - 1.0  # at least 1 m above the floor
        for cell in np.unique(stats.cell_of_point[upright]):
            assert stats.vstd.ravel()[cell] > 0.15


def test_no_lower_half_points_gives_no_plane(kinect):
    img = np.zeros((480, 640), dtype=np.uint16)
    img[:200] = 3000
    assert detect_ground_plane(img, kinect) is None


def test_noiseless_floor_uses_every_sample(kinect):
    spec = synth.SceneSpec()
    scene = synth.render(spec)
    pts = sample_ground_candidates(scene.depth, kinect, 8)
    plane = detect_ground_plane(scene.depth, kinect)
    assert plane.inlier_count == len(pts)


def test_every_person_is_covered(kinect):
    spec = synth.SceneSpec(persons=(synth.Person(-0.8, 2.5), synth.Person(0.9, 4.0)))
    scene = synth.render(spec)
    res = select_rois(scene.depth, kinect, RoiConfig(), seed=0)
    assert res.plane is not None and len(res.proposals) <= res.n_sis
    for a in scene.annotations:
        assert max(iou(a.box, p.box) for p in res.proposals) >= 0.5


def test_anchors_never_on_floor_pixels(kinect):
    spec = synth.SceneSpec(persons=(synth.Person(-0.8, 2.5), synth.Person(0.9, 4.0)))
    scene = synth.render(spec)
    _, owner = synth._zbuffer(spec)
    plane = detect_ground_plane(scene.depth, kinect)
    u, v, _ = anchor_arrays(scene.depth, plane, kinect, RoiConfig())
    assert len(u) > 0
    assert (owner[v, u] >= 0).all()


def test_stage_selection(kinect):
    scene = synth.render(synth.random_scene(2))
    sis = select_rois(scene.depth, kinect, stages=("sis",))
    both = select_rois(scene.depth, kinect, stages=("sis", "gpd"))
    full = select_rois(scene.depth, kinect)
    assert sis.plane is None and full.plane is not None
    assert len(full.proposals) <= len(both.proposals) < len(sis.proposals)
    with pytest.raises(ValueError):
        select_rois(scene.depth, kinect, stages=("sis", "hog"))


def test_config_validation():
    with pytest.raises(ValueError):
        RoiConfig(stride=0)
    with pytest.raises(ValueError):
        RoiConfig(valid_fraction_min=1.5)
