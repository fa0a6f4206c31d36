import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rgbdhuman.depthimage import (Box, build_validity_integral, equalize, fill_holes, normalize,
                                  round_half_away, valid_fraction)


def test_rounding_is_half_away_from_zero():
    assert round_half_away([0.5, 1.5, 2.5, -0.5, -2.5, 2.4999]).tolist() == \
        [1, 2, 3, -1, -3, 2]


# hole filling

def test_fill_identical_neighbours():
    img = np.full((3, 3), 2000, dtype=np.uint16)
    img[1, 1] = 0
    assert fill_holes(img, 1, 1)[1, 1] == 2000


def test_fill_mean_of_valid_neighbours():
    img = np.zeros((3, 3), dtype=np.uint16)
    img[0, 0], img[0, 2], img[2, 1] = 1000, 2000, 3000
    assert fill_holes(img, kernel_radius=1, max_passes=1)[1, 1] == 2000


def test_fill_rounds_half_up():
    img = np.zeros((1, 3), dtype=np.uint16)
    img[0, 0], img[0, 2] = 1000, 1001
    assert fill_holes(img, 1, 1)[0, 1] == 1001


def test_fill_all_invalid_is_unchanged():
    img = np.zeros((5, 4), dtype=np.uint16)
    assert (fill_holes(img, 1, 2) == 0).all()


def _brute_fill_pass(img, r):
    out = img.copy()
    h, w = img.shape
    for y in range(h):
        for x in range(w):
            if img[y, x]:
                continue
            nb = img[max(0, y - r):y + r + 1, max(0, x - r):x + r + 1]
            vals = nb[nb > 0].astype(int)
            if len(vals):
                out[y, x] = int(np.floor(vals.sum() / len(vals) + 0.5))
    return out


depth_grids = arrays(np.uint16, st.tuples(st.integers(1, 9), st.integers(1, 9)),
                     elements=st.sampled_from([0, 0, 0, 500, 1234, 4000, 65535]))


@settings(max_examples=60)
@given(depth_grids, st.integers(1, 3))
def test_fill_single_pass_matches_loop(img, r):
    assert (fill_holes(img, r, 1) == _brute_fill_pass(img, r)).all()


@settings(max_examples=60)
@given(depth_grids, st.integers(1, 2), st.integers(1, 4))
def test_fill_properties(img, r, passes):
    out = fill_holes(img, r, passes)
    valid = img > 0
    assert (out[valid] == img[valid]).all()
    assert (out > 0).sum() >= valid.sum()
    converged = fill_holes(img, r, 100)
    assert (fill_holes(converged, r, 3) == converged).all()


def test_fill_float_uses_exact_mean():
    img = np.zeros((1, 3))
    img[0, 0], img[0, 2] = 1000.0, 1001.0
    assert fill_holes(img, 1, 1)[0, 1] == 1000.5


def test_fill_rejects_zero_radius():
    with pytest.raises(ValueError):
        fill_holes(np.ones((2, 2), dtype=np.uint16), 0)


# normalisation

def test_normalize_examples():
    img = np.array([[1000, 3000, 5000, 0]], dtype=np.uint16)
    assert normalize(img).tolist() == [[0, 128, 255, 0]]


def test_normalize_degenerate():
    assert (normalize(np.full((3, 3), 1500, dtype=np.uint16)) == 0).all()
    assert (normalize(np.zeros((3, 3), dtype=np.uint16)) == 0).all()


def test_normalize_fixed_range_clips():
    img = np.array([[100, 500, 5250, 20000, 0]], dtype=np.uint16)
    assert normalize(img, (500, 10000)).tolist() == [[0, 0, 128, 255, 0]]


@settings(max_examples=80)
@given(depth_grids)
def test_normalize_range_and_order(img):
    out = normalize(img).astype(int)
    v = img > 0
    d, g = img[v].astype(int), out[v]
    order = np.argsort(d, kind="stable")
    assert (np.diff(g[order]) >= 0).all()
    assert out.min() >= 0 and out.max() <= 255
    assert (out[~v] == 0).all()
    if v.any():
        lo, hi = d.min(), d.max()
        if hi > lo:
            expect = np.floor(255 * (d - lo) / (hi - lo) + 0.5)
            assert (g == expect).all()


# histogram equalisation

def _brute_equalize(gray, mask):
    vals = gray[mask].astype(int)
    out = np.zeros_like(gray)
    n = len(vals)
    if n == 0:
        return out
    cdf = {lvl: int((vals <= lvl).sum()) for lvl in range(256)}
    cdf_min = min(c for c in cdf.values() if c > 0)
    if cdf_min == n:
        out[mask] = gray[mask]
        return out
    for idx in zip(*np.nonzero(mask)):
        c = cdf[int(gray[idx])]
        out[idx] = int(np.floor(255 * (c - cdf_min) / (n - cdf_min) + 0.5))
    return out


def test_equalize_two_levels():
    g = np.array([[10, 20], [10, 20]], dtype=np.uint8)
    assert equalize(g).tolist() == [[0, 255], [0, 255]]


def test_equalize_uniform_histogram_is_identity():
    g = np.repeat(np.arange(256, dtype=np.uint8), 3).reshape(24, 32)
    assert (equalize(g) == _brute_equalize(g, np.ones_like(g, bool))).all()
    assert (equalize(g) == g).all()


def test_equalize_constant_passes_through():
    g = np.full((4, 4), 77, dtype=np.uint8)
    assert (equalize(g) == g).all()


def test_equalize_ignores_invalid_pixels():
    g = np.array([[10, 20, 200]], dtype=np.uint8)
    mask = np.array([[True, True, False]])
    assert equalize(g, mask).tolist() == [[0, 255, 0]]


@settings(max_examples=80)
@given(arrays(np.uint8, st.tuples(st.integers(1, 8), st.integers(1, 8))),
       st.integers(0, 2**32 - 1))
def test_equalize_matches_bruteforce(g, seed):
    mask = np.random.default_rng(seed).random(g.shape) < 0.7
    out = equalize(g, mask)
    assert (out == _brute_equalize(g, mask)).all()
    vals, eq = g[mask], out[mask]
    order = np.argsort(vals, kind="stable")
    assert (np.diff(eq[order].astype(int)) >= 0).all()
    if len(np.unique(vals)) >= 2:
        assert eq.max() == 255


# integral image

def test_integral_examples():
    ii = build_validity_integral(np.ones((2, 2), dtype=np.uint16))
    assert ii.count(Box(0, 0, 2, 2)) == 4
    pattern = np.array([[1, 0, 1], [0, 1, 0], [1, 0, 1]], dtype=np.uint16)
    ii = build_validity_integral(pattern)
    assert ii.count(Box(0, 0, 3, 3)) == 5
    assert ii.count(Box(0, 0, 2, 2)) == 2
    assert valid_fraction(ii, Box.square(0, 0, 3)) == pytest.approx(5 / 9)
    ii = build_validity_integral(np.zeros((4, 4), dtype=np.uint16))
    assert ii.count(Box(1, 1, 2, 2)) == 0
    assert valid_fraction(ii, Box.square(0, 0, 4)) == 0.0
    assert valid_fraction(build_validity_integral(np.ones((2, 2), np.uint16)),
                          Box.square(0, 0, 2)) == 1.0


def test_integral_table_shape_and_monotone(rng):
    m = (rng.random((17, 23)) < 0.4).astype(np.uint16)
    t = build_validity_integral(m).table
    assert t.shape == (18, 24)
    assert (t[0] == 0).all() and (t[:, 0] == 0).all()
    assert (np.diff(t, axis=0) >= 0).all() and (np.diff(t, axis=1) >= 0).all()


def test_valid_fraction_clips_and_rejects_empty():
    ii = build_validity_integral(np.ones((4, 4), dtype=np.uint16))
    assert valid_fraction(ii, Box.square(-2, -2, 4)) == 1.0
    with pytest.raises(ValueError):
        valid_fraction(ii, Box.square(10, 10, 3))


def test_depth_input_validation():
    with pytest.raises(ValueError):
        normalize(np.array([[-1, 2]]))
    with pytest.raises(ValueError):
        normalize(np.zeros((2, 2, 2), dtype=np.uint16))
    with pytest.raises(ValueError):
        normalize(np.array([[np.nan, 1.0]]))
