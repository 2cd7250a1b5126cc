"""Geometry tests: areas, IoU vs raster oracle, NMS, homography, warping."""
from __future__ import annotations

import numpy as np
import pytest

from pspot import autodiff as ad
from pspot import geom
from pspot.geom import Homography, Point2, Quadrangle

from helpers import check_gradients, random_convex_quad, raster_iou

UNIT = Quadrangle([[0, 0], [1, 0], [1, 1], [0, 1]])


def test_point_rejects_nonfinite():
    with pytest.raises(ValueError):
        Point2(float("nan"), 0.0)


def test_polygon_area_examples():
    assert geom.polygon_area(UNIT) == 1.0
    assert geom.polygon_area(Quadrangle([[3, 3]] * 4)) == 0.0
    assert geom.polygon_area(Quadrangle([[0, 0], [2, 0], [2, 1], [0, 1]])) == 2.0


def test_quadrangle_winding_normalized():
    ccw = Quadrangle([[0, 0], [0, 1], [1, 1], [1, 0]])
    assert geom.polygon_area(ccw) == 1.0
    assert tuple(ccw.pts[0]) == (0.0, 0.0)


def test_flat_roundtrip():
    q = Quadrangle.from_flat([0, 0, 4, 1, 5, 3, 1, 2])
    assert q.to_flat() == [0, 0, 4, 1, 5, 3, 1, 2]


def test_iou_examples():
    assert geom.iou(UNIT, UNIT) == 1.0
    far = Quadrangle([[10, 10], [11, 10], [11, 11], [10, 11]])
    assert geom.iou(UNIT, far) == 0.0
    a = Quadrangle([[0, 0], [2, 0], [2, 2], [0, 2]])
    b = Quadrangle([[1, 0], [3, 0], [3, 2], [1, 2]])
    assert abs(geom.iou(a, b) - 1.0 / 3.0) < 1e-12


def test_iou_degenerate_is_zero():
    line = Quadrangle([[0, 0], [2, 0], [2, 0], [0, 0]])
    assert geom.iou(line, UNIT) == 0.0
    assert geom.iou(line, line) == 0.0


def test_iou_symmetric_fuzz():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        a = random_convex_quad(rng)
        b = random_convex_quad(rng, center=a.centroid + rng.uniform(-80, 80, 2))
        assert geom.iou(a, b) == pytest.approx(geom.iou(b, a), abs=1e-12)


def test_iou_self_is_one_fuzz():
    rng = np.random.default_rng(12)
    for _ in range(200):
        q = random_convex_quad(rng)
        assert geom.iou(q, q) == pytest.approx(1.0, abs=1e-9)


def test_iou_matches_raster_oracle():
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(1000):
        a = random_convex_quad(rng)
        b = random_convex_quad(rng, center=a.centroid + rng.uniform(-100, 100, 2))
        exact = geom.iou(a, b)
        approx = raster_iou(a, b)
        worst = max(worst, abs(exact - approx))
    assert worst < 1e-2, f"worst raster deviation {worst}"


def test_nms_examples():
    single = [(UNIT, 0.7)]
    assert geom.nms(single, 0.5) == single
    dup = [(UNIT, 0.9), (UNIT, 0.8)]
    assert geom.nms(dup, 0.5) == [(UNIT, 0.9)]
    far = Quadrangle([[5, 5], [6, 5], [6, 6], [5, 6]])
    both = [(UNIT, 0.9), (far, 0.8)]
    assert geom.nms(both, 0.5) == both


def test_nms_tie_keeps_earlier_index():
    shifted = Quadrangle([[0.1, 0], [1.1, 0], [1.1, 1], [0.1, 1]])
    out = geom.nms([(UNIT, 0.5), (shifted, 0.5)], 0.3)
    assert out == [(UNIT, 0.5)]


def test_nms_subset_and_pairwise_valid():
    rng = np.random.default_rng(14)
    props = []
    for _ in range(40):
        q = random_convex_quad(rng, radius=(20, 60))
        props.append((q, float(rng.uniform(0, 1))))
    kept = geom.nms(props, 0.4)
    assert all(p in props for p in kept)
    for i in range(len(kept)):
        for j in range(i + 1, len(kept)):
            assert geom.iou(kept[i][0], kept[j][0]) < 0.4


def test_homography_identity_and_translation():
    sq = [[0, 0], [1, 0], [1, 1], [0, 1]]
    ident = geom.solve_homography(sq, sq)
    assert np.allclose(ident.h, np.eye(3), atol=1e-12)
    moved = [[5, 7], [6, 7], [6, 8], [5, 8]]
    trans = geom.solve_homography(sq, moved)
    expected = np.array([[1, 0, 5], [0, 1, 7], [0, 0, 1]], dtype=float)
    assert np.allclose(trans.h, expected, atol=1e-9)


def test_homography_random_residuals():
    rng = np.random.default_rng(15)
    for _ in range(200):
        src = random_convex_quad(rng).pts
        dst = random_convex_quad(rng).pts
        h = geom.solve_homography(src, dst)
        residual = np.abs(h.apply(src) - dst).max()
        assert residual < 1e-9


def test_homography_singular_configuration():
    collinear = [[0, 0], [1, 0], [2, 0], [3, 0]]
    with pytest.raises(geom.SingularConfiguration):
        geom.solve_homography(collinear, [[0, 0], [1, 0], [1, 1], [0, 1]])


def test_homography_inverse():
    rng = np.random.default_rng(16)
    src = random_convex_quad(rng).pts
    dst = random_convex_quad(rng).pts
    h = geom.solve_homography(src, dst)
    assert np.allclose(h.inverse().apply(dst), src, atol=1e-8)


def test_warp_identity_reproduces_input():
    rng = np.random.default_rng(17)
    feat = rng.normal(size=(5, 6, 3))
    corners = [[0, 0], [6, 0], [6, 5], [0, 5]]
    ident = geom.solve_homography(corners, corners)
    out = geom.warp_sample(feat, ident, 5, 6)
    assert np.allclose(out, feat, atol=1e-12)


def test_warp_constant_map_interior():
    feat = np.full((8, 8), 2.5)
    # warp_sample maps output cells through hmat into the source map
    h = geom.solve_homography([[0, 0], [4, 0], [4, 4], [0, 4]],
                              [[2, 2], [6, 2], [6, 6], [2, 6]])
    out = geom.warp_sample(feat, h, 4, 4)
    assert np.allclose(out, 2.5)


def test_warp_quarter_turn_permutes_cells():
    feat = np.array([[1.0, 2.0], [3.0, 4.0]])
    # output (x, y) -> source (y, 2 - x): a quarter turn of the 2x2 map
    hmat = Homography(np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 2.0], [0.0, 0.0, 1.0]]))
    out = geom.warp_sample(feat, hmat, 2, 2)
    # cell centers (0.5,0.5),(1.5,0.5),(0.5,1.5),(1.5,1.5) map to
    # (0.5,1.5),(0.5,0.5),(1.5,1.5),(1.5,0.5): rows become columns
    expected = np.array([[3.0, 1.0], [4.0, 2.0]])
    assert np.allclose(out, expected)


def test_warp_differentiable_wrt_feature():
    rng = np.random.default_rng(18)
    feat = ad.Value(rng.normal(size=(5, 5, 2)), requires_grad=True)
    h = geom.solve_homography([[0, 0], [3, 0], [3, 3], [0, 3]],
                              [[0.7, 0.4], [3.1, 0.6], [3.3, 3.2], [0.5, 2.9]])
    check_gradients(lambda: ad.sum_(geom.warp_sample(feat, h.inverse(), 3, 3) ** 2.0),
                    [feat])


def test_warp_corner_roundtrip():
    rng = np.random.default_rng(19)
    for _ in range(100):
        src = random_convex_quad(rng).pts
        dst = random_convex_quad(rng).pts
        h = geom.solve_homography(src, dst)
        assert np.abs(h.apply(src) - dst).max() < 1e-9


def test_normalize_orientation_examples():
    tall = Quadrangle([[0, 0], [2, 0], [2, 4], [0, 4]])
    rotated_q, rotated = geom.normalize_orientation(tall)
    assert rotated
    assert tuple(rotated_q.pts[0]) == (2.0, 0.0)
    square, flag = geom.normalize_orientation(UNIT)
    assert not flag and square is UNIT
    wide = Quadrangle([[0, 0], [8, 0], [8, 2], [0, 2]])
    same, flag = geom.normalize_orientation(wide)
    assert not flag and same is wide


def test_normalize_orientation_idempotent():
    rng = np.random.default_rng(20)
    for _ in range(200):
        q = random_convex_quad(rng)
        once, _ = geom.normalize_orientation(q)
        twice, again = geom.normalize_orientation(once)
        assert not again
        assert np.array_equal(once.pts, twice.pts)


def test_enclosing_quadrangle_covers_points():
    rng = np.random.default_rng(21)
    pts = rng.uniform(10, 90, size=(7, 2))
    q = geom.enclosing_quadrangle(pts)
    assert q.contains_points(pts[:, 0], pts[:, 1]).all()
    hull_area = abs(geom.polygon_area(Quadrangle(geom.convex_hull(pts)[:4])))
    assert q.area >= hull_area * 0.5
