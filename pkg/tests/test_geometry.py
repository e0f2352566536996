"""Geometry primitives against brute-force and analytic oracles."""

import math
import random

import numpy as np
import pytest

from roadatlas.geometry import (
    BoundingBox,
    Contour,
    EstimationError,
    Homography,
    InvalidGeometryError,
    MappingError,
    Mask,
    Point2,
    Polygon,
    apply_homography,
    connected_components,
    contour_to_mask,
    estimate_homography,
    overlap_ratio,
    polygon_to_bbox,
    rasterize_polygon,
    trace_contours,
    warp_mask,
)


def random_simple_polygon(rng: random.Random, n_max: int = 12) -> Polygon:
    """Star-shaped polygon around a random center: always simple."""
    n = rng.randint(3, n_max)
    cx, cy = rng.uniform(-50, 50), rng.uniform(-50, 50)
    angles = sorted(rng.uniform(0, 2 * math.pi) for _ in range(n))
    # reject near-duplicate angles that could collapse the area
    if min(b - a for a, b in zip(angles, angles[1:])) < 1e-3:
        return random_simple_polygon(rng, n_max)
    pts = [
        (cx + r * math.cos(t), cy + r * math.sin(t))
        for t, r in ((t, rng.uniform(1.0, 30.0)) for t in angles)
    ]
    return Polygon(pts)


def bbox_oracle(p: Polygon) -> tuple[float, float, float, float]:
    """Brute-force scan of every vertex."""
    xs = [v.x for v in p.vertices]
    ys = [v.y for v in p.vertices]
    return min(xs), min(ys), max(xs), max(ys)


def forward_map(h: np.ndarray, x: float, y: float) -> tuple[float, float]:
    """Plain-numpy projective mapping, independent of the library path."""
    v = h @ np.array([x, y, 1.0])
    return v[0] / v[2], v[1] / v[2]


class TestTypes:
    def test_point_rejects_nan(self):
        with pytest.raises(InvalidGeometryError):
            Point2(float("nan"), 0.0)

    def test_bbox_rejects_empty(self):
        with pytest.raises(InvalidGeometryError):
            BoundingBox(5, 5, 5, 10)

    def test_polygon_needs_three_vertices(self):
        with pytest.raises(InvalidGeometryError):
            Polygon([(0, 0), (1, 1)])

    def test_polygon_rejects_zero_area(self):
        with pytest.raises(InvalidGeometryError):
            Polygon([(5, 5), (5, 5), (5, 5)])

    def test_contour_needs_three_points(self):
        with pytest.raises(InvalidGeometryError):
            Contour([(0, 0), (1, 0)])

    def test_homography_rejects_singular(self):
        with pytest.raises(MappingError):
            Homography(np.zeros((3, 3)))

    def test_homography_normalizes(self):
        h = Homography([[2, 0, 0], [0, 2, 0], [0, 0, 2]])
        assert h.matrix[2, 2] == 1.0

    def test_mask_values_and_dims(self):
        m = Mask.zeros(4, 3)
        assert (m.width, m.height) == (4, 3)
        assert m.pixels.shape == (3, 4)


class TestPolygonToBbox:
    def test_triangle(self):
        box = polygon_to_bbox(Polygon([(0, 0), (4, 0), (0, 3)]))
        assert (box.x_min, box.y_min, box.x_max, box.y_max) == (0, 0, 4, 3)

    def test_degenerate_raises(self):
        with pytest.raises(InvalidGeometryError):
            Polygon([(5, 5), (5, 5), (5, 5)])

    def test_random_polygons_match_vertex_scan(self):
        rng = random.Random(1234)
        for _ in range(20):
            p = random_simple_polygon(rng)
            box = polygon_to_bbox(p)
            assert (box.x_min, box.y_min, box.x_max, box.y_max) == bbox_oracle(p)
            for v in p.vertices:
                assert box.contains(v)


UNIT_SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]


class TestEstimateHomography:
    def test_identity(self):
        h = estimate_homography(UNIT_SQUARE, UNIT_SQUARE)
        assert np.allclose(h.matrix, np.eye(3), atol=1e-9)

    def test_translation(self):
        shifted = [(x + 3, y + 2) for x, y in UNIT_SQUARE]
        h = estimate_homography(UNIT_SQUARE, shifted)
        assert np.allclose(h.matrix, Homography.translation(3, 2).matrix, atol=1e-9)

    def test_recovers_known_matrix(self):
        h0 = np.array([[2.0, 0.0, 1.0], [0.0, 2.0, 2.0], [0.0, 0.0, 1.0]])
        src = [(0, 0), (10, 0), (10, 10), (0, 10), (3, 7)]
        dst = [forward_map(h0, x, y) for x, y in src]
        h = estimate_homography(src, dst)
        assert np.allclose(h.matrix, h0, atol=1e-6)

    def test_too_few_points(self):
        with pytest.raises(EstimationError):
            estimate_homography(UNIT_SQUARE[:3], UNIT_SQUARE[:3])

    def test_collinear_configuration(self):
        src = [(0, 0), (1, 1), (2, 2), (5, 0)]
        dst = [(0, 0), (1, 1), (2, 2), (5, 0)]
        with pytest.raises(EstimationError):
            estimate_homography(src, dst)

    def test_random_exact_correspondences(self):
        rng = np.random.RandomState(7)
        for _ in range(25):
            h0 = np.eye(3) + rng.uniform(-0.3, 0.3, (3, 3))
            h0[2, 2] = 1.0
            if abs(np.linalg.det(h0)) < 1e-3:
                continue
            src = [(float(x), float(y)) for x, y in rng.uniform(0, 100, (8, 2))]
            dst = [forward_map(h0, x, y) for x, y in src]
            h = estimate_homography(src, dst)
            for (sx, sy), (dx, dy) in zip(src, dst):
                mx, my = forward_map(h.matrix, sx, sy)
                assert math.hypot(mx - dx, my - dy) <= 1e-6


class TestApplyHomography:
    def test_identity(self):
        p = apply_homography(Homography.identity(), Point2(7, 9))
        assert (p.x, p.y) == (7, 9)

    def test_translation(self):
        p = apply_homography(Homography.translation(3, 2), Point2(0, 0))
        assert (p.x, p.y) == (3, 2)

    def test_round_trip_with_matrix_inverse_oracle(self):
        rng = np.random.RandomState(21)
        for _ in range(25):
            m = np.eye(3) + rng.uniform(-0.2, 0.2, (3, 3))
            m[2, 2] = 1.0
            if abs(np.linalg.det(m)) < 1e-3:
                continue
            h = Homography(m)
            inv_oracle = np.linalg.inv(h.matrix)
            x, y = rng.uniform(-20, 20, 2)
            fwd = apply_homography(h, Point2(float(x), float(y)))
            ox, oy = forward_map(inv_oracle, fwd.x, fwd.y)
            assert math.hypot(ox - x, oy - y) <= 1e-9
            back = apply_homography(h.inverse(), fwd)
            assert math.hypot(back.x - x, back.y - y) <= 1e-9

    def test_point_at_infinity(self):
        h = Homography([[1, 0, 0], [0, 1, 0], [1, 0, 1]])
        with pytest.raises(MappingError):
            apply_homography(h, Point2(-1.0, 5.0))


def blob_mask(w: int, h: int, cx: float, cy: float, r: float) -> Mask:
    ys, xs = np.mgrid[0:h, 0:w]
    return Mask(((xs - cx) ** 2 + (ys - cy) ** 2 <= r * r).astype(np.uint8))


class TestWarpMask:
    def test_identity_is_bit_identical(self):
        m = blob_mask(20, 20, 10, 10, 6)
        out = warp_mask(m, Homography.identity(), 20, 20)
        assert out == m

    def test_integer_translation_shifts(self):
        m = Mask(np.pad(np.ones((4, 6), dtype=np.uint8), ((3, 3), (2, 12))))
        out = warp_mask(m, Homography.translation(5, 0), m.width, m.height)
        expected = np.zeros_like(m.pixels)
        expected[3:7, 7:13] = 1
        assert np.array_equal(out.pixels, expected)
        assert np.count_nonzero(out.pixels[:, :7]) == 0

    def test_round_trip_iou(self):
        m = blob_mask(60, 60, 30, 30, 14)
        h = Homography([[1.1, 0.05, 3.0], [-0.04, 0.95, 2.0], [1e-4, -5e-5, 1.0]])
        there = warp_mask(m, h, 60, 60)
        back = warp_mask(there, h.inverse(), 60, 60)
        a = m.pixels != 0
        b = back.pixels != 0
        iou = np.count_nonzero(a & b) / np.count_nonzero(a | b)
        assert iou >= 0.95


def boundary_oracle(pix: np.ndarray) -> tuple[set, list[set]]:
    """Classify boundary pixels by flood fill, independent of the tracer.

    Background is split into the outside region (4-connected flood from the
    frame) and holes.  Returns (outer boundary pixel set, one pixel set per
    hole boundary): foreground pixels 4-adjacent to the respective region.
    """
    h, w = pix.shape
    padded = np.pad(pix, 1)
    outside = np.zeros_like(padded, dtype=bool)
    stack = [(0, 0)]
    outside[0, 0] = True
    while stack:
        r, c = stack.pop()
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < h + 2 and 0 <= cc < w + 2 and not padded[rr, cc] and not outside[rr, cc]:
                outside[rr, cc] = True
                stack.append((rr, cc))
    hole = (padded == 0) & ~outside
    hole_labels, n_holes = connected_components(Mask(hole.astype(np.uint8)), connectivity=4)

    outer = set()
    hole_bounds = [set() for _ in range(n_holes)]
    for r in range(1, h + 1):
        for c in range(1, w + 1):
            if not padded[r, c]:
                continue
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                rr, cc = r + dr, c + dc
                if outside[rr, cc]:
                    outer.add((c - 1, r - 1))
                elif hole[rr, cc]:
                    hole_bounds[hole_labels[rr, cc] - 1].add((c - 1, r - 1))
    return outer, [s for s in hole_bounds if s]


class TestTraceContours:
    def test_empty_mask(self):
        assert trace_contours(Mask.zeros(10, 10)) == []

    def test_solid_square_single_contour(self):
        m = Mask(np.ones((10, 10), dtype=np.uint8))
        contours = trace_contours(m)
        assert len(contours) == 1
        traced = {(int(p.x), int(p.y)) for p in contours[0].points}
        outer, holes = boundary_oracle(m.pixels)
        assert holes == []
        assert traced == outer

    def test_annulus_two_contours(self):
        pix = np.zeros((12, 12), dtype=np.uint8)
        pix[2:10, 2:10] = 1
        pix[5:7, 5:7] = 0
        contours = trace_contours(Mask(pix))
        assert len(contours) == 2
        assert contours[0].area > contours[1].area
        outer, holes = boundary_oracle(pix)
        assert len(holes) == 1
        traced_outer = {(int(p.x), int(p.y)) for p in contours[0].points}
        traced_hole = {(int(p.x), int(p.y)) for p in contours[1].points}
        assert traced_outer == outer
        assert traced_hole == holes[0]

    def test_component_and_hole_counts_on_random_rectangles(self):
        rng = random.Random(99)
        for _ in range(10):
            pix = np.zeros((48, 48), dtype=np.uint8)
            n = rng.randint(1, 4)
            placed = 0
            for _ in range(20):
                if placed == n:
                    break
                x, y = rng.randint(1, 36), rng.randint(1, 36)
                bw, bh = rng.randint(4, 9), rng.randint(4, 9)
                # keep one empty pixel of separation so components stay distinct
                region = pix[max(0, y - 1):y + bh + 1, max(0, x - 1):x + bw + 1]
                if region.any():
                    continue
                pix[y:y + bh, x:x + bw] = 1
                placed += 1
            contours = trace_contours(Mask(pix))
            _, count = connected_components(Mask(pix), connectivity=8)
            assert len(contours) == count == placed
            areas = [c.area for c in contours]
            assert areas == sorted(areas, reverse=True)

    def test_isolated_pixel_dropped(self):
        pix = np.zeros((5, 5), dtype=np.uint8)
        pix[2, 2] = 1
        assert trace_contours(Mask(pix)) == []

    def test_rejects_label_mask(self):
        with pytest.raises(ValueError):
            trace_contours(Mask(np.full((4, 4), 3, dtype=np.uint8)))


class TestRasterizePolygon:
    def test_axis_aligned_rectangle(self):
        m = rasterize_polygon(Polygon([(0, 0), (10, 0), (10, 5), (0, 5)]), 20, 20)
        assert int(np.count_nonzero(m.pixels)) == 50
        assert np.count_nonzero(m.pixels[:5, :10]) == 50

    def test_polygon_outside_canvas(self):
        m = rasterize_polygon(Polygon([(30, 30), (40, 30), (40, 40), (30, 40)]), 20, 20)
        assert np.count_nonzero(m.pixels) == 0

    def test_right_triangle_area(self):
        m = rasterize_polygon(Polygon([(0, 0), (20, 0), (0, 20)]), 30, 30)
        count = int(np.count_nonzero(m.pixels))
        assert abs(count - 200) <= 0.05 * 200

    def test_invalid_dims(self):
        with pytest.raises(InvalidGeometryError):
            rasterize_polygon(Polygon([(0, 0), (4, 0), (0, 3)]), 0, 10)


class TestContourToMask:
    def test_traced_rectangle_fills_back_exactly(self):
        pix = np.zeros((30, 30), dtype=np.uint8)
        pix[5:25, 4:26] = 1
        (contour,) = trace_contours(Mask(pix))
        filled = contour_to_mask(contour, 30, 30)
        assert np.array_equal(filled.pixels, pix)

    def test_convex_blob_iou(self):
        m = blob_mask(50, 50, 25, 25, 13)  # area ~530 px
        assert int(np.count_nonzero(m.pixels)) >= 400
        (contour,) = trace_contours(m)
        filled = contour_to_mask(contour, 50, 50)
        a = m.pixels != 0
        b = filled.pixels != 0
        iou = np.count_nonzero(a & b) / np.count_nonzero(a | b)
        assert iou >= 0.98

    def test_thin_line_contour_degenerates_to_its_pixels(self):
        pix = np.zeros((8, 8), dtype=np.uint8)
        pix[4, 1:7] = 1
        (contour,) = trace_contours(Mask(pix))
        filled = contour_to_mask(contour, 8, 8)
        assert np.array_equal(filled.pixels, pix)


class TestOverlapRatio:
    def region(self) -> Mask:
        pix = np.zeros((12, 12), dtype=np.uint8)
        pix[1:11, 1:11] = 1
        return Mask(pix)

    def test_full_coverage(self):
        assert overlap_ratio(self.region(), Mask(np.ones((12, 12), dtype=np.uint8))) == 1.0

    def test_disjoint(self):
        pred = np.zeros((12, 12), dtype=np.uint8)
        pred[11, 11] = 1
        assert overlap_ratio(self.region(), Mask(pred)) == 0.0

    def test_half_coverage(self):
        pred = np.zeros((12, 12), dtype=np.uint8)
        pred[:, :6] = 1
        region = self.region().pixels
        expected = np.count_nonzero((region != 0) & (pred != 0)) / np.count_nonzero(region)
        assert expected == 0.5
        assert overlap_ratio(self.region(), Mask(pred)) == 0.5

    def test_monotone_in_prediction(self):
        rng = np.random.RandomState(5)
        region = self.region()
        pred = (rng.rand(12, 12) < 0.2).astype(np.uint8)
        last = overlap_ratio(region, Mask(pred))
        zeros = np.argwhere(pred == 0)
        rng.shuffle(zeros)
        for r, c in zeros[:30]:
            pred[r, c] = 1
            cur = overlap_ratio(region, Mask(pred))
            assert cur >= last
            last = cur

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            overlap_ratio(self.region(), Mask.zeros(5, 5))

    def test_empty_region(self):
        with pytest.raises(ValueError):
            overlap_ratio(Mask.zeros(12, 12), self.region())


class TestConnectedComponents:
    def test_two_blobs(self):
        pix = np.zeros((10, 10), dtype=np.uint8)
        pix[1:3, 1:3] = 1
        pix[6:9, 6:9] = 1
        labels, count = connected_components(Mask(pix))
        assert count == 2
        assert labels[1, 1] == 1 and labels[7, 7] == 2

    def test_diagonal_touch_connectivity(self):
        pix = np.zeros((4, 4), dtype=np.uint8)
        pix[0, 0] = 1
        pix[1, 1] = 1
        assert connected_components(Mask(pix), connectivity=8)[1] == 1
        assert connected_components(Mask(pix), connectivity=4)[1] == 2


def test_operations_are_deterministic():
    rng = np.random.RandomState(11)
    pix = (rng.rand(40, 40) < 0.4).astype(np.uint8)
    m = Mask(pix)
    h = Homography([[1.02, 0.01, 1.0], [0.0, 0.98, -2.0], [1e-5, 0.0, 1.0]])
    first = warp_mask(m, h, 40, 40)
    second = warp_mask(m, h, 40, 40)
    assert first == second
    c1 = trace_contours(m)
    c2 = trace_contours(m)
    assert [c.points for c in c1] == [c.points for c in c2]
