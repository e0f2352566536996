"""Pure geometric and raster primitives.

Polygons, boxes, homographies, mask warping, border-following contour
tracing, scanline rasterization and overlap scoring.  Everything here is
deterministic, side-effect free and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "GeometryError",
    "InvalidGeometryError",
    "EstimationError",
    "MappingError",
    "Point2",
    "BoundingBox",
    "Polygon",
    "Contour",
    "Homography",
    "Mask",
    "polygon_to_bbox",
    "estimate_homography",
    "apply_homography",
    "warp_mask",
    "trace_contours",
    "rasterize_polygon",
    "contour_to_mask",
    "overlap_ratio",
    "connected_components",
]


class GeometryError(ValueError):
    """Base class for geometric failures."""


class InvalidGeometryError(GeometryError):
    """Degenerate polygon, box or contour."""


class EstimationError(GeometryError):
    """Homography estimation failed: too few or degenerate correspondences."""


class MappingError(GeometryError):
    """Projective mapping undefined: singular matrix or point at infinity."""


@dataclass(frozen=True)
class Point2:
    """A 2D point in pixel coordinates."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidGeometryError(f"non-finite point ({self.x}, {self.y})")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box, x_min < x_max and y_min < y_max."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        vals = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidGeometryError(f"non-finite box {vals}")
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise InvalidGeometryError(f"empty box {vals}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def intersection(self, other: "BoundingBox") -> "BoundingBox | None":
        x0 = max(self.x_min, other.x_min)
        y0 = max(self.y_min, other.y_min)
        x1 = min(self.x_max, other.x_max)
        y1 = min(self.y_max, other.y_max)
        if x0 >= x1 or y0 >= y1:
            return None
        return BoundingBox(x0, y0, x1, y1)

    def contains(self, p: Point2) -> bool:
        return self.x_min <= p.x <= self.x_max and self.y_min <= p.y <= self.y_max


def _shoelace_area(xs: np.ndarray, ys: np.ndarray) -> float:
    """Signed area of a closed polygon given vertex coordinate arrays."""
    x2 = np.roll(xs, -1)
    y2 = np.roll(ys, -1)
    return float(np.sum(xs * y2 - x2 * ys) / 2.0)


@dataclass(frozen=True)
class Polygon:
    """Simple polygon, implicitly closed, at least 3 vertices, nonzero area."""

    vertices: tuple[Point2, ...]

    def __init__(self, vertices: Sequence[Point2 | tuple[float, float]]):
        pts = tuple(
            v if isinstance(v, Point2) else Point2(float(v[0]), float(v[1]))
            for v in vertices
        )
        if len(pts) < 3:
            raise InvalidGeometryError(f"polygon needs >= 3 vertices, got {len(pts)}")
        xs = np.array([p.x for p in pts])
        ys = np.array([p.y for p in pts])
        if abs(_shoelace_area(xs, ys)) <= 0.0:
            raise InvalidGeometryError("polygon has zero enclosed area")
        object.__setattr__(self, "vertices", pts)

    @property
    def area(self) -> float:
        xs = np.array([p.x for p in self.vertices])
        ys = np.array([p.y for p in self.vertices])
        return abs(_shoelace_area(xs, ys))


@dataclass(frozen=True)
class Contour:
    """Closed polyline of at least 3 points.

    Contours produced by :func:`trace_contours` step through 8-connected
    raster positions; contours mapped through a homography carry arbitrary
    real coordinates.
    """

    points: tuple[Point2, ...]

    def __init__(self, points: Sequence[Point2 | tuple[float, float]]):
        pts = tuple(
            p if isinstance(p, Point2) else Point2(float(p[0]), float(p[1]))
            for p in points
        )
        if len(pts) < 3:
            raise InvalidGeometryError(f"contour needs >= 3 points, got {len(pts)}")
        object.__setattr__(self, "points", pts)

    @property
    def area(self) -> float:
        xs = np.array([p.x for p in self.points])
        ys = np.array([p.y for p in self.points])
        return abs(_shoelace_area(xs, ys))


class Homography:
    """3x3 invertible projective transform, normalized so h[2][2] == 1."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise MappingError(f"homography must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise MappingError("homography has non-finite entries")
        det = np.linalg.det(m)
        if abs(det) < 1e-12:
            raise MappingError("homography is singular")
        if abs(m[2, 2]) > 1e-12:
            m = m / m[2, 2]
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __setattr__(self, name, value):
        raise AttributeError("Homography is immutable")

    def __eq__(self, other):
        return isinstance(other, Homography) and np.array_equal(self.matrix, other.matrix)

    def __repr__(self):
        return f"Homography({self.matrix.tolist()!r})"

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    @classmethod
    def translation(cls, dx: float, dy: float) -> "Homography":
        return cls([[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]])

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))


class Mask:
    """Raster of per-pixel uint8 values, binary occupancy or class labels."""

    __slots__ = ("pixels",)

    def __init__(self, pixels):
        arr = np.array(pixels, dtype=np.uint8, copy=True, order="C")
        if arr.ndim != 2 or arr.size == 0:
            raise InvalidGeometryError(f"mask must be 2D and non-empty, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Mask is immutable")

    @classmethod
    def zeros(cls, width: int, height: int) -> "Mask":
        if width <= 0 or height <= 0:
            raise InvalidGeometryError(f"mask dims must be positive, got {width}x{height}")
        return cls(np.zeros((height, width), dtype=np.uint8))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        return isinstance(other, Mask) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self):
        return f"Mask({self.width}x{self.height}, {int(np.count_nonzero(self.pixels))} nonzero)"


def polygon_to_bbox(p: Polygon) -> BoundingBox:
    """Smallest axis-aligned box covering all vertices of the polygon."""
    xs = [v.x for v in p.vertices]
    ys = [v.y for v in p.vertices]
    return BoundingBox(min(xs), min(ys), max(xs), max(ys))


def _normalize_points(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hartley normalization: centroid to origin, mean distance sqrt(2)."""
    centroid = pts.mean(axis=0)
    dists = np.hypot(pts[:, 0] - centroid[0], pts[:, 1] - centroid[1])
    mean_dist = dists.mean()
    if mean_dist < 1e-12:
        raise EstimationError("all correspondence points coincide")
    s = math.sqrt(2.0) / mean_dist
    t = np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )
    ones = np.ones((pts.shape[0], 1))
    normed = (t @ np.hstack([pts, ones]).T).T[:, :2]
    return normed, t


def estimate_homography(
    src: Sequence[Point2 | tuple[float, float]],
    dst: Sequence[Point2 | tuple[float, float]],
) -> Homography:
    """Estimate the projective transform mapping src[i] to dst[i].

    Hartley-normalized direct linear transform: the 2Nx9 system is solved
    by SVD and the result denormalized.  Exact correspondences reproduce
    the generating transform to well below 1e-6 px.
    """
    src_arr = np.array([(p.x, p.y) if isinstance(p, Point2) else p for p in src], dtype=np.float64)
    dst_arr = np.array([(p.x, p.y) if isinstance(p, Point2) else p for p in dst], dtype=np.float64)
    if src_arr.ndim != 2 or src_arr.shape != dst_arr.shape or src_arr.shape[1] != 2:
        raise EstimationError("src and dst must be equal-length lists of 2D points")
    n = src_arr.shape[0]
    if n < 4:
        raise EstimationError(f"need at least 4 correspondences, got {n}")
    if not (np.all(np.isfinite(src_arr)) and np.all(np.isfinite(dst_arr))):
        raise EstimationError("correspondences contain non-finite coordinates")

    src_n, t_src = _normalize_points(src_arr)
    dst_n, t_dst = _normalize_points(dst_arr)

    a = np.zeros((2 * n, 9))
    for i in range(n):
        x, y = src_n[i]
        u, v = dst_n[i]
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u]
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, -v]

    _, sv, vt = np.linalg.svd(a)
    # Unique solution (up to scale) needs rank 8; a collinear/coincident
    # configuration drops the 8th singular value.  For n == 4 the system is
    # 8x9, so the solution direction itself carries no singular value.
    if sv[0] < 1e-12 or sv[7] / sv[0] < 1e-10:
        raise EstimationError("degenerate correspondence configuration")
    h_n = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ h_n @ t_src
    if not np.all(np.isfinite(h)) or abs(np.linalg.det(h)) < 1e-12:
        raise EstimationError("estimated transform is singular")
    return Homography(h)


def apply_homography(h: Homography, p: Point2) -> Point2:
    """Map a point through the transform with projective division."""
    x, y = p.x, p.y
    m = h.matrix
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(w) < 1e-12:
        raise MappingError(f"point ({x}, {y}) maps to the line at infinity")
    u = (m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w
    v = (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w
    return Point2(u, v)


def warp_mask(m: Mask, h: Homography, out_w: int, out_h: int) -> Mask:
    """Warp a label mask, nearest-neighbor sampled through the inverse map.

    Output pixel (u, v) takes the source value at round(H^-1 (u, v));
    sources outside the input raster yield background 0.
    """
    if out_w <= 0 or out_h <= 0:
        raise InvalidGeometryError(f"output dims must be positive, got {out_w}x{out_h}")
    inv = h.inverse().matrix
    us, vs = np.meshgrid(np.arange(out_w, dtype=np.float64), np.arange(out_h, dtype=np.float64))
    w = inv[2, 0] * us + inv[2, 1] * vs + inv[2, 2]
    safe = np.abs(w) > 1e-12
    w_safe = np.where(safe, w, 1.0)
    sx = (inv[0, 0] * us + inv[0, 1] * vs + inv[0, 2]) / w_safe
    sy = (inv[1, 0] * us + inv[1, 1] * vs + inv[1, 2]) / w_safe
    # round half up, deterministic for exact .5 hits
    ix = np.floor(sx + 0.5).astype(np.int64)
    iy = np.floor(sy + 0.5).astype(np.int64)
    valid = safe & (ix >= 0) & (ix < m.width) & (iy >= 0) & (iy < m.height)
    out = np.zeros((out_h, out_w), dtype=np.uint8)
    out[valid] = m.pixels[iy[valid], ix[valid]]
    return Mask(out)


# 8-neighborhood in counterclockwise order on screen (y grows downward):
# E, NE, N, NW, W, SW, S, SE as (row, col) offsets.
_DIRS8 = ((0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1))
_DIR_INDEX = {d: i for i, d in enumerate(_DIRS8)}


def _require_binary(m: Mask, name: str) -> np.ndarray:
    if m.pixels.max(initial=0) > 1:
        raise ValueError(f"{name} must be binary (values 0 or 1)")
    return m.pixels


def trace_contours(m: Mask) -> list[Contour]:
    """Trace all region borders of a binary mask.

    Border following over 8-connected foreground components: one outer
    contour per component plus one contour per interior hole (holes are
    4-connected background).  Contours are closed pixel paths, ordered by
    descending enclosed area.  Borders of fewer than 3 pixels (isolated
    dots, dominoes) cannot form a closed polyline and are dropped.
    """
    pix = _require_binary(m, "mask")
    h, w = pix.shape
    f = np.zeros((h + 2, w + 2), dtype=np.int64)
    f[1:-1, 1:-1] = pix
    bg = f == 0  # background never changes during tracing

    # Candidate border starts, precomputed on the untouched raster.
    fg = ~bg
    left_bg = np.zeros_like(fg)
    left_bg[:, 1:] = bg[:, :-1]
    right_bg = np.zeros_like(fg)
    right_bg[:, :-1] = bg[:, 1:]
    cand_rows, cand_cols = np.nonzero(fg & (left_bg | right_bg))

    nbd = 1
    borders: list[list[tuple[int, int]]] = []
    for i, j in zip(cand_rows.tolist(), cand_cols.tolist()):
        if f[i, j] == 1 and bg[i, j - 1]:
            from_dir = _DIR_INDEX[(0, -1)]
        elif f[i, j] >= 1 and bg[i, j + 1]:
            from_dir = _DIR_INDEX[(0, 1)]
        else:
            continue
        nbd += 1
        borders.append(_follow_border(f, bg, i, j, from_dir, nbd))

    contours = []
    for pts in borders:
        if len(pts) < 3:
            continue
        contours.append(Contour([Point2(float(c - 1), float(r - 1)) for r, c in pts]))
    contours.sort(key=lambda c: -c.area)
    return contours


def _follow_border(f, bg, i0, j0, from_dir, nbd):
    """One border-following pass from a detected start pixel, labeling f."""
    # clockwise scan for the first foreground neighbor
    i1 = None
    for k in range(1, 9):
        dr, dc = _DIRS8[(from_dir - k) % 8]
        if not bg[i0 + dr, j0 + dc]:
            i1 = (i0 + dr, j0 + dc)
            break
    if i1 is None:
        f[i0, j0] = -nbd  # isolated pixel
        return [(i0, j0)]

    border = []
    i2 = i1
    i3 = (i0, j0)
    while True:
        # counterclockwise scan from the neighbor after i2
        start = _DIR_INDEX[(i2[0] - i3[0], i2[1] - i3[1])]
        east_zero = False
        i4 = None
        for k in range(1, 9):
            idx = (start + k) % 8
            dr, dc = _DIRS8[idx]
            r, c = i3[0] + dr, i3[1] + dc
            if bg[r, c]:
                if idx == 0:
                    east_zero = True
            else:
                i4 = (r, c)
                break
        if east_zero:
            f[i3] = -nbd
        elif f[i3] == 1:
            f[i3] = nbd
        border.append(i3)
        if i4 == (i0, j0) and i3 == i1:
            return border
        i2, i3 = i3, i4


def _scanline_fill(xs: np.ndarray, ys: np.ndarray, width: int, height: int) -> np.ndarray:
    """Even-odd scanline fill of the closed polyline (xs, ys) at pixel centers."""
    out = np.zeros((height, width), dtype=np.uint8)
    x2 = np.roll(xs, -1)
    y2 = np.roll(ys, -1)
    keep = ys != y2  # horizontal edges never cross a scanline
    ex0, ey0, ex1, ey1 = xs[keep], ys[keep], x2[keep], y2[keep]
    if ex0.size == 0:
        return out
    lo = np.minimum(ey0, ey1)
    hi = np.maximum(ey0, ey1)
    row_lo = max(0, int(math.floor(lo.min() - 0.5)))
    row_hi = min(height - 1, int(math.ceil(hi.max())))
    for row in range(row_lo, row_hi + 1):
        y = row + 0.5
        hit = (lo <= y) & (y < hi)  # half-open span counts each vertex once
        if not np.any(hit):
            continue
        t = (y - ey0[hit]) / (ey1[hit] - ey0[hit])
        crossings = np.sort(ex0[hit] + t * (ex1[hit] - ex0[hit]))
        for a, b in zip(crossings[0::2], crossings[1::2]):
            c0 = max(0, int(math.ceil(a - 0.5)))
            c1 = min(width, int(math.ceil(b - 0.5)))
            if c1 > c0:
                out[row, c0:c1] = 1
    return out


def rasterize_polygon(p: Polygon, width: int, height: int) -> Mask:
    """Rasterize a polygon: pixels whose centers fall inside (even-odd rule)."""
    if width <= 0 or height <= 0:
        raise InvalidGeometryError(f"canvas dims must be positive, got {width}x{height}")
    xs = np.array([v.x for v in p.vertices])
    ys = np.array([v.y for v in p.vertices])
    return Mask(_scanline_fill(xs, ys, width, height))


def contour_to_mask(c: Contour, width: int, height: int) -> Mask:
    """Region enclosed by a traced contour, boundary pixels included.

    Traced contours run through pixel centers, so the even-odd fill of the
    bare polygon excludes the border ring; the contour pixels themselves
    are added back.  Degenerate (zero-area) contours reduce to their own
    pixels.
    """
    if width <= 0 or height <= 0:
        raise InvalidGeometryError(f"canvas dims must be positive, got {width}x{height}")
    xs = np.array([p.x for p in c.points])
    ys = np.array([p.y for p in c.points])
    out = _scanline_fill(xs + 0.5, ys + 0.5, width, height)
    ix = np.floor(xs + 0.5).astype(np.int64)
    iy = np.floor(ys + 0.5).astype(np.int64)
    ok = (ix >= 0) & (ix < width) & (iy >= 0) & (iy < height)
    out[iy[ok], ix[ok]] = 1
    return Mask(out)


def overlap_ratio(region: Mask, prediction: Mask) -> float:
    """Fraction of the region's foreground covered by prediction foreground."""
    if (region.width, region.height) != (prediction.width, prediction.height):
        raise ValueError(
            f"mask dims differ: {region.width}x{region.height} vs "
            f"{prediction.width}x{prediction.height}"
        )
    r = _require_binary(region, "region") != 0
    p = _require_binary(prediction, "prediction") != 0
    total = int(np.count_nonzero(r))
    if total == 0:
        raise ValueError("region has no foreground pixels")
    covered = int(np.count_nonzero(r & p))
    return covered / total


_OFFSETS4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
_OFFSETS8 = _OFFSETS4 + ((-1, -1), (-1, 1), (1, -1), (1, 1))


def connected_components(m: Mask, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label foreground components of a binary mask.

    Returns (labels, count) where labels is int32 of the mask's shape with
    0 for background and 1..count for components, numbered in raster order
    of their first pixel.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    pix = _require_binary(m, "mask")
    offsets = _OFFSETS8 if connectivity == 8 else _OFFSETS4
    h, w = pix.shape
    labels = np.zeros((h, w), dtype=np.int32)
    count = 0
    rows, cols = np.nonzero(pix)
    for r0, c0 in zip(rows.tolist(), cols.tolist()):
        if labels[r0, c0]:
            continue
        count += 1
        stack = [(r0, c0)]
        labels[r0, c0] = count
        while stack:
            r, c = stack.pop()
            for dr, dc in offsets:
                rr, cc = r + dr, c + dc
                if 0 <= rr < h and 0 <= cc < w and pix[rr, cc] and not labels[rr, cc]:
                    labels[rr, cc] = count
                    stack.append((rr, cc))
    return labels, count
