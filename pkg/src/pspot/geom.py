"""Quadrangle geometry: areas, IoU via convex clipping, NMS, homographies,
perspective bilinear sampling, and reading-orientation normalization.

Image coordinates have y growing downward; a screen-clockwise vertex cycle
has non-negative shoelace sum under that convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff
from .autodiff import Value


class SingularConfiguration(ValueError):
    """Homography system is rank-deficient (degenerate point configuration)."""


class DegenerateQuad(ValueError):
    """Quadrangle too collapsed to warp."""


@dataclass(frozen=True)
class Point2:
    """One image-space point; coordinates must be finite."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")


def _shoelace(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


class Quadrangle:
    """Four vertices in clockwise cycle order.

    Construction validates finiteness and flips counter-clockwise input to
    clockwise while keeping the same starting vertex. The cycle root is
    meaningful (it fixes the reading direction for warping), so it is only
    re-anchored to the top-left when explicitly requested via canonical().
    """

    __slots__ = ("pts",)

    def __init__(self, pts):
        arr = np.asarray(pts, dtype=np.float64).reshape(4, 2)
        if not np.all(np.isfinite(arr)):
            raise ValueError("quadrangle has non-finite vertices")
        if _shoelace(arr) < 0.0:
            arr = np.roll(arr[::-1], 1, axis=0)  # reverse winding, keep vertex 0 first
        self.pts = arr
        self.pts.flags.writeable = False

    @classmethod
    def from_flat(cls, values) -> "Quadrangle":
        """Build from x1,y1,...,x4,y4 (the serialization order)."""
        return cls(np.asarray(values, dtype=np.float64).reshape(4, 2))

    def to_flat(self) -> list[float]:
        return [float(v) for v in self.pts.reshape(-1)]

    @property
    def area(self) -> float:
        return abs(_shoelace(self.pts))

    @property
    def centroid(self) -> np.ndarray:
        return self.pts.mean(axis=0)

    def width(self) -> float:
        """Mean length of the two reading-direction edges (v0v1 and v3v2)."""
        return 0.5 * (np.linalg.norm(self.pts[1] - self.pts[0])
                      + np.linalg.norm(self.pts[2] - self.pts[3]))

    def height(self) -> float:
        """Mean length of the two cross edges (v1v2 and v0v3)."""
        return 0.5 * (np.linalg.norm(self.pts[2] - self.pts[1])
                      + np.linalg.norm(self.pts[3] - self.pts[0]))

    def canonical(self) -> "Quadrangle":
        """Re-root the cycle at the top-left-most vertex (min x+y, then y, x)."""
        keys = [(p[0] + p[1], p[1], p[0]) for p in self.pts]
        start = min(range(4), key=lambda i: keys[i])
        return Quadrangle(np.roll(self.pts, -start, axis=0))

    def shrunk(self, factor: float) -> "Quadrangle":
        """Scale vertices toward the centroid."""
        c = self.centroid
        return Quadrangle(c + factor * (self.pts - c))

    def scaled(self, s: float) -> "Quadrangle":
        return Quadrangle(self.pts * s)

    def translated(self, dx: float, dy: float) -> "Quadrangle":
        return Quadrangle(self.pts + np.array([dx, dy]))

    def contains_points(self, xs, ys) -> np.ndarray:
        """Vectorized point-in-convex-hull test (boundary counts as inside)."""
        hull = convex_hull(self.pts)
        if len(hull) < 3:
            return np.zeros(np.broadcast(xs, ys).shape, dtype=bool)
        inside = np.ones(np.broadcast(xs, ys).shape, dtype=bool)
        n = len(hull)
        for i in range(n):
            ax, ay = hull[i]
            bx, by = hull[(i + 1) % n]
            edge = math.hypot(bx - ax, by - ay)
            cross = (bx - ax) * (ys - ay) - (by - ay) * (xs - ax)
            # hull is clockwise in y-down coords: interior is the cross >= 0
            # side; tolerate ~1e-9 px of signed distance for boundary points
            inside &= cross >= -1e-9 * (edge + 1.0)
        return inside

    def __repr__(self):
        flat = ", ".join(f"{v:.2f}" for v in self.pts.reshape(-1))
        return f"Quadrangle({flat})"


def polygon_area(q: Quadrangle) -> float:
    """Shoelace area of the vertex cycle; degenerate quads give 0."""
    return q.area


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Convex hull (Andrew monotone chain), returned clockwise in y-down coords."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if len(pts) <= 2:
        return pts
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    # monotone chain above yields counter-clockwise in y-up; y-down flips it,
    # so this is already clockwise on screen
    return hull


def clip_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman: clip a polygon by a convex clockwise polygon."""
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        if not output:
            return np.zeros((0, 2))
        cx1, cy1 = clip[i]
        cx2, cy2 = clip[(i + 1) % n]
        input_list = output
        output = []

        def inside(p):
            # clockwise clip edge in y-down coords keeps the cross<=0 side
            return (cx2 - cx1) * (p[1] - cy1) - (cy2 - cy1) * (p[0] - cx1) >= 0

        def intersection(s, e):
            dcx, dcy = cx1 - cx2, cy1 - cy2
            dpx, dpy = s[0] - e[0], s[1] - e[1]
            n1 = cx1 * cy2 - cy1 * cx2
            n2 = s[0] * e[1] - s[1] * e[0]
            denom = dcx * dpy - dcy * dpx
            return ((n1 * dpx - n2 * dcx) / denom, (n1 * dpy - n2 * dcy) / denom)

        s = input_list[-1]
        for e in input_list:
            if inside(e):
                if not inside(s):
                    output.append(intersection(s, e))
                output.append(e)
            elif inside(s):
                output.append(intersection(s, e))
            s = e
    return np.array(output) if output else np.zeros((0, 2))


def iou(a: Quadrangle, b: Quadrangle) -> float:
    """Intersection over union; non-convex inputs are convexified first.

    Degenerate (zero-area) quads score 0 against everything.
    """
    ha = convex_hull(a.pts)
    hb = convex_hull(b.pts)
    if len(ha) < 3 or len(hb) < 3:
        return 0.0
    area_a = abs(_shoelace(ha))
    area_b = abs(_shoelace(hb))
    if area_a <= 0.0 or area_b <= 0.0:
        return 0.0
    inter_poly = clip_convex(ha, hb)
    inter = abs(_shoelace(inter_poly)) if len(inter_poly) >= 3 else 0.0
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def nms(proposals, iou_thresh: float):
    """Greedy score-descending suppression; ties keep the earlier input index."""
    order = sorted(range(len(proposals)), key=lambda i: (-proposals[i][1], i))
    kept = []
    for i in order:
        qi = proposals[i][0]
        if all(iou(qi, proposals[j][0]) < iou_thresh for j in kept):
            kept.append(i)
    kept.sort()
    return [proposals[i] for i in kept]


@dataclass(frozen=True)
class Homography:
    """3x3 projective map, normalized so h[2,2] == 1."""

    h: np.ndarray

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        ones = np.ones((len(pts), 1))
        proj = np.hstack([pts, ones]) @ self.h.T
        return proj[:, :2] / proj[:, 2:3]

    def inverse(self) -> "Homography":
        inv = np.linalg.inv(self.h)
        return Homography(inv / inv[2, 2])


def solve_homography(src, dst) -> Homography:
    """Direct linear transform from 4 source points to 4 destination points.

    Solved as an 8x8 linear system with h[2,2] pinned to 1.
    """
    s = np.asarray(src, dtype=np.float64).reshape(4, 2)
    d = np.asarray(dst, dtype=np.float64).reshape(4, 2)
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i in range(4):
        x, y = s[i]
        u, v = d[i]
        a[2 * i] = [x, y, 1, 0, 0, 0, -x * u, -y * u]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -x * v, -y * v]
        b[2 * i] = u
        b[2 * i + 1] = v
    try:
        sol = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as e:
        raise SingularConfiguration(f"homography system singular: {e}") from None
    if not np.all(np.isfinite(sol)):
        raise SingularConfiguration("homography solution is non-finite")
    h = np.append(sol, 1.0).reshape(3, 3)
    if abs(np.linalg.det(h)) < 1e-12:
        raise SingularConfiguration("homography is not invertible")
    return Homography(h)


def bilinear_grid(hmat: Homography, out_h: int, out_w: int) -> np.ndarray:
    """Source coordinates for each output cell center (align-corners-false).

    Output cell (i, j) is centered at (j+0.5, i+0.5) in destination space and
    maps through hmat to a continuous source location; source pixel (r, c) is
    centered at (c+0.5, r+0.5).
    """
    jj, ii = np.meshgrid(np.arange(out_w), np.arange(out_h))
    centers = np.stack([jj + 0.5, ii + 0.5], axis=-1).reshape(-1, 2)
    return hmat.apply(centers).reshape(out_h, out_w, 2)


def _bilinear_gather(feature: np.ndarray, grid: np.ndarray):
    """Neighbor indices, weights and validity for zero-padded bilinear sampling."""
    h, w = feature.shape[0], feature.shape[1]
    x = grid[..., 0] - 0.5
    y = grid[..., 1] - 0.5
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    parts = []
    for dy, dx, wgt in ((0, 0, (1 - fy) * (1 - fx)), (0, 1, (1 - fy) * fx),
                        (1, 0, fy * (1 - fx)), (1, 1, fy * fx)):
        yy = y0 + dy
        xx = x0 + dx
        valid = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        parts.append((np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1), wgt * valid))
    return parts


def warp_sample(feature, hmat: Homography, out_h: int, out_w: int):
    """Perspective-sample a feature map into an out_h x out_w map.

    Each output cell bilinearly samples the source at its hmat-mapped center;
    out-of-bounds reads contribute zero. Accepts a plain array or an autodiff
    Value; the Value path is differentiable w.r.t. the feature payload.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {out_h}x{out_w}")
    is_value = isinstance(feature, Value)
    data = feature.data if is_value else np.asarray(feature, dtype=np.float64)
    squeeze = data.ndim == 2
    if squeeze:
        data = data[:, :, None]
    grid = bilinear_grid(hmat, out_h, out_w)
    parts = _bilinear_gather(data, grid)
    out = np.zeros((out_h, out_w, data.shape[2]))
    for yy, xx, wgt in parts:
        out += data[yy, xx] * wgt[..., None]
    if squeeze:
        out = out[:, :, 0]
    if not is_value:
        return out

    def backward(g):
        gg = g[:, :, None] if squeeze else g
        gx = np.zeros_like(data)
        for yy, xx, wgt in parts:
            np.add.at(gx, (yy, xx), gg * wgt[..., None])
        return (gx[:, :, 0] if feature.ndim == 2 else gx,)

    return autodiff.node(out, (feature,), backward)


def normalize_orientation(q: Quadrangle):
    """Re-root vertical quads so the warp reads them after a 90-degree turn.

    When height/width exceeds 1 the cycle is rolled by one vertex, which swaps
    the reading edge; applying the operation twice equals applying it once.
    Returns (quad, rotated).
    """
    w = q.width()
    h = q.height()
    if w > 0 and h / w > 1.0:
        return Quadrangle(np.roll(q.pts, -1, axis=0)), True
    return q, False


def enclosing_quadrangle(points) -> Quadrangle:
    """Minimum-area enclosing rectangle of the convex hull (rotating calipers).

    Used to reduce many-point polygon labels to the quadrangle the pipeline
    consumes.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    hull = convex_hull(pts)
    if len(hull) < 3:
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        hi = np.maximum(hi, lo + 1e-9)
        return Quadrangle([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    best = None
    n = len(hull)
    for i in range(n):
        edge = hull[(i + 1) % n] - hull[i]
        norm = np.linalg.norm(edge)
        if norm < 1e-12:
            continue
        ux = edge / norm
        uy = np.array([-ux[1], ux[0]])
        proj_x = hull @ ux
        proj_y = hull @ uy
        w = proj_x.max() - proj_x.min()
        h = proj_y.max() - proj_y.min()
        area = w * h
        if best is None or area < best[0]:
            best = (area, ux, uy, proj_x.min(), proj_x.max(), proj_y.min(), proj_y.max())
    _, ux, uy, x0, x1, y0, y1 = best
    corners = [x0 * ux + y0 * uy, x1 * ux + y0 * uy, x1 * ux + y1 * uy, x0 * ux + y1 * uy]
    return Quadrangle(np.array(corners)).canonical()
