"""Shared test oracles: finite-difference gradients and rasterized IoU.

These stay independent of the library code paths they check: the gradient
oracle only evaluates forward passes, and the IoU oracle uses a crossing
count instead of polygon clipping.
"""
from __future__ import annotations

import numpy as np

from pspot import geom


def numeric_grad(build, param, eps=1e-4):
    """Central finite differences of the scalar build() w.r.t. param.data."""
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = build().item()
        flat[i] = orig - eps
        fm = build().item()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad


def check_gradients(build, params, eps=1e-4, rtol=1e-4):
    """Assert reverse-mode grads of build() match central differences."""
    for p in params:
        p.grad = None
    out = build()
    out.backward()
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        numeric = numeric_grad(build, p, eps=eps)
        denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
        rel = np.linalg.norm(analytic - numeric) / denom
        assert rel < rtol, f"gradient mismatch: rel err {rel:.3e} for {p!r}"


def point_in_polygon(pts, xs, ys):
    """Crossing-number membership test, vectorized over sample points."""
    inside = np.zeros(np.broadcast(xs, ys).shape, dtype=bool)
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        crosses = (y1 > ys) != (y2 > ys)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (ys - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (xs < xint)
    return inside


def raster_iou(a: geom.Quadrangle, b: geom.Quadrangle, grid=512):
    """IoU by counting cell centers of a grid over the joint bounding box."""
    pts = np.vstack([a.pts, b.pts])
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    xs = lo[0] + (np.arange(grid) + 0.5) / grid * span[0]
    ys = lo[1] + (np.arange(grid) + 0.5) / grid * span[1]
    gx, gy = np.meshgrid(xs, ys)
    in_a = point_in_polygon(a.pts, gx, gy)
    in_b = point_in_polygon(b.pts, gx, gy)
    union = np.count_nonzero(in_a | in_b)
    if union == 0:
        return 0.0
    return np.count_nonzero(in_a & in_b) / union


def random_convex_quad(rng, center=None, radius=(30.0, 120.0), canvas=512.0):
    """Convex quadrangle from four sorted angles on a random ellipse."""
    if center is None:
        center = rng.uniform(canvas * 0.25, canvas * 0.75, size=2)
    rx = rng.uniform(*radius)
    ry = rng.uniform(*radius)
    rot = rng.uniform(0.0, 2.0 * np.pi)
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=4))
    while np.min(np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))) < 0.3:
        angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=4))
    xs = rx * np.cos(angles)
    ys = ry * np.sin(angles)
    c, s = np.cos(rot), np.sin(rot)
    pts = np.stack([center[0] + c * xs - s * ys, center[1] + s * xs + c * ys], axis=1)
    return geom.Quadrangle(pts)
