"""Backbone, detection head, proposal decoding, and the perspective RoI warp."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from .. import geom
from ..autodiff import Value
from ..geom import Quadrangle
from .layers import Conv2d, Layer

STRIDE = 4


class BadImageShape(ValueError):
    """Input image is not HxWx3 with H, W multiples of the backbone stride."""


class DegenerateQuad(ValueError):
    """Quadrangle collapsed; no RoI can be warped from it."""


@dataclass
class DetectionOutput:
    """Per-location text probability and the 8 corner-offset channels (pixels)."""

    score: Value    # (H/4, W/4), post-sigmoid
    offsets: Value  # (H/4, W/4, 8), input-resolution pixels


@dataclass
class Proposal:
    quad: Quadrangle
    score: float
    index: int


@dataclass
class RoiFeature:
    """Height-8 warped feature, right-padded with zeros to the max width."""

    feature: Value  # (8, 64, C)
    valid_width: int
    rotated: bool


class Backbone(Layer):
    """Four 3x3 conv blocks with two stride-2 poolings and a lateral merge."""

    def __init__(self, cfg, rng):
        c1, c2, c3, c4 = cfg.backbone_channels
        self.conv1 = Conv2d(3, c1, rng=rng)
        self.conv2 = Conv2d(c1, c2, rng=rng)
        self.conv3 = Conv2d(c2, c3, rng=rng)
        self.conv4 = Conv2d(c3, c4, rng=rng)
        self.lateral = Conv2d(c1, c4, k=1, rng=rng)

    def __call__(self, image) -> Value:
        img = image.data if isinstance(image, Value) else np.asarray(image)
        if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] % STRIDE or img.shape[1] % STRIDE:
            raise BadImageShape(
                f"expected HxWx3 with H, W multiples of {STRIDE}, got {img.shape}")
        x = ad.const(image)
        c1 = ad.relu(self.conv1(x))
        p1 = ad.max_pool2d(c1)
        c2 = ad.relu(self.conv2(p1))
        p2 = ad.max_pool2d(c2)
        c3 = ad.relu(self.conv3(p2))
        c4 = self.conv4(c3)
        lat = self.lateral(ad.max_pool2d(p1))
        return ad.relu(c4 + lat)


class DetectHead(Layer):
    """Per-location text/non-text score plus 8 corner offsets."""

    def __init__(self, cfg, rng):
        c = cfg.backbone_channels[-1]
        self.trunk = Conv2d(c, c, rng=rng)
        self.score_conv = Conv2d(c, 1, k=1, rng=rng)
        self.offset_conv = Conv2d(c, 8, k=1, rng=rng)
        self.loc_scale = cfg.loc_scale

    def __call__(self, feature: Value) -> DetectionOutput:
        t = ad.relu(self.trunk(feature))
        score = ad.reshape(ad.sigmoid(self.score_conv(t)), feature.shape[:2])
        offsets = self.offset_conv(t) * self.loc_scale
        return DetectionOutput(score=score, offsets=offsets)


def decode_proposals(det: DetectionOutput, score_thresh: float,
                     nms_thresh: float) -> list[Proposal]:
    """Threshold the score map, assemble corner quads, and suppress duplicates.

    A location (r, c) above threshold emits vertex m at
    (c*4 + dx_m, r*4 + dy_m).
    """
    scores = det.score.data if isinstance(det.score, Value) else np.asarray(det.score)
    offsets = det.offsets.data if isinstance(det.offsets, Value) else np.asarray(det.offsets)
    rows, cols = np.nonzero(scores >= score_thresh)
    scored = []
    for r, c in zip(rows, cols):
        base = np.array([c * STRIDE, r * STRIDE], dtype=np.float64)
        verts = base + offsets[r, c].reshape(4, 2)
        quad = Quadrangle(verts)
        if quad.area <= 1e-9:
            continue
        scored.append((quad, float(scores[r, c])))
    kept = geom.nms(scored, nms_thresh)
    return [Proposal(quad=q, score=s, index=i) for i, (q, s) in enumerate(kept)]


def roi_transform(feature: Value, quad: Quadrangle, out_h: int = 8,
                  max_w: int = 64) -> RoiFeature:
    """Warp a quadrangle region of the stride-4 feature map to 8 x <=64.

    The quad is given at input resolution. Vertical regions are re-rooted
    first; the width follows the aspect ratio (out_h * w / h), zero-padding
    to max_w when narrower and sampling directly at max_w (a fused bilinear
    resize) when wider. Differentiable w.r.t. the feature payload.
    """
    norm, rotated = geom.normalize_orientation(quad)
    w_px = norm.width()
    h_px = norm.height()
    if w_px < 1e-6 or h_px < 1e-6 or norm.area < 1e-9:
        raise DegenerateQuad(f"cannot warp quad with extent {w_px:.2g}x{h_px:.2g}")
    width = int(round(out_h * w_px / h_px))
    width = max(1, min(max_w, width))
    src = norm.pts / STRIDE
    dst = [[0, 0], [width, 0], [width, out_h], [0, out_h]]
    try:
        hmat = geom.solve_homography(dst, src)
    except geom.SingularConfiguration as e:
        raise DegenerateQuad(str(e)) from None
    warped = geom.warp_sample(feature, hmat, out_h, width)
    if width < max_w:
        channels = feature.shape[2]
        pad = Value(np.zeros((out_h, max_w - width, channels)))
        warped = ad.concat([warped, pad], axis=1)
    return RoiFeature(feature=warped, valid_width=width, rotated=rotated)
