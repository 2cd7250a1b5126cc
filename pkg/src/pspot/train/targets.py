"""Ground-truth rasterization: score masks and corner-offset maps."""
from __future__ import annotations

import numpy as np

from ..model import STRIDE

SHRINK = 0.7  # mask quads shrink toward the centroid to avoid edge targets


def rasterize_quad(quad, grid_h: int, grid_w: int) -> np.ndarray:
    """Mark grid cells whose anchor point (c*4, r*4) lies inside the quad."""
    cols, rows = np.meshgrid(np.arange(grid_w), np.arange(grid_h))
    return quad.contains_points(cols * STRIDE, rows * STRIDE)


def score_mask(annotation, image_size: int) -> np.ndarray:
    """Binary text/non-text map at feature resolution (shrunk-quad interiors)."""
    g = image_size // STRIDE
    mask = np.zeros((g, g), dtype=np.float64)
    for region in annotation.regions:
        mask = np.maximum(mask, rasterize_quad(region.quad().shrunk(SHRINK), g, g))
    return mask


def offset_targets(annotation, image_size: int):
    """Per-cell corner offsets and the positive mask they are defined on.

    Positive cells: anchors inside a region's shrunk quad. Each positive
    cell's 8 channels hold quad corner m minus the anchor, in pixels.
    """
    g = image_size // STRIDE
    offsets = np.zeros((g, g, 8), dtype=np.float64)
    pos = np.zeros((g, g), dtype=np.float64)
    for region in annotation.regions:
        quad = region.quad()
        cells = rasterize_quad(quad.shrunk(SHRINK), g, g)
        rows, cols = np.nonzero(cells)
        if len(rows) == 0:
            continue
        anchors = np.stack([cols * STRIDE, rows * STRIDE], axis=1).astype(np.float64)
        delta = quad.pts.reshape(1, 8) - np.tile(anchors, 4)
        offsets[rows, cols] = delta
        pos[rows, cols] = 1.0
    return offsets, pos
