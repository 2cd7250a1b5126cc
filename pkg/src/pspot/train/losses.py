"""Training losses for the detection, recognition, and matching branches."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import ShapeMismatch, Value


class EmptyBatch(ValueError):
    """Pairwise matching loss needs at least one sample."""


@dataclass
class LossBundle:
    """Logged scalars for one optimizer step."""

    l_cls: float = 0.0
    l_loc: float = 0.0
    l_det: float = 0.0
    l_recog: float = 0.0
    l_opm: float = 0.0
    l_weak: float = 0.0
    l_total: float = 0.0
    lam: float = 0.01
    beta: float = 0.02

    FIELDS = ("l_cls", "l_loc", "l_det", "l_recog", "l_opm", "l_weak", "l_total")

    def row(self) -> list[float]:
        return [getattr(self, f) for f in self.FIELDS]


def dice_loss(pred, gt, eps: float = 1e-6) -> Value:
    """1 - Dice overlap between a predicted score map and a binary mask."""
    pred = ad.const(pred)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeMismatch("dice_loss", pred.shape, gt.shape)
    inter = ad.sum_(pred * gt)
    total = ad.sum_(pred) + float(gt.sum())
    return 1.0 - (2.0 * inter + eps) / (total + eps)


def smooth_l1_loss(pred, gt, pos_mask, scale: float = 1.0) -> Value:
    """Huber-style offset regression averaged over masked elements.

    The difference is normalized by ``scale`` before the 0.5x^2 / |x|-0.5
    branch; the mask marks positive locations and broadcasts over trailing
    channel dims. An empty mask yields exactly 0.
    """
    pred = ad.const(pred)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeMismatch("smooth_l1_loss", pred.shape, gt.shape)
    mask = np.asarray(pos_mask, dtype=np.float64)
    mask3 = np.broadcast_to(mask.reshape(mask.shape + (1,) * (pred.ndim - mask.ndim)),
                            pred.shape)
    denom = float(mask3.sum())
    if denom == 0.0:
        return Value(0.0)
    diff = (pred - gt) * (1.0 / scale)
    near = (np.abs(diff.data) < 1.0).astype(np.float64)
    sign = np.sign(diff.data)
    huber = near * (0.5 * diff * diff) + (1.0 - near) * (diff * sign - 0.5)
    return ad.sum_(huber * mask3) * (1.0 / denom)


def detection_loss(cls_loss, loc_loss, lam: float) -> Value:
    """Location term plus lambda-weighted classification term."""
    return ad.const(loc_loss) + float(lam) * ad.const(cls_loss)


def mean_of(terms) -> Value:
    """Mean of scalar terms as a graph node; 0 for an empty list."""
    terms = [ad.const(t) for t in terms]
    if not terms:
        return Value(0.0)
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total * (1.0 / len(terms))


def recognition_loss(per_proposal_nll) -> Value:
    """Mean of the per-proposal mean NLLs; 0 for an empty list."""
    return mean_of(per_proposal_nll)


def opm_pairwise_loss(distances, labels) -> Value:
    """Mean squared pairwise score: d for positives, max(0, 1-d) for negatives."""
    distances = list(distances)
    labels = list(labels)
    if not distances or len(distances) != len(labels):
        raise EmptyBatch(f"need matched non-empty lists, got {len(distances)} "
                         f"distances and {len(labels)} labels")
    total = None
    for d, positive in zip(distances, labels):
        d = ad.const(d)
        s = d if positive else ad.relu(1.0 - d)
        term = s * s
        total = term if total is None else total + term
    return total * (1.0 / len(distances))


def weak_recognition_loss(matched, per_proposal_nll) -> Value:
    """Masked mean of keyword NLLs; defined as 0 when nothing matched."""
    matched = [int(m) for m in matched]
    count = sum(matched)
    if count == 0:
        return Value(0.0)
    total = None
    for m, nll in zip(matched, per_proposal_nll):
        if not m:
            continue
        nll = ad.const(nll)
        total = nll if total is None else total + nll
    return total * (1.0 / count)


def total_loss(l_det, l_recog, l_weak, beta: float) -> Value:
    """Joint objective: detection plus beta-weighted recognition terms."""
    return ad.const(l_det) + float(beta) * (ad.const(l_recog) + ad.const(l_weak))
