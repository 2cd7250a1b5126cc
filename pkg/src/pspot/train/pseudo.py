"""Pseudo weakly-labeled samples built from fully annotated images."""
from __future__ import annotations

from dataclasses import dataclass

from .. import geom


class NoRegions(ValueError):
    """Cannot build a pseudo-weak sample from an empty annotation."""


@dataclass
class PseudoWeakSample:
    """Keyword plus its ground-truth regions and clearly-wrong proposals.

    Proposals that overlap a positive at IoU >= 0.5 without being the ground
    truth are dropped from both sets: punishing near-duplicates as negatives
    would fight the matcher.
    """

    image: str
    keyword: str
    positives: list   # ground-truth Quadrangles carrying the keyword
    negatives: list   # detector Proposals with IoU < 0.5 against every positive


def make_pseudo_weak_sample(annotation, proposals, rng) -> PseudoWeakSample:
    """Pick a keyword region uniformly and split proposals around it.

    ``proposals`` are the detector's outputs for this image. All regions
    whose text equals the chosen keyword count as positives.
    """
    if not annotation.regions:
        raise NoRegions(f"annotation {annotation.image!r} has no regions")
    pick = int(rng.integers(len(annotation.regions)))
    keyword = annotation.regions[pick].text
    positives = [r.quad() for r in annotation.regions if r.text == keyword]
    negatives = [p for p in proposals
                 if all(geom.iou(p.quad, q) < 0.5 for q in positives)]
    return PseudoWeakSample(image=annotation.image, keyword=keyword,
                            positives=positives, negatives=negatives)
