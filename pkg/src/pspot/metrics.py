"""Benchmark metrics: detection P/R/F at IoU 0.5, exact-match end-to-end F,
average edit distance, and threshold sweeps for the proposal matcher."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geom


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance over characters."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def match_pairs(preds, gts, iou_thresh: float = 0.5):
    """Greedy one-to-one matching by descending IoU (strictly above threshold).

    preds/gts are Quadrangle lists; returns (pred_idx, gt_idx, iou) triples.
    Ties break on lower pred index, then lower gt index, for determinism.
    """
    candidates = []
    for pi, p in enumerate(preds):
        for gi, g in enumerate(gts):
            ov = geom.iou(p, g)
            if ov > iou_thresh:
                candidates.append((ov, pi, gi))
    candidates.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_p, used_g = set(), set()
    matches = []
    for ov, pi, gi in candidates:
        if pi in used_p or gi in used_g:
            continue
        used_p.add(pi)
        used_g.add(gi)
        matches.append((pi, gi, ov))
    return matches


def _prf(tp: int, n_pred: int, n_gt: int) -> dict:
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gt if n_gt else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"R": recall, "P": precision, "F": f}


def detection_prf(preds_per_image, gts_per_image, iou_thresh: float = 0.5) -> dict:
    """Micro-averaged detection precision/recall/F over the dataset."""
    tp = n_pred = n_gt = 0
    for preds, gts in zip(preds_per_image, gts_per_image):
        tp += len(match_pairs(preds, gts, iou_thresh))
        n_pred += len(preds)
        n_gt += len(gts)
    return _prf(tp, n_pred, n_gt)


def e2e_exact_match(preds_per_image, gts_per_image, iou_thresh: float = 0.5) -> dict:
    """End-to-end P/R/F: a true positive needs a match and edit distance 0.

    Items are (Quadrangle, text) pairs.
    """
    tp = n_pred = n_gt = 0
    for preds, gts in zip(preds_per_image, gts_per_image):
        quads_p = [q for q, _ in preds]
        quads_g = [q for q, _ in gts]
        for pi, gi, _ in match_pairs(quads_p, quads_g, iou_thresh):
            if levenshtein(preds[pi][1], gts[gi][1]) == 0:
                tp += 1
        n_pred += len(preds)
        n_gt += len(gts)
    return _prf(tp, n_pred, n_gt)


def image_edit_cost(preds, gts, iou_thresh: float = 0.5) -> int:
    """Matched pairs cost their edit distance; unmatched items cost their length."""
    quads_p = [q for q, _ in preds]
    quads_g = [q for q, _ in gts]
    matches = match_pairs(quads_p, quads_g, iou_thresh)
    cost = sum(levenshtein(preds[pi][1], gts[gi][1]) for pi, gi, _ in matches)
    matched_p = {pi for pi, _, _ in matches}
    matched_g = {gi for _, gi, _ in matches}
    cost += sum(len(t) for i, (_, t) in enumerate(preds) if i not in matched_p)
    cost += sum(len(t) for i, (_, t) in enumerate(gts) if i not in matched_g)
    return cost


def aed(preds_per_image, gts_per_image, iou_thresh: float = 0.5) -> float:
    """Mean per-image edit cost; lower is better. Empty dataset gives 0."""
    images = list(zip(preds_per_image, gts_per_image))
    if not images:
        return 0.0
    return sum(image_edit_cost(p, g, iou_thresh) for p, g in images) / len(images)


def normalized_score(preds_per_image, gts_per_image, iou_thresh: float = 0.5) -> float:
    """Informational only: 1 - total edit cost / total ground-truth characters."""
    total_cost = sum(image_edit_cost(p, g, iou_thresh)
                     for p, g in zip(preds_per_image, gts_per_image))
    total_chars = sum(len(t) for gts in gts_per_image for _, t in gts)
    if total_chars == 0:
        return 0.0
    return 1.0 - total_cost / total_chars


@dataclass
class EvalReport:
    """Dataset-level metrics plus one row per image."""

    detection: dict
    end2end: dict
    aed: float
    norm: float
    per_image: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def lines(self) -> list[str]:
        d, e = self.detection, self.end2end
        return [
            f"detection  R {d['R']:.4f}  P {d['P']:.4f}  F {d['F']:.4f}",
            f"end-to-end R {e['R']:.4f}  P {e['P']:.4f}  F {e['F']:.4f}",
            f"AED {self.aed:.4f}   norm {self.norm:.4f}",
        ]


def evaluate(preds_per_image, gts_per_image, image_ids=None,
             iou_thresh: float = 0.5, meta: dict | None = None) -> EvalReport:
    """Full report over (quad, text) predictions and ground truths."""
    quads_p = [[q for q, _ in preds] for preds in preds_per_image]
    quads_g = [[q for q, _ in gts] for gts in gts_per_image]
    detection = detection_prf(quads_p, quads_g, iou_thresh)
    end2end = e2e_exact_match(preds_per_image, gts_per_image, iou_thresh)
    rows = []
    ids = image_ids or [str(i) for i in range(len(preds_per_image))]
    for img, preds, gts in zip(ids, preds_per_image, gts_per_image):
        matches = match_pairs([q for q, _ in preds], [q for q, _ in gts], iou_thresh)
        exact = sum(1 for pi, gi, _ in matches
                    if levenshtein(preds[pi][1], gts[gi][1]) == 0)
        rows.append({"image": img, "n_pred": len(preds), "n_gt": len(gts),
                     "matched": len(matches), "exact": exact,
                     "edit_cost": image_edit_cost(preds, gts, iou_thresh)})
    return EvalReport(detection=detection, end2end=end2end,
                      aed=aed(preds_per_image, gts_per_image, iou_thresh),
                      norm=normalized_score(preds_per_image, gts_per_image, iou_thresh),
                      per_image=rows, meta=meta or {})


def keyword_instances(full_annotation, keyword: str):
    """Oracle regions of one keyword inside a fully annotated image."""
    return [r.quad() for r in full_annotation.regions if r.text == keyword]


def opm_sweep_points(distance_rows, taus, iou_thresh: float = 0.5):
    """Recall/precision of the matcher across thresholds.

    distance_rows: one row per (image, keyword) holding 'distances' (matcher
    distance per proposal) and 'iou' (proposal x oracle-region IoU table).
    A matched proposal (d <= tau) is correct when it covers some oracle
    region at IoU >= iou_thresh; an instance is recalled when some matched
    proposal covers it. Returns one {'tau', 'R', 'P'} dict per tau.
    """
    out = []
    for tau in taus:
        matched = correct = recalled = total_instances = 0
        for row in distance_rows:
            n_regions = int(row["n_instances"])
            iou_table = np.asarray(row["iou"], dtype=np.float64).reshape(-1, n_regions)
            sel = [i for i, d in enumerate(row["distances"]) if d <= tau]
            matched += len(sel)
            total_instances += n_regions
            if sel:
                covered = iou_table[sel] >= iou_thresh
                correct += int(covered.any(axis=1).sum())
                recalled += int(covered.any(axis=0).sum())
        out.append({"tau": float(tau),
                    "R": recalled / total_instances if total_instances else 0.0,
                    "P": correct / matched if matched else 0.0})
    return out


def opm_distance_rows(model, weak_samples, oracle_by_image, cfg) -> list[dict]:
    """Measure matcher distances against oracle keyword regions.

    weak_samples carry keywords; oracle_by_image maps image id to its full
    annotation (the generator guarantees every keyword's region exists).
    """
    from . import autodiff as ad
    from .train.pipeline import _capped_proposals

    rows = []
    with ad.no_grad():
        for sample in weak_samples:
            feature = model.backbone_forward(sample.model_input)
            proposals = _capped_proposals(model, feature, cfg)
            oracle = oracle_by_image[sample.image_id]
            seqs = [model.encode(model.roi(feature, prop.quad))
                    for prop in proposals]
            for keyword in sample.keywords:
                regions = keyword_instances(oracle, keyword)
                if not regions:
                    continue
                distances = [model.opm_distance(seq, keyword).item() for seq in seqs]
                iou_table = [[geom.iou(prop.quad, quad) for quad in regions]
                             for prop in proposals]
                rows.append({"image": sample.image_id, "keyword": keyword,
                             "distances": distances, "iou": iou_table,
                             "n_instances": len(regions)})
    return rows
