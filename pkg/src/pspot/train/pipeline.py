"""Training loops: fully supervised, matcher-only stage one, and joint stage two."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from .. import data as data_mod
from ..autodiff import Value
from ..model import TextSpotter
from . import targets
from .losses import (
    LossBundle,
    detection_loss,
    dice_loss,
    mean_of,
    opm_pairwise_loss,
    recognition_loss,
    smooth_l1_loss,
    total_loss,
    weak_recognition_loss,
)
from .pseudo import make_pseudo_weak_sample


class MissingCheckpoint(FileNotFoundError):
    """A stage that needs pretrained weights was started without them."""


@dataclass
class FullSample:
    """One fully annotated image prepared for training."""

    image_id: str
    model_input: np.ndarray
    annotation: object
    mask: np.ndarray = None
    offsets: np.ndarray = None
    pos: np.ndarray = None
    regions: list = field(default_factory=list)  # (Quadrangle, target ids)


@dataclass
class WeakSample:
    image_id: str
    model_input: np.ndarray
    keywords: list


def prepare_full_sample(image_id, gray, annotation, vocab) -> FullSample:
    size = gray.shape[0]
    offsets, pos = targets.offset_targets(annotation, size)
    regions = [(r.quad().canonical(), vocab.encode(r.text))
               for r in annotation.regions]
    return FullSample(image_id=image_id,
                      model_input=data_mod.to_model_input(gray),
                      annotation=annotation,
                      mask=targets.score_mask(annotation, size),
                      offsets=offsets, pos=pos, regions=regions)


def load_full_samples(dataset_dir, vocab, limit=None) -> list[FullSample]:
    anns = data_mod.load_full_annotations(os.path.join(str(dataset_dir), "full.jsonl"))
    if limit is not None:
        anns = anns[:limit]
    return [prepare_full_sample(a.image, data_mod.load_image(dataset_dir, a.image),
                                a, vocab) for a in anns]


def load_weak_samples(dataset_dir, limit=None) -> list[WeakSample]:
    anns = data_mod.load_weak_annotations(os.path.join(str(dataset_dir), "weak.jsonl"))
    if limit is not None:
        anns = anns[:limit]
    return [WeakSample(image_id=a.image,
                       model_input=data_mod.to_model_input(
                           data_mod.load_image(dataset_dir, a.image)),
                       keywords=list(a.keywords)) for a in anns]


def _joint_params(model: TextSpotter, update_opm: bool):
    params = model.named_params()
    if not update_opm:
        params = {k: v for k, v in params.items() if not k.startswith("opm.")}
    return params


def _capped_proposals(model, feature, cfg):
    props = model.propose(feature, cfg.score_thresh, cfg.nms_thresh)
    props.sort(key=lambda p: (-p.score, p.index))
    return props[:cfg.max_proposals]


def full_batch_terms(model: TextSpotter, batch, cfg):
    """Detection and recognition loss terms for one fully annotated batch."""
    cls_terms, loc_terms, nlls = [], [], []
    for sample in batch:
        feature = model.backbone_forward(sample.model_input)
        det = model.detect(feature)
        cls_terms.append(dice_loss(det.score, sample.mask))
        loc_terms.append(smooth_l1_loss(det.offsets, sample.offsets, sample.pos,
                                        scale=model.config.loc_scale))
        for quad, ids in sample.regions:
            seq = model.encode(model.roi(feature, quad))
            _, nll = model.decoder.teacher_forced(seq, ids, include_eos=True)
            nlls.append(nll)
    l_cls = mean_of(cls_terms)
    l_loc = mean_of(loc_terms)
    l_recog = recognition_loss(nlls)
    return l_cls, l_loc, l_recog


def weak_image_loss(model: TextSpotter, sample: WeakSample, keyword: str, cfg):
    """Masked keyword NLL for one weakly labeled image (Value, n_matched)."""
    feature = model.backbone_forward(sample.model_input)
    proposals = _capped_proposals(model, feature, cfg)
    if not proposals:
        return Value(0.0), 0
    mask, _ = model.opm_match(feature, proposals, keyword, cfg.tau)
    if sum(mask) == 0:
        return Value(0.0), 0
    ids = model.vocab.encode(keyword)
    nlls = []
    for m, prop in zip(mask, proposals):
        if not m:
            nlls.append(Value(0.0))
            continue
        seq = model.encode(model.roi(feature, prop.quad))
        _, nll = model.decoder.teacher_forced(seq, ids, include_eos=False)
        nlls.append(nll)
    return weak_recognition_loss(mask, nlls), sum(mask)


def run_joint_steps(model: TextSpotter, cfg, full_samples, weak_samples):
    """The shared optimizer loop behind the fully supervised and joint stages.

    With an empty weak stream no weak batch is drawn and no weak RNG is
    consumed, so the loss trace equals the fully supervised one bit for bit.
    """
    if not full_samples:
        raise ValueError("need at least one fully annotated sample")
    weak_active = bool(weak_samples)
    params = _joint_params(model, cfg.update_opm)
    opt = ad.Adam(params, lr=cfg.lr)
    rng = np.random.default_rng([cfg.seed, 0x5354])
    round_robin: dict[str, int] = {}
    rows = []
    for _ in range(cfg.steps):
        idx = rng.integers(0, len(full_samples), size=cfg.batch_full)
        batch = [full_samples[int(i)] for i in idx]
        l_cls, l_loc, l_recog = full_batch_terms(model, batch, cfg)
        l_det = detection_loss(l_cls, l_loc, cfg.lam)
        if weak_active:
            widx = rng.integers(0, len(weak_samples), size=cfg.batch_weak)
            terms = []
            for i in widx:
                sample = weak_samples[int(i)]
                turn = round_robin.get(sample.image_id, 0)
                round_robin[sample.image_id] = turn + 1
                keyword = sample.keywords[turn % len(sample.keywords)]
                term, _ = weak_image_loss(model, sample, keyword, cfg)
                terms.append(term)
            l_weak = mean_of(terms)  # images with no match contribute 0
        else:
            l_weak = Value(0.0)
        l_total = total_loss(l_det, l_recog, l_weak, cfg.beta)
        ad.zero_grads(params)
        l_total.backward()
        ad.clip_global_norm(params, cfg.clip_norm)
        opt.step()
        rows.append(LossBundle(l_cls=l_cls.item(), l_loc=l_loc.item(),
                               l_det=l_det.item(), l_recog=l_recog.item(),
                               l_opm=0.0, l_weak=l_weak.item(),
                               l_total=l_total.item(), lam=cfg.lam, beta=cfg.beta))
    return rows


def train_stage_full(model: TextSpotter, cfg, full_samples):
    """Fully supervised training (the joint loop with no weak stream)."""
    return run_joint_steps(model, cfg, full_samples, weak_samples=None)


def train_stage_two(model: TextSpotter, cfg, full_samples, weak_samples):
    """Joint training over both streams; reduces to stage-full when weak is empty."""
    return run_joint_steps(model, cfg, full_samples, weak_samples)


def pseudo_weak_distances(model: TextSpotter, sample: FullSample, cfg, rng):
    """Matcher distances and labels for one pseudo-weak sample.

    Sequence features and decoder states are computed detached; only the
    matcher projections see gradients. Returns None when the detector
    produced no proposals for the image.
    """
    with ad.no_grad():
        feature = model.backbone_forward(sample.model_input)
        proposals = _capped_proposals(model, feature, cfg)
    if not proposals:
        return None
    ps = make_pseudo_weak_sample(sample.annotation, proposals, rng)
    ids = model.vocab.encode(ps.keyword)
    distances, labels = [], []
    for quad, positive in ([(q, True) for q in ps.positives]
                           + [(p.quad, False) for p in ps.negatives]):
        with ad.no_grad():
            seq = model.encode(model.roi(feature, quad))
            states, _ = model.decoder.teacher_forced(seq, ids, include_eos=False)
            embs = model.decoder.embedding(ids)
        distances.append(model.opm.distance(states, embs))
        labels.append(positive)
    return distances, labels


def train_stage_one(model: TextSpotter, cfg, full_samples):
    """Fit only the matcher projections on pseudo-weak samples."""
    if not full_samples:
        raise ValueError("need at least one fully annotated sample")
    params = {k: v for k, v in model.named_params().items() if k.startswith("opm.")}
    opt = ad.Adam(params, lr=cfg.lr)
    rng = np.random.default_rng([cfg.seed, 0x0951])
    rows = []
    for _ in range(cfg.steps):
        idx = rng.integers(0, len(full_samples), size=cfg.batch_full)
        terms = []
        for i in idx:
            pair = pseudo_weak_distances(model, full_samples[int(i)], cfg, rng)
            if pair is None:
                continue
            terms.append(opm_pairwise_loss(*pair))
        if terms:
            l_opm = mean_of(terms)
            ad.zero_grads(params)
            l_opm.backward()
            ad.clip_global_norm(params, cfg.clip_norm)
            opt.step()
            value = l_opm.item()
        else:
            value = 0.0
        rows.append(LossBundle(l_opm=value, l_total=value, lam=cfg.lam, beta=cfg.beta))
    return rows


def opm_heldout_loss(model: TextSpotter, cfg, samples, seed: int = 0) -> float:
    """Mean pairwise matcher loss over fixed pseudo-weak samples (no grads)."""
    rng = np.random.default_rng([seed, 0x0E5A])
    total, count = 0.0, 0
    with ad.no_grad():
        for sample in samples:
            pair = pseudo_weak_distances(model, sample, cfg, rng)
            if pair is None:
                continue
            total += opm_pairwise_loss(*pair).item()
            count += 1
    return total / count if count else 0.0
