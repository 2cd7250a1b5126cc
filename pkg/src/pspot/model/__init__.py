"""The spotting model: shared backbone, detection branch, recognition branch,
and the online proposal-matching head."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from .. import font5x7
from ..autodiff import Value
from ..geom import Quadrangle
from . import vocab as vocab_mod
from .detector import (
    STRIDE,
    Backbone,
    BadImageShape,
    DegenerateQuad,
    DetectHead,
    DetectionOutput,
    Proposal,
    RoiFeature,
    decode_proposals,
    roi_transform,
)
from .layers import Layer
from .opm import OpmHead
from .recognizer import AttentionDecoder, DecoderState, Encoder
from .vocab import BOS, EOS, PAD, UnknownCharacter, Vocab

__all__ = [
    "ModelConfig",
    "TextSpotter",
    "Vocab",
    "UnknownCharacter",
    "BadImageShape",
    "DegenerateQuad",
    "DetectionOutput",
    "Proposal",
    "RoiFeature",
    "DecoderState",
    "decode_proposals",
    "BOS",
    "EOS",
    "PAD",
    "STRIDE",
]


@dataclass
class ModelConfig:
    """Architecture hyperparameters; fixed per run and echoed in checkpoints."""

    backbone_channels: tuple = (16, 32, 32, 32)
    encoder_channels: tuple = (48, 64)
    enc_hidden: int = 32
    dec_hidden: int = 64
    emb_dim: int = 32
    att_dim: int = 48
    opm_dim: int = 32
    roi_height: int = 8
    roi_max_width: int = 64
    loc_scale: float = 8.0
    max_text_len: int = 8
    alphabet: str = font5x7.ALPHABET

    def to_meta(self) -> dict:
        meta = dataclasses.asdict(self)
        meta["backbone_channels"] = list(self.backbone_channels)
        meta["encoder_channels"] = list(self.encoder_channels)
        return meta

    @classmethod
    def from_meta(cls, meta: dict) -> "ModelConfig":
        kwargs = dict(meta)
        kwargs["backbone_channels"] = tuple(kwargs["backbone_channels"])
        kwargs["encoder_channels"] = tuple(kwargs["encoder_channels"])
        return cls(**kwargs)


class TextSpotter(Layer):
    """End-to-end spotter over one image at a time.

    Inference methods run detached; the forward pieces used in training
    (backbone features, losses' inputs) stay differentiable.
    """

    def __init__(self, config: ModelConfig | None = None, seed: int = 0):
        self.config = config or ModelConfig()
        self.vocab = Vocab(self.config.alphabet)
        rng = np.random.default_rng([int(seed), 0x5054])  # model-init stream
        self.backbone = Backbone(self.config, rng)
        self.det_head = DetectHead(self.config, rng)
        self.encoder = Encoder(self.config, rng)
        self.decoder = AttentionDecoder(self.config, self.vocab.size, rng)
        self.opm = OpmHead(self.config, rng)

    # -- forward pieces -----------------------------------------------------

    def backbone_forward(self, image) -> Value:
        return self.backbone(image)

    def detect(self, feature: Value) -> DetectionOutput:
        return self.det_head(feature)

    def propose(self, feature: Value, score_thresh: float = 0.5,
                nms_thresh: float = 0.3) -> list[Proposal]:
        """Decode proposals from a detached detection pass over the feature."""
        with ad.no_grad():
            det = self.det_head(feature.detach() if feature.requires_grad else feature)
        return decode_proposals(det, score_thresh, nms_thresh)

    def roi(self, feature: Value, quad: Quadrangle) -> RoiFeature:
        return roi_transform(feature, quad, out_h=self.config.roi_height,
                             max_w=self.config.roi_max_width)

    def encode(self, roi_feature: RoiFeature) -> Value:
        return self.encoder(roi_feature.feature)

    def recognize(self, roi_feature: RoiFeature, max_len: int | None = None) -> str:
        seq = self.encode(roi_feature)
        ids = self.decoder.greedy(seq, max_len or self.config.max_text_len)
        return self.vocab.decode(ids)

    # -- proposal matching ----------------------------------------------------

    def opm_distance(self, seq: Value, keyword: str) -> Value:
        """Distance between a proposal's sequence features and a keyword."""
        if not keyword:
            raise ValueError("keyword must be non-empty")
        ids = self.vocab.encode(keyword)
        states, _ = self.decoder.teacher_forced(seq, ids, include_eos=False)
        embs = self.decoder.embedding(ids)
        return self.opm.distance(states, embs)

    def opm_match(self, feature: Value, proposals: list[Proposal], keyword: str,
                  tau: float):
        """Mask m(i) = 1 iff the keyword distance is at most tau.

        Returns (mask, distances); both align with the proposals list.
        """
        mask, distances = [], []
        with ad.no_grad():
            for prop in proposals:
                seq = self.encode(self.roi(feature, prop.quad))
                d = self.opm_distance(seq, keyword).item()
                distances.append(d)
                mask.append(1 if d <= tau else 0)
        return mask, distances

    # -- whole-image inference -------------------------------------------------

    def spot(self, image, score_thresh: float = 0.5, nms_thresh: float = 0.3,
             max_len: int | None = None):
        """Detect and read every region: list of (quad, score, text)."""
        with ad.no_grad():
            feature = self.backbone_forward(image)
            proposals = self.propose(feature, score_thresh, nms_thresh)
            out = []
            for prop in proposals:
                try:
                    roi_feat = self.roi(feature, prop.quad)
                except DegenerateQuad:
                    continue
                out.append((prop.quad, prop.score, self.recognize(roi_feat, max_len)))
        return out

    # -- persistence -------------------------------------------------------------

    def save(self, path, optimizer_state=None, extra_meta: dict | None = None):
        meta = {"model": self.config.to_meta()}
        if extra_meta:
            meta.update(extra_meta)
        params = {k: v.data for k, v in self.named_params().items()}
        ad.save_checkpoint(path, params, optimizer_state, meta)

    @classmethod
    def load(cls, path) -> "TextSpotter":
        params, _, meta = ad.load_checkpoint(path)
        spotter = cls(ModelConfig.from_meta(meta["model"]))
        spotter.load_params(params)
        return spotter
