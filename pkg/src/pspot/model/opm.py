"""Proposal-keyword matching head: joint embedding space and distance."""
from __future__ import annotations

from .. import autodiff as ad
from ..autodiff import Value
from .layers import Layer, Linear


class OpmHead(Layer):
    """Two bias-free projections into a shared space for states and characters."""

    def __init__(self, cfg, rng):
        self.project_state = Linear(cfg.dec_hidden, cfg.opm_dim, bias=False, rng=rng)
        self.project_char = Linear(cfg.emb_dim, cfg.opm_dim, bias=False, rng=rng)

    def distance(self, states: list[Value], char_embs: Value) -> Value:
        """Mean Euclidean distance between projected states and characters.

        states: T hidden vectors (1, dec_hidden); char_embs: (T, emb_dim).
        Exactly zero iff every projected pair coincides.
        """
        if len(states) != char_embs.shape[0]:
            raise ValueError(
                f"got {len(states)} states for {char_embs.shape[0]} characters")
        h = ad.concat(states, axis=0)
        u = self.project_state(h)
        v = self.project_char(char_embs)
        diff = u - v
        per_step = ad.sqrt(ad.sum_(diff * diff, axis=1))
        return ad.mean(per_step)
