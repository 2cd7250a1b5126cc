"""CNN-RNN sequence encoder and the attention GRU decoder."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Value
from . import vocab as V
from .layers import Conv2d, Embedding, GRUCell, Layer, Linear


@dataclass
class DecoderState:
    """One decoding step: hidden state, attention context, vocab scores."""

    h: Value          # (1, dec_hidden)
    context: Value    # (1, enc_dim)
    logits: Value     # (1, vocab)
    attention: Value  # (T_s, 1), sums to 1


class Encoder(Layer):
    """Collapses an 8x64 RoI to 16 columns, then runs a bidirectional GRU."""

    def __init__(self, cfg, rng):
        cin = cfg.backbone_channels[-1]
        ca, cb = cfg.encoder_channels
        self.conv1 = Conv2d(cin, ca, rng=rng)
        self.conv2 = Conv2d(ca, cb, rng=rng)
        self.conv3 = Conv2d(cb, cb, rng=rng)
        self.fwd = GRUCell(cb, cfg.enc_hidden, rng=rng)
        self.bwd = GRUCell(cb, cfg.enc_hidden, rng=rng)
        self.enc_hidden = cfg.enc_hidden
        self.seq_len = cfg.roi_max_width // 4

    def __call__(self, roi_feature: Value) -> Value:
        x = ad.relu(self.conv1(roi_feature))
        x = ad.max_pool2d(x)                   # 4 x 32
        x = ad.relu(self.conv2(x))
        x = ad.max_pool2d(x)                   # 2 x 16
        x = ad.relu(self.conv3(x))
        x = ad.max_pool2d(x, (2, 1))           # 1 x 16
        cols = ad.reshape(x, (x.shape[1], x.shape[2]))  # (T_s, cb)
        t_s = cols.shape[0]
        h = Value(np.zeros((1, self.enc_hidden)))
        fwd_states = []
        for t in range(t_s):
            h = self.fwd(ad.gather(cols, [t], axis=0), h)
            fwd_states.append(h)
        h = Value(np.zeros((1, self.enc_hidden)))
        bwd_states = [None] * t_s
        for t in reversed(range(t_s)):
            h = self.bwd(ad.gather(cols, [t], axis=0), h)
            bwd_states[t] = h
        fwd = ad.concat(fwd_states, axis=0)
        bwd = ad.concat(bwd_states, axis=0)
        return ad.concat([fwd, bwd], axis=1)   # (T_s, 2 * enc_hidden)


class AttentionDecoder(Layer):
    """Additive attention over the encoded sequence driving a GRU decoder.

    The character embedding table is shared with the proposal matcher.
    """

    def __init__(self, cfg, vocab_size, rng):
        enc_dim = 2 * cfg.enc_hidden
        self.embedding = Embedding(vocab_size, cfg.emb_dim, rng=rng)
        self.att_query = Linear(cfg.dec_hidden, cfg.att_dim, rng=rng)
        self.att_key = Linear(enc_dim, cfg.att_dim, bias=False, rng=rng)
        self.att_score = Linear(cfg.att_dim, 1, bias=False, rng=rng)
        self.gru = GRUCell(cfg.emb_dim + enc_dim, cfg.dec_hidden, rng=rng)
        self.out = Linear(cfg.dec_hidden + enc_dim, vocab_size, rng=rng)
        self.dec_hidden = cfg.dec_hidden

    def initial_state(self) -> Value:
        return Value(np.zeros((1, self.dec_hidden)))

    def keys(self, seq: Value) -> Value:
        return self.att_key(seq)

    def step(self, y_prev: int, h_prev: Value, seq: Value,
             keys: Value | None = None) -> DecoderState:
        if keys is None:
            keys = self.keys(seq)
        scores = self.att_score(ad.tanh(keys + self.att_query(h_prev)))
        weights = ad.softmax(scores, axis=0)               # (T_s, 1)
        context = ad.matmul(ad.transpose(weights), seq)    # (1, enc_dim)
        x = ad.concat([self.embedding([y_prev]), context], axis=1)
        h = self.gru(x, h_prev)
        logits = self.out(ad.concat([h, context], axis=1))
        return DecoderState(h=h, context=context, logits=logits, attention=weights)

    def teacher_forced(self, seq: Value, target_ids: list[int],
                       include_eos: bool = True):
        """Run with ground-truth inputs; returns (hidden states, mean NLL).

        States align with the targets: state t consumed target t-1 (BOS
        first) and is scored against target t. With include_eos the loss
        adds one final EOS step; the returned states still cover only the
        target characters.
        """
        keys = self.keys(seq)
        steps = list(target_ids) + ([V.EOS] if include_eos else [])
        inputs = [V.BOS] + list(target_ids)
        h = self.initial_state()
        states = []
        nlls = []
        for t, target in enumerate(steps):
            state = self.step(inputs[t], h, seq, keys=keys)
            h = state.h
            if t < len(target_ids):
                states.append(state.h)
            logp = ad.gather(ad.log_softmax(state.logits, axis=1), [target], axis=1)
            nlls.append(-logp)
        nll = ad.mean(ad.concat(nlls, axis=1))
        return states, nll

    def greedy(self, seq: Value, max_len: int) -> list[int]:
        """Argmax decoding from BOS until EOS or max_len steps."""
        keys = self.keys(seq)
        h = self.initial_state()
        y = V.BOS
        out = []
        with ad.no_grad():
            for _ in range(max_len):
                state = self.step(y, h, seq, keys=keys)
                h = state.h
                y = int(np.argmax(state.logits.data[0]))
                if y == V.EOS:
                    break
                out.append(y)
        return out
