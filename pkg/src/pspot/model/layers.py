"""Parameter-bearing building blocks and the named-parameter walk."""
from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Value


def uniform_init(rng, shape, fan_in, fan_out) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    """Base with a recursive walk over Value parameters and sub-layers."""

    def named_params(self, prefix: str = "") -> dict[str, Value]:
        out: dict[str, Value] = {}
        for key, val in vars(self).items():
            if isinstance(val, Value):
                if val.requires_grad:
                    out[prefix + key] = val
            elif isinstance(val, Layer):
                out.update(val.named_params(f"{prefix}{key}."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Layer):
                        out.update(item.named_params(f"{prefix}{key}.{i}."))
        return out

    def load_params(self, arrays: dict[str, np.ndarray], prefix: str = ""):
        for name, param in self.named_params(prefix).items():
            if name not in arrays:
                raise KeyError(f"checkpoint missing parameter {name!r}")
            src = arrays[name]
            if src.shape != param.data.shape:
                raise ValueError(f"{name}: shape {src.shape} != {param.data.shape}")
            param.data[...] = src


class Conv2d(Layer):
    def __init__(self, cin, cout, k=3, stride=1, padding="same", rng=None):
        fan = k * k
        self.kernel = Value(uniform_init(rng, (k, k, cin, cout), fan * cin, fan * cout),
                            requires_grad=True)
        self.bias = Value(np.zeros(cout), requires_grad=True)
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return ad.conv2d(x, self.kernel, bias=self.bias,
                         stride=self.stride, padding=self.padding)


class Linear(Layer):
    def __init__(self, din, dout, bias=True, rng=None):
        self.weight = Value(uniform_init(rng, (din, dout), din, dout), requires_grad=True)
        self.bias = Value(np.zeros(dout), requires_grad=True) if bias else None

    def __call__(self, x):
        out = ad.matmul(x, self.weight)
        if self.bias is not None:
            out = out + self.bias
        return out


class Embedding(Layer):
    def __init__(self, vocab_size, dim, rng=None):
        self.table = Value(uniform_init(rng, (vocab_size, dim), vocab_size, dim),
                           requires_grad=True)

    def __call__(self, ids):
        return ad.gather(self.table, ids, axis=0)


class GRUCell(Layer):
    """Gated recurrent unit, h_t = z*h + (1-z)*n with update bias started at +1."""

    def __init__(self, din, dh, rng=None):
        def w():
            return Value(uniform_init(rng, (din, dh), din, dh), requires_grad=True)

        def u():
            return Value(uniform_init(rng, (dh, dh), dh, dh), requires_grad=True)

        self.wz, self.uz = w(), u()
        self.bz = Value(np.ones(dh), requires_grad=True)  # bias toward carrying state
        self.wr, self.ur = w(), u()
        self.br = Value(np.zeros(dh), requires_grad=True)
        self.wn, self.un = w(), u()
        self.bn = Value(np.zeros(dh), requires_grad=True)

    def __call__(self, x, h):
        z = ad.sigmoid(ad.matmul(x, self.wz) + ad.matmul(h, self.uz) + self.bz)
        r = ad.sigmoid(ad.matmul(x, self.wr) + ad.matmul(h, self.ur) + self.br)
        n = ad.tanh(ad.matmul(x, self.wn) + r * ad.matmul(h, self.un) + self.bn)
        return z * h + (1.0 - z) * n
