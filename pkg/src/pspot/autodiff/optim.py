"""Parameter updates: Adam with bias correction, plain SGD, gradient clipping."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import Value


@dataclass
class OptimizerState:
    """Serializable optimizer internals (moments keyed by parameter name)."""

    algo: str
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def zero_grads(params: dict[str, Value]):
    for p in params.values():
        p.grad = None


def clip_global_norm(params: dict[str, Value], max_norm: float) -> float:
    """Rescale all gradients so their joint L2 norm is at most max_norm."""
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= scale
    return norm


class Adam:
    """Adam with bias correction; grads are zeroed after each step."""

    def __init__(self, params: dict[str, Value], lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = dict(params)
        self.state = OptimizerState("adam", lr, beta1, beta2, eps)
        for name, p in self.params.items():
            self.state.m[name] = np.zeros_like(p.data)
            self.state.v[name] = np.zeros_like(p.data)

    def step(self):
        s = self.state
        s.step_count += 1
        b1t = 1.0 - s.beta1 ** s.step_count
        b2t = 1.0 - s.beta2 ** s.step_count
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            m = s.m[name]
            v = s.v[name]
            m *= s.beta1
            m += (1.0 - s.beta1) * g
            v *= s.beta2
            v += (1.0 - s.beta2) * g * g
            p.data -= s.lr * (m / b1t) / (np.sqrt(v / b2t) + s.eps)
            p.grad = None

    def load_state(self, state: OptimizerState):
        missing = set(self.params) - set(state.m)
        if missing:
            raise KeyError(f"optimizer state missing moments for {sorted(missing)}")
        self.state = state


class SGD:
    """Plain p <- p - lr * grad; grads zeroed after the step."""

    def __init__(self, params: dict[str, Value], lr=1e-4):
        self.params = dict(params)
        self.state = OptimizerState("sgd", lr)

    def step(self):
        self.state.step_count += 1
        for p in self.params.values():
            if p.grad is not None:
                p.data -= self.state.lr * p.grad
            p.grad = None
