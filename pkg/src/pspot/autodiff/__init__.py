"""Reverse-mode automatic differentiation over dense float64 arrays."""

from .engine import (
    NonScalarLoss,
    ShapeMismatch,
    Value,
    concat,
    const,
    conv2d,
    exp,
    gather,
    grad_enabled,
    log,
    log_softmax,
    matmul,
    max_pool2d,
    mean,
    munge_shape_error,
    no_grad,
    node,
    relu,
    reshape,
    sigmoid,
    softmax,
    sqrt,
    sum_,
    tanh,
    transpose,
)
from .optim import SGD, Adam, OptimizerState, clip_global_norm, zero_grads
from .checkpoint import BadCheckpoint, load_checkpoint, save_checkpoint

__all__ = [
    "Value",
    "ShapeMismatch",
    "NonScalarLoss",
    "const",
    "node",
    "no_grad",
    "grad_enabled",
    "munge_shape_error",
    "conv2d",
    "max_pool2d",
    "matmul",
    "sigmoid",
    "tanh",
    "relu",
    "exp",
    "log",
    "sqrt",
    "softmax",
    "log_softmax",
    "concat",
    "gather",
    "sum_",
    "mean",
    "reshape",
    "transpose",
    "Adam",
    "SGD",
    "OptimizerState",
    "clip_global_norm",
    "zero_grads",
    "save_checkpoint",
    "load_checkpoint",
    "BadCheckpoint",
]
