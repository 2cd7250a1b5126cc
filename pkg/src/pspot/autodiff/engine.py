"""Computation graph: Value nodes, forward operators, and the backward pass.

All payloads are float64 numpy arrays. Graphs are built eagerly; calling
``backward()`` on a scalar Value populates ``grad`` on every reachable node
that has ``requires_grad`` set, accumulating additively when a node feeds
several consumers.
"""
from __future__ import annotations

import contextlib

import numpy as np


class ShapeMismatch(ValueError):
    """Operands cannot be combined; carries both shapes."""

    def __init__(self, op: str, a, b):
        super().__init__(f"{op}: incompatible shapes {tuple(a)} and {tuple(b)}")
        self.shapes = (tuple(a), tuple(b))


class NonScalarLoss(ValueError):
    """backward() requires a scalar root."""


def munge_shape_error(op, a_shape, b_shape):
    """Validate broadcast compatibility, raising ShapeMismatch on failure."""
    try:
        return np.broadcast_shapes(a_shape, b_shape)
    except ValueError:
        raise ShapeMismatch(op, a_shape, b_shape) from None


_GRAD_ENABLED = True


def grad_enabled() -> bool:
    return _GRAD_ENABLED


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (inference mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Value:
    """A node in the computation graph: payload, gradient slot, parents."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Value":
        return Value(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = self.name or "Value"
        return f"<{tag} shape={self.data.shape} requires_grad={self.requires_grad}>"

    # -- operator sugar ----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        return pow_(self, k)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self):
        """Reverse-accumulate gradients of this scalar into the graph."""
        if self.size != 1:
            raise NonScalarLoss(f"loss must be scalar, got shape {self.shape}")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node_ in reversed(order):
            if node_._backward is None:
                continue
            grads = node_._backward(node_.grad)
            for parent, g in zip(node_._parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += g


def _toposort(root):
    # iterative DFS; graphs can be thousands of nodes deep
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node_, expanded = stack.pop()
        if expanded:
            order.append(node_)
            continue
        if id(node_) in visited:
            continue
        visited.add(id(node_))
        stack.append((node_, True))
        for p in node_._parents:
            if id(p) not in visited:
                stack.append((p, False))
    return order


def const(x) -> Value:
    """Wrap an array or scalar as a non-differentiable Value."""
    return x if isinstance(x, Value) else Value(x)


def node(data, parents, backward) -> Value:
    """Build an op result: attaches the backward rule when grads are live.

    ``backward(out_grad)`` must return one gradient (or None) per parent.
    This is the extension point other modules use to define custom ops.
    """
    parents = tuple(const(p) for p in parents)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out = Value(data, requires_grad=True)
        out._parents = parents
        out._backward = backward
        return out
    return Value(data)


def _unbroadcast(g, shape):
    # sum gradient over axes that were broadcast in the forward op
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise -----------------------------------------------------------

def add(a, b):
    a, b = const(a), const(b)
    munge_shape_error("add", a.shape, b.shape)
    return node(a.data + b.data, (a, b),
                lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = const(a), const(b)
    munge_shape_error("sub", a.shape, b.shape)
    return node(a.data - b.data, (a, b),
                lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = const(a), const(b)
    munge_shape_error("mul", a.shape, b.shape)
    return node(a.data * b.data, (a, b),
                lambda g: (_unbroadcast(g * b.data, a.shape),
                           _unbroadcast(g * a.data, b.shape)))


def div(a, b):
    a, b = const(a), const(b)
    munge_shape_error("div", a.shape, b.shape)
    out = a.data / b.data
    return node(out, (a, b),
                lambda g: (_unbroadcast(g / b.data, a.shape),
                           _unbroadcast(-g * out / b.data, b.shape)))


def neg(a):
    a = const(a)
    return node(-a.data, (a,), lambda g: (-g,))


def pow_(a, k):
    a = const(a)
    k = float(k)
    return node(a.data ** k, (a,), lambda g: (g * k * a.data ** (k - 1.0),))


def sigmoid(a):
    a = const(a)
    out = 1.0 / (1.0 + np.exp(-a.data))
    return node(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a):
    a = const(a)
    out = np.tanh(a.data)
    return node(out, (a,), lambda g: (g * (1.0 - out * out),))


def relu(a):
    a = const(a)
    mask = a.data > 0
    return node(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def exp(a):
    a = const(a)
    out = np.exp(a.data)
    return node(out, (a,), lambda g: (g * out,))


def log(a):
    a = const(a)
    return node(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a):
    """Square root with subgradient 0 at 0 (keeps exact zeros exact)."""
    a = const(a)
    out = np.sqrt(a.data)
    safe = np.where(out > 0.0, out, 1.0)
    return node(out, (a,), lambda g: (g * np.where(out > 0.0, 0.5 / safe, 0.0),))


# -- linear algebra ---------------------------------------------------------

def matmul(a, b):
    a, b = const(a), const(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch("matmul", a.shape, b.shape)
    return node(a.data @ b.data, (a, b),
                lambda g: (g @ b.data.T, a.data.T @ g))


# -- reductions and structure ------------------------------------------------

def sum_(a, axis=None, keepdims=False):
    a = const(a)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return node(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a, axis=None, keepdims=False):
    a = const(a)
    n = a.size if axis is None else a.shape[axis]
    return sum_(a, axis=axis, keepdims=keepdims) * (1.0 / n)


def reshape(a, shape):
    a = const(a)
    return node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes=None):
    a = const(a)
    perm = tuple(axes) if axes is not None else tuple(reversed(range(a.ndim)))
    inv = tuple(np.argsort(perm))
    return node(a.data.transpose(perm), (a,), lambda g: (g.transpose(inv),))


def concat(values, axis=0):
    values = [const(v) for v in values]
    sizes = [v.shape[axis] for v in values]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(np.take(g, range(offsets[i], offsets[i + 1]), axis=axis)
                     for i in range(len(values)))

    return node(np.concatenate([v.data for v in values], axis=axis), tuple(values), backward)


def gather(a, indices, axis=0):
    """Integer row/column selection along one axis; backward scatter-adds."""
    a = const(a)
    idx = np.asarray(indices, dtype=np.intp)

    def backward(g):
        gx = np.zeros_like(a.data)
        np.add.at(np.moveaxis(gx, axis, 0), idx, np.moveaxis(g, axis, 0))
        return (gx,)

    return node(np.take(a.data, idx, axis=axis), (a,), backward)


def softmax(a, axis=-1):
    a = const(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)
    return node(out, (a,),
                lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),))


def log_softmax(a, axis=-1):
    a = const(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    sm = np.exp(out)
    return node(out, (a,),
                lambda g: (g - sm * g.sum(axis=axis, keepdims=True),))


# -- spatial ops -------------------------------------------------------------

def _conv_padding(h, w, kh, kw, stride, padding):
    if padding == "same":
        oh = -(-h // stride)
        ow = -(-w // stride)
        ph = max((oh - 1) * stride + kh - h, 0)
        pw = max((ow - 1) * stride + kw - w, 0)
        return (ph // 2, ph - ph // 2), (pw // 2, pw - pw // 2)
    if padding == "valid":
        return (0, 0), (0, 0)
    p = int(padding)
    return (p, p), (p, p)


def conv2d(x, kernel, bias=None, stride=1, padding="same"):
    """2-D convolution (cross-correlation) on an HxWxC map.

    kernel is (kh, kw, cin, cout); implemented via im2col so the backward
    pass is two matmuls plus a strided scatter.
    """
    x, kernel = const(x), const(kernel)
    if x.ndim != 3 or kernel.ndim != 4 or x.shape[2] != kernel.shape[2]:
        raise ShapeMismatch("conv2d", x.shape, kernel.shape)
    kh, kw, cin, cout = kernel.shape
    h, w = x.shape[0], x.shape[1]
    (pt, pb), (pl, pr) = _conv_padding(h, w, kh, kw, stride, padding)
    xp = np.pad(x.data, ((pt, pb), (pl, pr), (0, 0)))
    hp, wp = xp.shape[0], xp.shape[1]
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(0, 1))
    windows = windows[::stride, ::stride]            # (oh, ow, cin, kh, kw)
    patches = windows.transpose(0, 1, 3, 4, 2).reshape(oh * ow, kh * kw * cin)
    kmat = kernel.data.reshape(kh * kw * cin, cout)
    out = (patches @ kmat).reshape(oh, ow, cout)
    if bias is not None:
        bias = const(bias)

    def backward(g):
        g2 = g.reshape(oh * ow, cout)
        gk = (patches.T @ g2).reshape(kernel.shape)
        gcols = (g2 @ kmat.T).reshape(oh, ow, kh, kw, cin)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[i:i + stride * oh:stride, j:j + stride * ow:stride] += gcols[:, :, i, j, :]
        gx = gxp[pt:pt + h, pl:pl + w]
        return (gx, gk)

    res = node(out, (x, kernel), backward)
    if bias is not None:
        res = add(res, bias)
    return res


def max_pool2d(x, size=(2, 2)):
    """Non-overlapping max pooling; spatial dims must divide the window."""
    x = const(x)
    sy, sx = size
    h, w, c = x.shape
    if h % sy or w % sx:
        raise ShapeMismatch("max_pool2d", x.shape, (sy, sx))
    oh, ow = h // sy, w // sx
    windows = x.data.reshape(oh, sy, ow, sx, c).transpose(0, 2, 1, 3, 4)
    flat = windows.reshape(oh, ow, sy * sx, c)
    idx = flat.argmax(axis=2)
    out = np.take_along_axis(flat, idx[:, :, None, :], axis=2)[:, :, 0, :]

    def backward(g):
        gflat = np.zeros_like(flat)
        np.put_along_axis(gflat, idx[:, :, None, :], g[:, :, None, :], axis=2)
        return (gflat.reshape(oh, ow, sy, sx, c).transpose(0, 2, 1, 3, 4).reshape(h, w, c),)

    return node(out, (x,), backward)
