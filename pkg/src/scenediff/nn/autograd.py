"""Minimal reverse-mode autodiff over numpy arrays.

A :class:`Tensor` wraps an ndarray plus an optional backward closure; ops
build the tape eagerly and :func:`backward` replays it in reverse topological
order. This is deliberately small: only the ops the models in this package
need, all dtype-preserving, all deterministic.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable

import numpy as np

from ..errors import DimensionError
from . import kernels

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape construction inside the context (inference paths)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward_fn=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = parents
        self._backward = backward_fn

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"


class Parameter(Tensor):
    """A trainable leaf. Freezing is just `requires_grad = False`."""

    def __init__(self, data):
        super().__init__(np.asarray(data), requires_grad=True)


def _wrap(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    arr = np.asarray(value)
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    return Tensor(arr)


def _make(data, parents, backward_fn) -> Tensor:
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=parents, backward_fn=backward_fn)
    return Tensor(data)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype, copy=True)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(loss: Tensor, grad=None) -> None:
    """Backpropagate from `loss`, accumulating into leaf `.grad` buffers."""
    topo: list[Tensor] = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    if grad is None:
        grad = np.ones_like(loss.data)
    loss.grad = np.asarray(grad, dtype=loss.data.dtype)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# ops


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_data = a.data + b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_data = a.data - b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, -_unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_data = a.data * b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), bwd)


def scale(a, s: float) -> Tensor:
    a = _wrap(a)
    s = a.data.dtype.type(s)

    def bwd(g):
        _accumulate(a, g * s)

    return _make(a.data * s, (a,), bwd)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_data = a.data @ b.data

    def bwd(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _make(out_data, (a, b), bwd)


def conv2d(x, w, b=None, stride: int = 1) -> Tensor:
    """Convolution; 3x3 kernels use padding 1 (backend kernels), 1x1 use none."""
    x, w = _wrap(x), _wrap(w)
    ksize = w.data.shape[2]
    if x.data.shape[1] != w.data.shape[1]:
        raise DimensionError(
            f"conv2d: input has {x.data.shape[1]} channels, kernel expects {w.data.shape[1]}")
    if ksize == 3:
        out_data = kernels.conv3x3_forward(x.data, w.data, stride)

        def bwd3(g):
            need_x = x.requires_grad
            dx, dw = kernels.conv3x3_backward(x.data, w.data, g, stride)
            if need_x:
                _accumulate(x, dx)
            _accumulate(w, dw)

        bwd_core = bwd3
    elif ksize == 1:
        if stride != 1:
            raise DimensionError("1x1 convolutions are stride-1 only")
        n, c, h, wd = x.data.shape
        co = w.data.shape[0]
        xm = x.data.reshape(n, c, h * wd)
        out_data = np.matmul(w.data.reshape(co, c)[None], xm).reshape(n, co, h, wd)

        def bwd1(g):
            gm = g.reshape(n, co, h * wd)
            if x.requires_grad:
                dx = np.matmul(w.data.reshape(co, c).T[None], gm).reshape(x.data.shape)
                _accumulate(x, dx)
            dw = np.matmul(gm, xm.transpose(0, 2, 1)).sum(axis=0).reshape(w.data.shape)
            _accumulate(w, dw)

        bwd_core = bwd1
    else:
        raise DimensionError(f"unsupported kernel size {ksize}")

    if b is None:
        return _make(out_data, (x, w), bwd_core)

    b = _wrap(b)
    out_data = out_data + b.data[None, :, None, None]

    def bwd(g):
        bwd_core(g)
        _accumulate(b, g.sum(axis=(0, 2, 3)))

    return _make(out_data, (x, w, b), bwd)


def silu(x) -> Tensor:
    x = _wrap(x)
    sig = 1.0 / (1.0 + np.exp(-x.data))
    out_data = x.data * sig

    def bwd(g):
        _accumulate(x, g * (sig * (1.0 + x.data * (1.0 - sig))))

    return _make(out_data, (x,), bwd)


def group_norm(x, gamma, beta, groups: int, eps: float = 1e-5) -> Tensor:
    x, gamma, beta = _wrap(x), _wrap(gamma), _wrap(beta)
    n, c, h, w = x.data.shape
    if c % groups:
        raise DimensionError(f"group_norm: {c} channels not divisible by {groups} groups")
    xg = x.data.reshape(n, groups, -1)
    mean = xg.mean(axis=2, keepdims=True)
    var = xg.var(axis=2, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = ((xg - mean) * inv).reshape(n, c, h, w)
    out_data = xhat * gamma.data[None, :, None, None] + beta.data[None, :, None, None]
    m = xg.shape[2]

    def bwd(g):
        _accumulate(beta, g.sum(axis=(0, 2, 3)))
        _accumulate(gamma, (g * xhat).sum(axis=(0, 2, 3)))
        if not x.requires_grad:
            return
        dxhat = (g * gamma.data[None, :, None, None]).reshape(n, groups, -1)
        xh = xhat.reshape(n, groups, -1)
        s1 = dxhat.sum(axis=2, keepdims=True)
        s2 = (dxhat * xh).sum(axis=2, keepdims=True)
        dx = (dxhat - s1 / m - xh * s2 / m) * inv
        _accumulate(x, dx.reshape(x.data.shape))

    return _make(out_data, (x, gamma, beta), bwd)


def upsample_nearest2x(x) -> Tensor:
    x = _wrap(x)
    out_data = x.data.repeat(2, axis=2).repeat(2, axis=3)

    def bwd(g):
        n, c, h, w = x.data.shape
        _accumulate(x, g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)))

    return _make(out_data, (x,), bwd)


def concat_channels(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    ca = a.data.shape[1]
    out_data = np.concatenate([a.data, b.data], axis=1)

    def bwd(g):
        _accumulate(a, g[:, :ca])
        _accumulate(b, g[:, ca:])

    return _make(out_data, (a, b), bwd)


def reshape(x, shape) -> Tensor:
    x = _wrap(x)
    out_data = x.data.reshape(shape)

    def bwd(g):
        _accumulate(x, g.reshape(x.data.shape))

    return _make(out_data, (x,), bwd)


def mean_all(x) -> Tensor:
    x = _wrap(x)
    size = x.data.size

    def bwd(g):
        _accumulate(x, np.broadcast_to(g / size, x.data.shape).astype(x.data.dtype, copy=False))

    return _make(np.asarray(x.data.mean(), dtype=x.data.dtype), (x,), bwd)


def mean_axes(x, axes, keepdims: bool = False) -> Tensor:
    x = _wrap(x)
    axes = tuple(axes)
    count = int(np.prod([x.data.shape[a] for a in axes]))
    out_data = x.data.mean(axis=axes, keepdims=keepdims)

    def bwd(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        _accumulate(x, np.broadcast_to(g / count, x.data.shape).astype(x.data.dtype, copy=False))

    return _make(out_data, (x,), bwd)


def embedding(table, ids) -> Tensor:
    table = _wrap(table)
    ids = np.asarray(ids)
    out_data = table.data[ids]

    def bwd(g):
        if not table.requires_grad:
            return
        dt = np.zeros_like(table.data)
        np.add.at(dt, ids, g)
        _accumulate(table, dt)

    return _make(out_data, (table,), bwd)


def softmax_cross_entropy(logits, labels) -> Tensor:
    """Mean cross-entropy over the batch; labels are integer class indices."""
    logits = _wrap(logits)
    labels = np.asarray(labels)
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    ez = np.exp(z)
    probs = ez / ez.sum(axis=1, keepdims=True)
    n = logits.data.shape[0]
    nll = -np.log(probs[np.arange(n), labels] + 1e-12)

    def bwd(g):
        d = probs.copy()
        d[np.arange(n), labels] -= 1.0
        _accumulate(logits, (g / n) * d)

    return _make(np.asarray(nll.mean(), dtype=logits.data.dtype), (logits,), bwd)


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None
