"""Layers built on the autograd tape: conv, linear, group norm, embedding.

Modules register parameters and submodules by attribute assignment (torch
style) so checkpointing can address every array by a stable dotted name.
"""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from ..errors import DimensionError
from . import autograd as ag
from .autograd import Parameter, Tensor


class Module:
    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_modules", {})

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        elif isinstance(value, ModuleList):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, m in self._modules.items():
            yield from m.named_parameters(prefix + name + ".")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def trainable_parameters(self) -> list[tuple[str, Parameter]]:
        return [(n, p) for n, p in self.named_parameters() if p.requires_grad]

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def freeze(self) -> None:
        for p in self.parameters():
            p.requires_grad = False

    def state_dict(self) -> dict[str, np.ndarray]:
        return {n: p.data for n, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        extra = sorted(set(state) - set(own))
        if missing or extra:
            raise DimensionError(f"state dict mismatch; missing={missing}, unexpected={extra}")
        for name, p in own.items():
            arr = np.asarray(state[name])
            if arr.shape != p.data.shape:
                raise DimensionError(
                    f"{name}: checkpoint shape {arr.shape} != model shape {p.data.shape}")
            p.data = arr.astype(p.data.dtype, copy=True)


class ModuleList(Module):
    def __init__(self, modules=()):
        super().__init__()
        self._items = []
        for m in modules:
            self.append(m)

    def append(self, m: Module) -> None:
        self._modules[str(len(self._items))] = m
        self._items.append(m)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, i):
        return self._items[i]


class Conv2d(Module):
    """3x3 (padding 1) or 1x1 convolution. `zero_init` gives an all-zero layer."""

    def __init__(self, c_in, c_out, ksize=3, stride=1, rng=None, dtype=np.float32,
                 zero_init=False):
        super().__init__()
        if ksize not in (1, 3):
            raise DimensionError(f"unsupported kernel size {ksize}")
        self.stride = stride
        if zero_init:
            w = np.zeros((c_out, c_in, ksize, ksize), dtype=dtype)
        else:
            fan_in = c_in * ksize * ksize
            std = math.sqrt(2.0 / fan_in)
            w = (rng.standard_normal((c_out, c_in, ksize, ksize)) * std).astype(dtype)
        self.w = Parameter(w)
        self.b = Parameter(np.zeros(c_out, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return ag.conv2d(x, self.w, self.b, stride=self.stride)


class Linear(Module):
    def __init__(self, d_in, d_out, rng=None, dtype=np.float32, zero_init=False):
        super().__init__()
        if zero_init:
            w = np.zeros((d_in, d_out), dtype=dtype)
        else:
            std = math.sqrt(1.0 / d_in)
            w = (rng.standard_normal((d_in, d_out)) * std).astype(dtype)
        self.w = Parameter(w)
        self.b = Parameter(np.zeros(d_out, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        nd = x.data.ndim
        if nd == 2:
            return ag.add(ag.matmul(x, self.w), self.b)
        lead = x.data.shape[:-1]
        flat = ag.reshape(x, (-1, x.data.shape[-1]))
        out = ag.add(ag.matmul(flat, self.w), self.b)
        return ag.reshape(out, lead + (self.w.data.shape[1],))


class GroupNorm(Module):
    def __init__(self, channels, groups=8, eps=1e-5, dtype=np.float32):
        super().__init__()
        if channels % groups:
            raise DimensionError(f"{channels} channels not divisible by {groups} groups")
        self.groups = groups
        self.eps = eps
        self.gamma = Parameter(np.ones(channels, dtype=dtype))
        self.beta = Parameter(np.zeros(channels, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return ag.group_norm(x, self.gamma, self.beta, self.groups, self.eps)


class Embedding(Module):
    def __init__(self, vocab, dim, rng=None, dtype=np.float32):
        super().__init__()
        self.table = Parameter((rng.standard_normal((vocab, dim)) * 0.02).astype(dtype))

    def __call__(self, ids) -> Tensor:
        return ag.embedding(self.table, ids)


def sinusoidal_embedding(t, dim: int, dtype=np.float32) -> np.ndarray:
    """Standard transformer-style timestep embedding. t: int or (N,) ints."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half - 1, 1))
    ang = t[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(ang), np.cos(ang)], axis=1)
    if dim % 2:
        emb = np.pad(emb, ((0, 0), (0, 1)))
    return emb.astype(dtype)
