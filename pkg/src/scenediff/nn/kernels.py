"""Convolution kernels with a numba backend and a pure-numpy fallback.

The backend is chosen once at import from the ``SCENEDIFF_KERNELS``
environment variable (``numba`` or ``numpy``; default ``numba`` when numba
imports cleanly) and can be switched at runtime with :func:`set_backend`.
Both backends compute identical quantities; they differ only in summation
order, so results agree to float rounding. ``python -m scenediff.bench``
compares their throughput on the shapes this package actually runs.

Only 3x3 kernels with padding 1 live here; 1x1 convolutions are a reshaped
matmul in both backends and are handled directly in the autograd op.
"""

import os

import numpy as np

from ..errors import ConfigError

try:
    from . import _numba_kernels as _nb
except ImportError:  # pragma: no cover - exercised only without numba
    _nb = None

_VALID = ("numba", "numpy")


def _default_backend() -> str:
    env = os.environ.get("SCENEDIFF_KERNELS", "").strip().lower()
    if env:
        if env not in _VALID:
            raise ConfigError(f"SCENEDIFF_KERNELS must be one of {_VALID}, got {env!r}")
        if env == "numba" and _nb is None:
            raise ConfigError("SCENEDIFF_KERNELS=numba but numba is not importable")
        return env
    return "numba" if _nb is not None else "numpy"


_backend = _default_backend()


def active_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in _VALID:
        raise ConfigError(f"unknown kernel backend {name!r}; expected one of {_VALID}")
    if name == "numba" and _nb is None:
        raise ConfigError("numba backend requested but numba is not importable")
    _backend = name


def _pad1(x):
    return np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))


def _im2col(xp, stride):
    n, c, hp, wp = xp.shape
    oh = (hp - 3) // stride + 1
    ow = (wp - 3) // stride + 1
    cols = np.empty((n, c, 3, 3, oh, ow), dtype=xp.dtype)
    for ky in range(3):
        for kx in range(3):
            cols[:, :, ky, kx] = xp[:, :, ky:ky + oh * stride:stride, kx:kx + ow * stride:stride]
    return cols.reshape(n, c * 9, oh * ow)


def conv3x3_forward(x, w, stride=1):
    """3x3 convolution, padding 1. x: (N,C,H,W), w: (Co,C,3,3)."""
    xp = _pad1(x)
    if _backend == "numba":
        return _nb.conv3x3_forward(np.ascontiguousarray(xp), np.ascontiguousarray(w), stride)
    n, c, h, wdt = x.shape
    co = w.shape[0]
    oh = (h + 2 - 3) // stride + 1
    ow = (wdt + 2 - 3) // stride + 1
    cols = _im2col(xp, stride)
    out = np.matmul(w.reshape(co, -1)[None], cols)
    return out.reshape(n, co, oh, ow)


def conv3x3_backward(x, w, dout, stride=1):
    """Returns (dx, dw) for the forward above."""
    xp = _pad1(x)
    hp, wp = xp.shape[2], xp.shape[3]
    if _backend == "numba":
        xp = np.ascontiguousarray(xp)
        dout = np.ascontiguousarray(dout)
        wc = np.ascontiguousarray(w)
        dw = _nb.conv3x3_backward_w(xp, dout, stride, x.shape[1])
        dxp = _nb.conv3x3_backward_x(dout, wc, stride, hp, wp)
        return dxp[:, :, 1:-1, 1:-1], dw
    n, c = x.shape[0], x.shape[1]
    co, oh, ow = dout.shape[1], dout.shape[2], dout.shape[3]
    cols = _im2col(xp, stride)
    dflat = dout.reshape(n, co, oh * ow)
    dw = np.matmul(dflat, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    dcols = np.matmul(w.reshape(co, -1).T[None], dflat).reshape(n, c, 3, 3, oh, ow)
    dxp = np.zeros((n, c, hp, wp), dtype=dout.dtype)
    for ky in range(3):
        for kx in range(3):
            dxp[:, :, ky:ky + oh * stride:stride, kx:kx + ow * stride:stride] += dcols[:, :, ky, kx]
    return dxp[:, :, 1:-1, 1:-1], dw
