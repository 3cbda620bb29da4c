"""Numba implementations of the 3x3 convolution kernels.

These are the hot inner loops of the whole package: direct convolutions with a
row accumulator and the 3-tap width unrolled so LLVM vectorizes the inner
`ox` loop. Work is partitioned so that every output element is written by
exactly one thread, which keeps results bit-identical across thread counts.

Import of this module is optional; `scenediff.nn.kernels` falls back to the
pure-numpy im2col path when numba is unavailable or disabled via
``SCENEDIFF_KERNELS=numpy``.
"""

import numpy as np
from numba import njit, prange

_OPTS = dict(parallel=True, fastmath=True, cache=True)


@njit(**_OPTS)
def conv3x3_forward(xp, w, stride):
    """xp is the already zero-padded input (N, C, H+2, W+2)."""
    n_batch, c_in, hp, wp = xp.shape
    c_out = w.shape[0]
    oh = (hp - 3) // stride + 1
    ow = (wp - 3) // stride + 1
    out = np.empty((n_batch, c_out, oh, ow), dtype=xp.dtype)
    for nc in prange(n_batch * c_out):
        n = nc // c_out
        co = nc % c_out
        acc = np.empty(ow, dtype=xp.dtype)
        for oy in range(oh):
            for ox in range(ow):
                acc[ox] = 0.0
            for ci in range(c_in):
                for ky in range(3):
                    iy = oy * stride + ky
                    w0 = w[co, ci, ky, 0]
                    w1 = w[co, ci, ky, 1]
                    w2 = w[co, ci, ky, 2]
                    if stride == 1:
                        for ox in range(ow):
                            acc[ox] += (w0 * xp[n, ci, iy, ox]
                                        + w1 * xp[n, ci, iy, ox + 1]
                                        + w2 * xp[n, ci, iy, ox + 2])
                    else:
                        for ox in range(ow):
                            ix = ox * stride
                            acc[ox] += (w0 * xp[n, ci, iy, ix]
                                        + w1 * xp[n, ci, iy, ix + 1]
                                        + w2 * xp[n, ci, iy, ix + 2])
            for ox in range(ow):
                out[n, co, oy, ox] = acc[ox]
    return out


@njit(**_OPTS)
def conv3x3_backward_w(xp, dout, stride, c_in):
    """Gradient w.r.t. the kernel; one thread owns one (co, ci) slice."""
    n_batch, c_out, oh, ow = dout.shape
    dw = np.empty((c_out, c_in, 3, 3), dtype=xp.dtype)
    for cc in prange(c_out * c_in):
        co = cc // c_in
        ci = cc % c_in
        for ky in range(3):
            a0 = 0.0
            a1 = 0.0
            a2 = 0.0
            for n in range(n_batch):
                for oy in range(oh):
                    iy = oy * stride + ky
                    for ox in range(ow):
                        d = dout[n, co, oy, ox]
                        ix = ox * stride
                        a0 += d * xp[n, ci, iy, ix]
                        a1 += d * xp[n, ci, iy, ix + 1]
                        a2 += d * xp[n, ci, iy, ix + 2]
            dw[co, ci, ky, 0] = a0
            dw[co, ci, ky, 1] = a1
            dw[co, ci, ky, 2] = a2
    return dw


@njit(**_OPTS)
def conv3x3_backward_x(dout, w, stride, hp, wp):
    """Gradient w.r.t. the padded input; one thread owns one (n, ci) plane."""
    n_batch, c_out, oh, ow = dout.shape
    c_in = w.shape[1]
    dxp = np.zeros((n_batch, c_in, hp, wp), dtype=dout.dtype)
    for nc in prange(n_batch * c_in):
        n = nc // c_in
        ci = nc % c_in
        for co in range(c_out):
            for ky in range(3):
                w0 = w[co, ci, ky, 0]
                w1 = w[co, ci, ky, 1]
                w2 = w[co, ci, ky, 2]
                for oy in range(oh):
                    iy = oy * stride + ky
                    if stride == 1:
                        for ox in range(ow):
                            d = dout[n, co, oy, ox]
                            dxp[n, ci, iy, ox] += w0 * d
                            dxp[n, ci, iy, ox + 1] += w1 * d
                            dxp[n, ci, iy, ox + 2] += w2 * d
                    else:
                        for ox in range(ow):
                            d = dout[n, co, oy, ox]
                            ix = ox * stride
                            dxp[n, ci, iy, ix] += w0 * d
                            dxp[n, ci, iy, ix + 1] += w1 * d
                            dxp[n, ci, iy, ix + 2] += w2 * d
    return dxp
