"""Pure-numpy kernels: depthwise conv1d and max-pool forward/backward.

Same contracts as the compiled module fewgest.kernels._fast; used as the
fallback when the extension is not built and as the baseline in
benchmarks/bench_kernels.py.

Shapes: x (N, C, L) float64 C-contiguous, depthwise weights (C, K),
bias (C,). Output length = (L + 2*pad - K) // stride + 1.
"""
from __future__ import annotations

import numpy as np

IMPL = "reference"


def _pad(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad)))


def depthwise_conv1d_fwd(x, w, b, stride: int, pad: int):
    n, c, length = x.shape
    k = w.shape[1]
    l_out = (length + 2 * pad - k) // stride + 1
    xp = _pad(x, pad)
    y = np.broadcast_to(b[None, :, None], (n, c, l_out)).copy()
    for j in range(k):
        y += xp[:, :, j:j + stride * l_out:stride] * w[:, j][None, :, None]
    return y


def depthwise_conv1d_bwd(x, w, gy, stride: int, pad: int):
    n, c, length = x.shape
    k = w.shape[1]
    l_out = gy.shape[2]
    xp = _pad(x, pad)
    gxp = np.zeros_like(xp)
    gw = np.empty_like(w)
    for j in range(k):
        sl = xp[:, :, j:j + stride * l_out:stride]
        gw[:, j] = np.einsum("ncl,ncl->c", sl, gy)
        gxp[:, :, j:j + stride * l_out:stride] += gy * w[:, j][None, :, None]
    gb = gy.sum(axis=(0, 2))
    gx = gxp[:, :, pad:pad + length] if pad else gxp
    return gx, gw, gb


def maxpool1d_fwd(x, k: int, stride: int):
    n, c, length = x.shape
    l_out = (length - k) // stride + 1
    win = np.lib.stride_tricks.sliding_window_view(x, k, axis=2)[:, :, ::stride]
    arg = win.argmax(axis=3)
    y = np.take_along_axis(win, arg[..., None], axis=3)[..., 0]
    idx = arg + stride * np.arange(l_out)[None, None, :]
    return y, idx.astype(np.int64)


def maxpool1d_bwd(gy, idx, l_in: int):
    n, c, l_out = gy.shape
    gx = np.zeros((n, c, l_in), dtype=gy.dtype)
    ni, ci = np.meshgrid(np.arange(n), np.arange(c), indexing="ij")
    np.add.at(gx, (ni[..., None], ci[..., None], idx), gy)
    return gx
