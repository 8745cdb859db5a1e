"""Differentiable layers over numpy arrays.

Conventions: activations are float64, conv features are (batch, channels,
length), dense features (batch, units). forward(x, train=True) caches
whatever backward needs; backward(grad) returns the input gradient and
fills the layer's parameter gradients. Composite layers aggregate their
sublayers with dotted names.
"""
from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import ShapeError, UsageError


def he_uniform(rng: np.random.Generator, shape, fan_in: int,
               dtype=np.float64) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base layer: stateless unless a subclass declares parameters."""

    name = "layer"

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def grads(self) -> dict:
        return {}

    def state(self) -> dict:
        """Non-trainable tensors carried by checkpoints (e.g. BN stats)."""
        return {}

    def l2_penalty(self) -> float:
        """Summed kernel-regularizer contribution to the loss."""
        return 0.0

    def _require_cache(self, cache, who: str):
        if cache is None:
            raise UsageError(f"{who}.backward called without a train-mode forward")
        return cache


class Dense(Layer):
    """Affine map with optional L2 kernel regularizer.

    The regularizer contributes 2*l2*W to the kernel gradient and
    l2*||W||^2 to l2_penalty() for loss reporting.
    """

    name = "dense"

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator,
                 l2: float = 0.0, dtype=np.float64):
        self.w = he_uniform(rng, (n_in, n_out), n_in, dtype)
        self.b = np.zeros(n_out, dtype=dtype)
        self.l2 = l2
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._x = None

    def forward(self, x, train=False):
        if x.ndim != 2 or x.shape[1] != self.w.shape[0]:
            raise ShapeError(f"dense expects (n, {self.w.shape[0]}), got {x.shape}")
        self._x = x if train else None
        return x @ self.w + self.b

    def backward(self, grad):
        x = self._require_cache(self._x, "Dense")
        self.gw = x.T @ grad + 2.0 * self.l2 * self.w
        self.gb = grad.sum(axis=0)
        return grad @ self.w.T

    def l2_penalty(self) -> float:
        return float(self.l2 * np.sum(self.w ** 2))

    def params(self):
        return {"kernel": self.w, "bias": self.b}

    def grads(self):
        return {"kernel": self.gw, "bias": self.gb}


class Conv1d(Layer):
    name = "conv1d"

    def __init__(self, in_ch: int, out_ch: int, kernel: int,
                 rng: np.random.Generator, stride: int = 1, pad: int | None = None,
                 dtype=np.float64):
        self.stride = stride
        self.pad = kernel // 2 if pad is None else pad
        self.w = he_uniform(rng, (out_ch, in_ch, kernel), in_ch * kernel, dtype)
        self.b = np.zeros(out_ch, dtype=dtype)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._cols = None
        self._in_len = 0

    def _im2col(self, x):
        xp = np.pad(x, ((0, 0), (0, 0), (self.pad, self.pad))) if self.pad else x
        k = self.w.shape[2]
        cols = np.lib.stride_tricks.sliding_window_view(xp, k, axis=2)
        return cols[:, :, ::self.stride, :]  # (n, in_ch, l_out, k)

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[1] != self.w.shape[1]:
            raise ShapeError(f"conv1d expects (n, {self.w.shape[1]}, L), got {x.shape}")
        cols = self._im2col(np.ascontiguousarray(x))
        self._cols, self._in_len = (cols, x.shape[2]) if train else (None, 0)
        return np.einsum("nilk,oik->nol", cols, self.w, optimize=True) \
            + self.b[None, :, None]

    def backward(self, grad):
        cols = self._require_cache(self._cols, "Conv1d")
        self.gw = np.einsum("nilk,nol->oik", cols, grad, optimize=True)
        self.gb = grad.sum(axis=(0, 2))
        gcols = np.einsum("nol,oik->nilk", grad, self.w, optimize=True)
        n, in_ch = cols.shape[0], cols.shape[1]
        k = self.w.shape[2]
        l_out = grad.shape[2]
        gxp = np.zeros((n, in_ch, self._in_len + 2 * self.pad),
                       dtype=grad.dtype)
        for j in range(k):
            gxp[:, :, j:j + self.stride * l_out:self.stride] += gcols[:, :, :, j]
        return gxp[:, :, self.pad:self.pad + self._in_len] if self.pad else gxp

    def params(self):
        return {"kernel": self.w, "bias": self.b}

    def grads(self):
        return {"kernel": self.gw, "bias": self.gb}


class DepthwiseConv1d(Layer):
    """Per-channel convolution; the hot kernel (compiled when available)."""

    name = "depthwise_conv1d"

    def __init__(self, channels: int, kernel: int, rng: np.random.Generator,
                 stride: int = 1, pad: int | None = None, dtype=np.float64):
        self.stride = stride
        self.pad = kernel // 2 if pad is None else pad
        self.w = he_uniform(rng, (channels, kernel), kernel, dtype)
        self.b = np.zeros(channels, dtype=dtype)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._x = None

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[1] != self.w.shape[0]:
            raise ShapeError(
                f"depthwise_conv1d expects (n, {self.w.shape[0]}, L), got {x.shape}")
        x = np.ascontiguousarray(x)
        self._x = x if train else None
        return kernels.depthwise_conv1d_fwd(x, self.w, self.b,
                                            self.stride, self.pad)

    def backward(self, grad):
        x = self._require_cache(self._x, "DepthwiseConv1d")
        gx, self.gw, self.gb = kernels.depthwise_conv1d_bwd(
            x, self.w, np.ascontiguousarray(grad), self.stride, self.pad)
        return gx

    def params(self):
        return {"kernel": self.w, "bias": self.b}

    def grads(self):
        return {"kernel": self.gw, "bias": self.gb}


class PointwiseConv1d(Layer):
    """1x1 convolution across channels (a matmul over the channel axis)."""

    name = "pointwise_conv1d"

    def __init__(self, in_ch: int, out_ch: int, rng: np.random.Generator,
                 dtype=np.float64):
        self.w = he_uniform(rng, (in_ch, out_ch), in_ch, dtype)
        self.b = np.zeros(out_ch, dtype=dtype)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._x = None

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[1] != self.w.shape[0]:
            raise ShapeError(
                f"pointwise_conv1d expects (n, {self.w.shape[0]}, L), got {x.shape}")
        self._x = x if train else None
        return np.einsum("ncl,co->nol", x, self.w, optimize=True) \
            + self.b[None, :, None]

    def backward(self, grad):
        x = self._require_cache(self._x, "PointwiseConv1d")
        self.gw = np.einsum("ncl,nol->co", x, grad, optimize=True)
        self.gb = grad.sum(axis=(0, 2))
        return np.einsum("nol,co->ncl", grad, self.w, optimize=True)

    def params(self):
        return {"kernel": self.w, "bias": self.b}

    def grads(self):
        return {"kernel": self.gw, "bias": self.gb}


class GroupedPointwiseConv1d(Layer):
    """1x1 convolution with independent weights per channel group.

    Input (n, groups*in_per_group, L) -> (n, groups*out_per_group, L);
    group g only sees its own channel slice (no cross-group mixing).
    """

    name = "grouped_pointwise_conv1d"

    def __init__(self, groups: int, in_per_group: int, out_per_group: int,
                 rng: np.random.Generator, dtype=np.float64):
        self.groups = groups
        self.w = he_uniform(rng, (groups, in_per_group, out_per_group),
                            in_per_group, dtype)
        self.b = np.zeros(groups * out_per_group, dtype=dtype)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._xg = None
        self._nl = None

    def _split(self, x):
        # (n, G*C, L) -> (G, n*L, C)
        n, _, length = x.shape
        g, c = self.groups, x.shape[1] // self.groups
        return (x.reshape(n, g, c, length).transpose(1, 0, 3, 2)
                .reshape(g, n * length, c), (n, length))

    def _merge(self, yg, n, length):
        # (G, n*L, C) -> (n, G*C, L)
        g, _, c = yg.shape
        return (yg.reshape(g, n, length, c).transpose(1, 0, 3, 2)
                .reshape(n, g * c, length))

    def forward(self, x, train=False):
        expected = self.groups * self.w.shape[1]
        if x.ndim != 3 or x.shape[1] != expected:
            raise ShapeError(
                f"grouped_pointwise expects (n, {expected}, L), got {x.shape}")
        xg, (n, length) = self._split(x)
        self._xg, self._nl = (xg, (n, length)) if train else (None, None)
        y = self._merge(xg @ self.w, n, length)
        return y + self.b[None, :, None]

    def backward(self, grad):
        xg = self._require_cache(self._xg, "GroupedPointwiseConv1d")
        n, length = self._nl
        gg, _ = self._split(np.ascontiguousarray(grad))
        self.gw = np.transpose(xg, (0, 2, 1)) @ gg
        self.gb = grad.sum(axis=(0, 2))
        return self._merge(gg @ np.transpose(self.w, (0, 2, 1)), n, length)

    def params(self):
        return {"kernel": self.w, "bias": self.b}

    def grads(self):
        return {"kernel": self.gw, "bias": self.gb}


class Reshape(Layer):
    """Reshapes the per-sample tail of the batch (batch axis untouched)."""

    name = "reshape"

    def __init__(self, tail: tuple):
        self.tail = tuple(tail)
        self._shape = None

    def forward(self, x, train=False):
        self._shape = x.shape if train else None
        return x.reshape((x.shape[0],) + self.tail)

    def backward(self, grad):
        shape = self._require_cache(self._shape, "Reshape")
        return grad.reshape(shape)


class MaxPool1d(Layer):
    name = "max_pool1d"

    def __init__(self, kernel: int, stride: int | None = None):
        self.kernel = kernel
        self.stride = stride or kernel
        self._idx = None
        self._in_len = 0

    def forward(self, x, train=False):
        if x.ndim != 3:
            raise ShapeError(f"max_pool1d expects (n, c, L), got {x.shape}")
        x = np.ascontiguousarray(x)
        y, idx = kernels.maxpool1d_fwd(x, self.kernel, self.stride)
        self._idx, self._in_len = (idx, x.shape[2]) if train else (None, 0)
        return y

    def backward(self, grad):
        idx = self._require_cache(self._idx, "MaxPool1d")
        return kernels.maxpool1d_bwd(np.ascontiguousarray(grad), idx, self._in_len)


class Flatten(Layer):
    name = "flatten"

    def __init__(self):
        self._shape = None

    def forward(self, x, train=False):
        self._shape = x.shape if train else None
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        shape = self._require_cache(self._shape, "Flatten")
        return grad.reshape(shape)


class BatchNorm(Layer):
    """Normalizes over all axes but the channel axis (axis 1, or the only
    feature axis for dense inputs). Batch statistics in train mode,
    running statistics in eval mode."""

    name = "batch_norm"

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5,
                 dtype=np.float64):
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.momentum = momentum
        self.eps = eps
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.ggamma = np.zeros_like(self.gamma)
        self.gbeta = np.zeros_like(self.beta)
        self._cache = None

    def _expand(self, v, ndim):
        return v[None, :] if ndim == 2 else v[None, :, None]

    def forward(self, x, train=False):
        if x.shape[1] != self.gamma.shape[0]:
            raise ShapeError(
                f"batch_norm over {self.gamma.shape[0]} channels, got {x.shape}")
        axes = (0,) if x.ndim == 2 else (0, 2)
        if not train:
            # fused eval path: y = x*scale + shift, one pass over x
            inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
            scale = self.gamma * inv_std
            shift = self.beta - self.running_mean * scale
            return x * self._expand(scale, x.ndim) + self._expand(shift, x.ndim)
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        self.running_mean = self.momentum * self.running_mean \
            + (1 - self.momentum) * mean
        self.running_var = self.momentum * self.running_var \
            + (1 - self.momentum) * var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - self._expand(mean, x.ndim)) * self._expand(inv_std, x.ndim)
        self._cache = (xhat, inv_std, axes)
        return self._expand(self.gamma, x.ndim) * xhat \
            + self._expand(self.beta, x.ndim)

    def backward(self, grad):
        xhat, inv_std, axes = self._require_cache(self._cache, "BatchNorm")
        m = float(np.prod([grad.shape[a] for a in axes]))
        self.ggamma = (grad * xhat).sum(axis=axes)
        self.gbeta = grad.sum(axis=axes)
        gxhat = grad * self._expand(self.gamma, grad.ndim)
        term = gxhat - self._expand(gxhat.sum(axis=axes) / m, grad.ndim) \
            - xhat * self._expand((gxhat * xhat).sum(axis=axes) / m, grad.ndim)
        return term * self._expand(inv_std, grad.ndim)

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.ggamma, "beta": self.gbeta}

    def state(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}


class Dropout(Layer):
    """Inverted dropout: survivors scaled by 1/(1-p), eval is a no-op."""

    name = "dropout"

    def __init__(self, p: float, seed: int = 0):
        if not 0 <= p < 1:
            raise ShapeError(f"dropout p must be in [0,1), got {p}")
        self.p = p
        self.rng = np.random.default_rng(seed)
        self._mask = None

    def forward(self, x, train=False):
        if not train or self.p == 0.0:
            self._mask = None
            return x
        self._mask = self.rng.random(x.shape) >= self.p
        return x * self._mask * (1.0 / (1.0 - self.p))

    def backward(self, grad):
        if self._mask is None:
            return grad
        return grad * self._mask * (1.0 / (1.0 - self.p))


class ReLU(Layer):
    name = "relu"

    def __init__(self):
        self._mask = None

    def forward(self, x, train=False):
        self._mask = (x > 0) if train else None
        return np.maximum(x, 0.0)

    def backward(self, grad):
        mask = self._require_cache(self._mask, "ReLU")
        return grad * mask


class LeakyReLU(Layer):
    name = "leaky_relu"

    def __init__(self, alpha: float = 0.3):
        self.alpha = alpha
        self._mask = None

    def forward(self, x, train=False):
        self._mask = (x > 0) if train else None
        return np.where(x > 0, x, self.alpha * x)

    def backward(self, grad):
        mask = self._require_cache(self._mask, "LeakyReLU")
        return np.where(mask, grad, self.alpha * grad)


class Softmax(Layer):
    """Row-wise softmax over the last axis with an exact Jacobian backward.

    Training loops normally pair the model's softmax output with
    losses.cross_entropy and start backprop below this layer (fused,
    numerically stable); the exact backward here keeps the layer
    differentiable on its own.
    """

    name = "softmax"

    def __init__(self):
        self._y = None

    def forward(self, x, train=False):
        z = x - x.max(axis=-1, keepdims=True)
        e = np.exp(z)
        y = e / e.sum(axis=-1, keepdims=True)
        self._y = y if train else None
        return y

    def backward(self, grad):
        y = self._require_cache(self._y, "Softmax")
        return y * (grad - (grad * y).sum(axis=-1, keepdims=True))
