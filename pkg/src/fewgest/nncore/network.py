"""Layer containers: Sequential and MBConv-style composite blocks."""
from __future__ import annotations

import numpy as np

from .layers import (BatchNorm, DepthwiseConv1d, GroupedPointwiseConv1d,
                     Layer, PointwiseConv1d, ReLU)


class Sequential(Layer):
    name = "sequential"

    def __init__(self, layers: list[Layer]):
        self.layers = list(layers)

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, grad, skip_last: bool = False):
        """Backprop through the stack; skip_last starts below the final
        layer (used with the fused softmax cross-entropy gradient)."""
        stack = self.layers[:-1] if skip_last else self.layers
        for layer in reversed(stack):
            grad = layer.backward(grad)
        return grad

    def _named(self):
        for i, layer in enumerate(self.layers):
            yield f"{i:02d}_{layer.name}", layer

    def params(self):
        return {f"{n}.{k}": v for n, l in self._named()
                for k, v in l.params().items()}

    def grads(self):
        return {f"{n}.{k}": v for n, l in self._named()
                for k, v in l.grads().items()}

    def state(self):
        return {f"{n}.{k}": v for n, l in self._named()
                for k, v in l.state().items()}

    def l2_penalty(self):
        return sum(l.l2_penalty() for l in self.layers)


class InvertedResidual(Layer):
    """MBConv block: pointwise expand -> depthwise -> pointwise project,
    BN + ReLU after the first two convs, linear projection, skip when the
    input and output shapes match. groups > 1 keeps that many independent
    channel towers side by side (no cross-tower mixing)."""

    name = "inverted_residual"

    def __init__(self, in_ch: int, out_ch: int, rng: np.random.Generator,
                 expansion: int = 4, kernel: int = 5, stride: int = 2,
                 groups: int = 1, dtype=np.float64):
        hidden = in_ch * expansion
        self.stride = stride
        self.use_skip = in_ch == out_ch and stride == 1

        def pw(cin, cout):
            if groups == 1:
                return PointwiseConv1d(cin, cout, rng, dtype=dtype)
            return GroupedPointwiseConv1d(groups, cin, cout, rng, dtype=dtype)

        self.body = Sequential([
            pw(in_ch, hidden),
            BatchNorm(groups * hidden, dtype=dtype),
            ReLU(),
            DepthwiseConv1d(groups * hidden, kernel, rng, stride=stride,
                            dtype=dtype),
            BatchNorm(groups * hidden, dtype=dtype),
            ReLU(),
            pw(hidden, out_ch),
            BatchNorm(groups * out_ch, dtype=dtype),
        ])

    def forward(self, x, train=False):
        y = self.body.forward(x, train)
        return x + y if self.use_skip else y

    def backward(self, grad):
        gx = self.body.backward(grad)
        return gx + grad if self.use_skip else gx

    def params(self):
        return {f"body.{k}": v for k, v in self.body.params().items()}

    def grads(self):
        return {f"body.{k}": v for k, v in self.body.grads().items()}

    def state(self):
        return {f"body.{k}": v for k, v in self.body.state().items()}

    def l2_penalty(self):
        return self.body.l2_penalty()


class SeparableConv1d(Layer):
    """Depthwise convolution followed by a pointwise channel mix."""

    name = "separable_conv1d"

    def __init__(self, in_ch: int, out_ch: int, kernel: int,
                 rng: np.random.Generator, stride: int = 1, dtype=np.float64):
        self.depth = DepthwiseConv1d(in_ch, kernel, rng, stride=stride,
                                     dtype=dtype)
        self.point = PointwiseConv1d(in_ch, out_ch, rng, dtype=dtype)

    def forward(self, x, train=False):
        return self.point.forward(self.depth.forward(x, train), train)

    def backward(self, grad):
        return self.depth.backward(self.point.backward(grad))

    def params(self):
        return {**{f"depth.{k}": v for k, v in self.depth.params().items()},
                **{f"point.{k}": v for k, v in self.point.params().items()}}

    def grads(self):
        return {**{f"depth.{k}": v for k, v in self.depth.grads().items()},
                **{f"point.{k}": v for k, v in self.point.grads().items()}}

    def l2_penalty(self):
        return self.depth.l2_penalty() + self.point.l2_penalty()


def parameter_count(layer: Layer) -> int:
    return int(sum(v.size for v in layer.params().values()))
