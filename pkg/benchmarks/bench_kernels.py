"""Compiled vs numpy kernel benchmark.

Times the hot training kernels (depthwise conv1d fwd/bwd, max-pool
fwd/bwd) on backbone-shaped tensors for both implementations, plus one
end-to-end training step. Run:  python benchmarks/bench_kernels.py
"""
import time

import numpy as np

from fewgest.kernels import _fast  # noqa: F401  (fails fast if not built)
from fewgest.kernels import reference
from fewgest import kernels as selected


def timeit(fn, *args, repeat=20):
    fn(*args)  # warmup
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_case(name, shape, ch, kernel, stride):
    rng = np.random.default_rng(0)
    x = np.ascontiguousarray(rng.normal(size=shape).astype(np.float32))
    w = rng.normal(size=(ch, kernel)).astype(np.float32)
    b = np.zeros(ch, dtype=np.float32)
    rows = {}
    for label, impl in (("numpy", reference), ("compiled", _fast)):
        fwd = timeit(impl.depthwise_conv1d_fwd, x, w, b, stride, kernel // 2)
        y = impl.depthwise_conv1d_fwd(x, w, b, stride, kernel // 2)
        gy = np.ascontiguousarray(np.ones_like(y))
        bwd = timeit(impl.depthwise_conv1d_bwd, x, w, gy, stride, kernel // 2)
        rows[label] = (fwd, bwd)
    speed_f = rows["numpy"][0] / rows["compiled"][0]
    speed_b = rows["numpy"][1] / rows["compiled"][1]
    print(f"{name:28s} fwd {rows['numpy'][0]*1e3:7.2f}ms -> "
          f"{rows['compiled'][0]*1e3:7.2f}ms ({speed_f:4.1f}x)   "
          f"bwd {rows['numpy'][1]*1e3:7.2f}ms -> "
          f"{rows['compiled'][1]*1e3:7.2f}ms ({speed_b:4.1f}x)")


def bench_maxpool():
    rng = np.random.default_rng(0)
    x = np.ascontiguousarray(rng.normal(size=(256, 24, 13)).astype(np.float32))
    for label, impl in (("numpy", reference), ("compiled", _fast)):
        fwd = timeit(impl.maxpool1d_fwd, x, 5, 2)
        y, idx = impl.maxpool1d_fwd(x, 5, 2)
        gy = np.ascontiguousarray(np.ones_like(y))
        bwd = timeit(impl.maxpool1d_bwd, gy, idx, x.shape[2])
        print(f"max_pool ({label:8s})           fwd {fwd*1e3:7.2f}ms   "
              f"bwd {bwd*1e3:7.2f}ms")


def bench_train_step():
    import os
    from fewgest.backbone import build_backbone
    from fewgest import nncore as nn
    print(f"\nselected kernel implementation: {selected.IMPL}")
    model = build_backbone(0)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(256, 6, 4, 100)).astype(np.float32)
    labels = rng.integers(0, 5, size=256)

    def step():
        emb = model.extractor.forward(x, train=True)
        probs = model.inference.forward(emb, train=True)
        _, grad = nn.cross_entropy(probs, labels)
        model.extractor.backward(model.inference.backward(grad, skip_last=True))

    t = timeit(step, repeat=5)
    print(f"backbone train step (batch 256): {t*1e3:.0f} ms "
          f"[{selected.IMPL} kernels]")


if __name__ == "__main__":
    print("depthwise conv1d, backbone-shaped workloads "
          "(batch 256, float32):")
    bench_case("MBConv1 expand (144ch, L100)", (256, 144, 100), 144, 5, 2)
    bench_case("MBConv2 expand (576ch, L50)", (256, 576, 50), 576, 5, 2)
    bench_case("separable (432ch, L25)", (256, 432, 25), 432, 5, 2)
    bench_maxpool()
    bench_train_step()
