import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fewgest import nncore as nn
from fewgest.errors import ConfigError, ShapeError, UsageError

from .util import away_from_kinks, check_layer_gradients

TOL = 1e-4


def layer_zoo(rng):
    """One instance of every layer kind plus a matching input shape."""
    return [
        (nn.Conv1d(3, 4, 5, rng, stride=2), (2, 3, 20)),
        (nn.DepthwiseConv1d(4, 5, rng, stride=2), (2, 4, 20)),
        (nn.PointwiseConv1d(3, 5, rng), (2, 3, 12)),
        (nn.GroupedPointwiseConv1d(3, 2, 4, rng), (2, 6, 10)),
        (nn.InvertedResidual(3, 5, rng, expansion=2, kernel=3, stride=2), (2, 3, 16)),
        (nn.InvertedResidual(4, 4, rng, expansion=2, kernel=3, stride=1), (2, 4, 12)),
        (nn.InvertedResidual(3, 5, rng, expansion=2, kernel=3, stride=2,
                             groups=2), (2, 6, 16)),
        (nn.SeparableConv1d(3, 4, 3, rng, stride=2), (2, 3, 14)),
        (nn.Reshape((4, 6)), (3, 2, 2, 6)),
        (nn.MaxPool1d(3, 2), (2, 3, 15)),
        (nn.Flatten(), (2, 3, 7)),
        (nn.Dense(6, 4, rng, l2=5e-5), (3, 6)),
        (nn.BatchNorm(4), (5, 4, 9)),
        (nn.BatchNorm(6), (7, 6)),
        (nn.Dropout(0.4, seed=11), (4, 10)),
        (nn.LeakyReLU(0.3), (3, 8)),
        (nn.ReLU(), (3, 8)),
        (nn.Softmax(), (4, 6)),
    ]


def dropout_prep(layer):
    if isinstance(layer, nn.Dropout):
        layer.rng = np.random.default_rng(1234)


@pytest.mark.parametrize("seed", range(3))
def test_gradient_check_all_layer_kinds(seed):
    rng = np.random.default_rng(seed)
    for layer, shape in layer_zoo(rng):
        x = away_from_kinks(rng, shape)
        err = check_layer_gradients(layer, x, rng, prep=dropout_prep)
        assert err <= TOL, f"{layer.name}: rel err {err:.2e}"


def test_leaky_relu_paper_slope():
    layer = nn.LeakyReLU(0.3)
    assert layer.forward(np.array([[-1.0]]))[0, 0] == pytest.approx(-0.3)


def test_softmax_uniform():
    probs = nn.Softmax().forward(np.zeros((1, 5)))
    assert np.allclose(probs, 0.2)


def test_softmax_rows_valid():
    rng = np.random.default_rng(0)
    probs = nn.Softmax().forward(rng.normal(size=(20, 7)) * 10)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)
    assert np.all((probs > 0) & (probs < 1))


def test_dense_identity():
    rng = np.random.default_rng(0)
    layer = nn.Dense(4, 4, rng)
    layer.w[...] = np.eye(4)
    layer.b[...] = 0.0
    x = rng.normal(size=(3, 4))
    assert np.allclose(layer.forward(x), x)


def test_dense_l2_gradient_term():
    rng = np.random.default_rng(0)
    lam = 5e-5
    layer = nn.Dense(3, 2, rng, l2=lam)
    x = rng.normal(size=(4, 3))
    layer.forward(x, train=True)
    g = layer.backward(np.zeros((4, 2)))
    assert np.allclose(layer.gw, 2 * lam * layer.w)
    assert np.allclose(g, 0.0)
    assert layer.l2_penalty() == pytest.approx(lam * np.sum(layer.w ** 2))


def test_scalar_chain_rule():
    rng = np.random.default_rng(0)
    layer = nn.Dense(1, 1, rng)
    layer.w[...] = 3.0
    layer.b[...] = 0.0
    x = np.array([[2.0]])
    layer.forward(x, train=True)
    layer.backward(np.array([[1.0]]))
    assert layer.gw[0, 0] == pytest.approx(2.0)


def test_backward_without_forward_rejected():
    rng = np.random.default_rng(0)
    layer = nn.Dense(3, 2, rng)
    with pytest.raises(UsageError):
        layer.backward(np.zeros((1, 2)))
    layer.forward(np.zeros((1, 3)), train=False)  # eval mode caches nothing
    with pytest.raises(UsageError):
        layer.backward(np.zeros((1, 2)))


def test_shape_error_names_layer():
    rng = np.random.default_rng(0)
    with pytest.raises(ShapeError, match="dense"):
        nn.Dense(3, 2, rng).forward(np.zeros((1, 5)))
    with pytest.raises(ShapeError, match="pointwise"):
        nn.PointwiseConv1d(3, 2, rng).forward(np.zeros((1, 5, 4)))


def test_eval_forward_bitwise_deterministic():
    rng = np.random.default_rng(0)
    model = nn.Sequential([nn.Dense(8, 8, rng), nn.BatchNorm(8),
                           nn.Dropout(0.5), nn.LeakyReLU(0.3),
                           nn.Dense(8, 3, rng), nn.Softmax()])
    x = rng.normal(size=(5, 8))
    a = model.forward(x, train=False)
    b = model.forward(x, train=False)
    assert np.array_equal(a, b)


def test_dropout_train_statistics():
    rng = np.random.default_rng(0)
    p = 0.3
    layer = nn.Dropout(p, seed=5)
    x = np.ones((200, 200))
    y = layer.forward(x, train=True)
    frac = np.mean(y == 0.0)
    # binomial CI: 40k draws, sd ~ 0.0023
    assert abs(frac - p) < 0.01
    survivors = y[y != 0]
    assert np.allclose(survivors, 1.0 / (1 - p))
    assert np.array_equal(layer.forward(x, train=False), x)


def test_batchnorm_modes():
    rng = np.random.default_rng(0)
    layer = nn.BatchNorm(3)
    x = rng.normal(loc=2.0, scale=3.0, size=(64, 3))
    y = layer.forward(x, train=True)
    assert np.allclose(y.mean(axis=0), 0.0, atol=1e-9)
    assert np.allclose(y.std(axis=0), 1.0, atol=1e-3)
    y_eval = layer.forward(x, train=False)
    assert not np.allclose(y, y_eval)  # eval uses running stats


def test_adam_schedule_paper_values():
    cfg = nn.OptimizerConfig(lr0=1e-3, decay_factor=0.1, decay_every=50)
    assert cfg.lr_at(0) == pytest.approx(1e-3)
    assert cfg.lr_at(49) == pytest.approx(1e-3)
    assert cfg.lr_at(50) == pytest.approx(1e-4)
    assert cfg.lr_at(100) == pytest.approx(1e-5)
    assert cfg.lr_at(150) == pytest.approx(1e-6)


def test_adam_zero_gradient_keeps_weights():
    w = {"w": np.array([1.0, -2.0])}
    opt = nn.Adam(w, nn.OptimizerConfig())
    opt.step({"w": np.zeros(2)})
    assert np.array_equal(w["w"], np.array([1.0, -2.0]))


def test_adam_matches_hand_recurrence():
    cfg = nn.OptimizerConfig(lr0=0.01, beta1=0.9, beta2=0.999, eps=1e-8,
                             decay_factor=1.0, decay_every=1)
    w = {"w": np.array([0.5])}
    opt = nn.Adam(w, cfg)
    grads = [0.3, -0.2, 0.7]
    m = v = 0.0
    expect = 0.5
    for t, g in enumerate(grads, start=1):
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        mhat = m / (1 - 0.9 ** t)
        vhat = v / (1 - 0.999 ** t)
        expect -= 0.01 * mhat / (np.sqrt(vhat) + 1e-8)
        opt.step({"w": np.array([g])})
        assert w["w"][0] == pytest.approx(expect, abs=1e-12)


def test_optimizer_config_validation():
    with pytest.raises(ConfigError):
        nn.OptimizerConfig(lr0=-1.0)
    with pytest.raises(ConfigError):
        nn.OptimizerConfig(beta1=1.5)


def test_cross_entropy_perfect_and_uniform():
    probs = np.array([[1.0, 0.0, 0.0]])
    loss, _ = nn.cross_entropy(probs, np.array([0]))
    assert loss == pytest.approx(0.0, abs=1e-9)
    uniform = np.full((1, 5), 0.2)
    loss, _ = nn.cross_entropy(uniform, np.array([2]))
    assert loss == pytest.approx(np.log(5.0))


def test_cross_entropy_batch_mean():
    p = np.array([[0.7, 0.3], [0.2, 0.8]])
    l0, _ = nn.cross_entropy(p[:1], np.array([0]))
    l1, _ = nn.cross_entropy(p[1:], np.array([1]))
    lb, grad = nn.cross_entropy(p, np.array([0, 1]))
    assert lb == pytest.approx((l0 + l1) / 2)
    assert np.allclose(grad, (p - np.eye(2)[[0, 1]]) / 2)


def test_cross_entropy_clamps_zero_prob():
    probs = np.array([[0.0, 1.0]])
    loss, _ = nn.cross_entropy(probs, np.array([0]))
    assert np.isfinite(loss)
    assert loss == pytest.approx(-np.log(1e-12))


def test_cross_entropy_rejects_non_softmax():
    with pytest.raises(ShapeError):
        nn.cross_entropy(np.array([[0.9, 0.9]]), np.array([0]))


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 6), k=st.integers(2, 5), seed=st.integers(0, 999))
def test_softmax_property_rows_sum_to_one(n, k, seed):
    rng = np.random.default_rng(seed)
    probs = nn.Softmax().forward(rng.normal(size=(n, k)) * 5)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)
    assert np.all(probs > 0)


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {"a.kernel": rng.normal(size=(3, 4)),
               "b.bias": rng.normal(size=7).astype(np.float32),
               "c.idx": np.arange(5, dtype=np.int64)}
    path = tmp_path / "model.fgc"
    nn.save_checkpoint(path, tensors, {"arch": "test", "n": 3})
    loaded, config = nn.load_checkpoint(path)
    assert config == {"arch": "test", "n": 3}
    for k, v in tensors.items():
        assert loaded[k].dtype == v.dtype
        assert np.array_equal(loaded[k], v)
    assert len(nn.file_sha256(path)) == 64


def test_assign_tensors_shape_guard(tmp_path):
    target = {"w": np.zeros((2, 2))}
    with pytest.raises(Exception):
        nn.assign_tensors(target, {"w": np.zeros((3, 3))})
    nn.assign_tensors(target, {"w": np.ones((2, 2))})
    assert np.all(target["w"] == 1.0)


def test_sequential_param_naming_stable():
    rng = np.random.default_rng(0)
    model = nn.Sequential([nn.Dense(4, 3, rng), nn.BatchNorm(3)])
    names = sorted(model.params())
    assert names == ["00_dense.bias", "00_dense.kernel",
                     "01_batch_norm.beta", "01_batch_norm.gamma"]
    assert sorted(model.state()) == ["01_batch_norm.running_mean",
                                     "01_batch_norm.running_var"]
