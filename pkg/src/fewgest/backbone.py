"""Pre-trained gesture model: per-channel MBConv towers feeding a 120-dim
embedding, and a dense 80/40/20/10/5 inference stack over it.

The extractor/inference split is the transfer boundary: customization
attaches per-user heads to the embedding and never touches these weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nncore as nn
from .errors import ConfigError, DataError, ShapeError
from .signal import N_CHANNELS, N_ROWS, WINDOW_SAMPLES

BASE_CLASSES = ("Negative", "Clench", "DoubleClench", "Pinch", "DoublePinch")
NEGATIVE = 0
EMBEDDING_DIM = 120

# tower widths chosen to land near the ~106k-parameter budget
_TOWER_CH = (24, 72)
_SEPARABLE_OUT = 24


@dataclass
class LabeledWindowSet:
    """Window views with labels, per-window user provenance and split tags.

    Splits partition users, never windows; violating that raises.
    """

    windows: list
    labels: np.ndarray
    user_ids: np.ndarray
    splits: np.ndarray  # 'train' | 'val' | 'test' per window
    class_names: tuple = BASE_CLASSES

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.user_ids = np.asarray(self.user_ids, dtype=np.int64)
        self.splits = np.asarray(self.splits)
        n = len(self.windows)
        if not (len(self.labels) == len(self.user_ids) == len(self.splits) == n):
            raise DataError("window/label/user/split lengths differ")
        seen = {}
        for uid, split in zip(self.user_ids, self.splits):
            if seen.setdefault(int(uid), split) != split:
                raise DataError(f"user {uid} appears in two splits")

    def __len__(self):
        return len(self.windows)

    def subset(self, split: str) -> "LabeledWindowSet":
        idx = np.flatnonzero(self.splits == split)
        return LabeledWindowSet([self.windows[i] for i in idx],
                                self.labels[idx], self.user_ids[idx],
                                self.splits[idx], self.class_names)

    def stack(self, idx=None) -> np.ndarray:
        sel = range(len(self.windows)) if idx is None else idx
        return np.stack([self.windows[i] for i in sel]).astype(np.float64)


class BackboneModel:
    """extractor: windows (n, 6, 4, 100) -> embeddings (n, 120);
    inference: embeddings -> 5-class probabilities.

    The six per-IMU-channel towers have independent weights, realized as
    grouped convolutions (groups=6, no cross-channel mixing before the
    concat stage). Production dtype is float32; tests build float64.
    """

    def __init__(self, seed: int = 0, dtype=np.float32):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
        c1, c2 = _TOWER_CH
        concat = N_CHANNELS * c2
        self.seed = seed
        self.dtype = np.dtype(dtype)
        self.extractor = nn.Sequential([
            nn.Reshape((N_CHANNELS * N_ROWS, WINDOW_SAMPLES)),
            nn.InvertedResidual(N_ROWS, c1, rng, expansion=4, kernel=5,
                                stride=2, groups=N_CHANNELS, dtype=dtype),
            nn.InvertedResidual(c1, c2, rng, expansion=4, kernel=5,
                                stride=2, groups=N_CHANNELS, dtype=dtype),
            nn.SeparableConv1d(concat, _SEPARABLE_OUT, 5, rng, stride=2,
                               dtype=dtype),
            nn.BatchNorm(_SEPARABLE_OUT, dtype=dtype),
            nn.ReLU(),
            nn.MaxPool1d(5, 2),
            nn.Flatten(),
        ])
        drop = iter(range(100, 200))
        dims = (EMBEDDING_DIM, 80, 40, 20, 10, len(BASE_CLASSES))
        layers = []
        for i in range(len(dims) - 2):
            layers += [nn.Dense(dims[i], dims[i + 1], rng, dtype=dtype),
                       nn.BatchNorm(dims[i + 1], dtype=dtype), nn.ReLU(),
                       nn.Dropout(0.5, seed=seed * 1000 + next(drop))]
        layers += [nn.Dense(dims[-2], dims[-1], rng, dtype=dtype), nn.Softmax()]
        self.inference = nn.Sequential(layers)

    # -- parameter plumbing -------------------------------------------------
    def params(self):
        return {**{f"extractor.{k}": v for k, v in self.extractor.params().items()},
                **{f"inference.{k}": v for k, v in self.inference.params().items()}}

    def grads(self):
        return {**{f"extractor.{k}": v for k, v in self.extractor.grads().items()},
                **{f"inference.{k}": v for k, v in self.inference.grads().items()}}

    def tensors(self):
        out = dict(self.params())
        out.update({f"extractor.{k}": v for k, v in self.extractor.state().items()})
        out.update({f"inference.{k}": v for k, v in self.inference.state().items()})
        return out

    def parameter_count(self) -> int:
        return int(sum(v.size for v in self.params().values()))

    # -- inference ----------------------------------------------------------
    def _check_input(self, x):
        if x.ndim != 4 or x.shape[1:] != (N_CHANNELS, N_ROWS, WINDOW_SAMPLES):
            raise ShapeError(
                f"expected (n, {N_CHANNELS}, {N_ROWS}, {WINDOW_SAMPLES}), got {x.shape}")

    def embed(self, x: np.ndarray, batch: int = 512) -> np.ndarray:
        """Eval-mode embeddings, deterministic given weights."""
        x = np.asarray(x, dtype=self.dtype)
        self._check_input(x)
        return np.concatenate([self.extractor.forward(x[i:i + batch], train=False)
                               for i in range(0, len(x), batch)]) \
            if len(x) else np.empty((0, EMBEDDING_DIM))

    def predict_base(self, x: np.ndarray, batch: int = 512) -> np.ndarray:
        """5-class probabilities in BASE_CLASSES order."""
        emb = self.embed(x, batch)
        return self.predict_from_embedding(emb, batch)

    def predict_from_embedding(self, emb: np.ndarray, batch: int = 512) -> np.ndarray:
        emb = np.asarray(emb, dtype=self.dtype)
        return np.concatenate([self.inference.forward(emb[i:i + batch], train=False)
                               for i in range(0, len(emb), batch)]) \
            if len(emb) else np.empty((0, len(BASE_CLASSES)))

    # -- persistence ----------------------------------------------------------
    def save(self, path: str | Path) -> None:
        nn.save_checkpoint(path, self.tensors(),
                           {"arch": "imu-backbone-v1", "seed": self.seed,
                            "dtype": self.dtype.name,
                            "classes": list(BASE_CLASSES),
                            "embedding_dim": EMBEDDING_DIM})

    @classmethod
    def load(cls, path: str | Path) -> "BackboneModel":
        tensors, config = nn.load_checkpoint(path)
        model = cls(seed=int(config.get("seed", 0)),
                    dtype=config.get("dtype", "float32"))
        nn.assign_tensors(model.tensors(), tensors)
        return model


def build_backbone(seed: int = 0, dtype=np.float32) -> BackboneModel:
    return BackboneModel(seed=seed, dtype=dtype)


@dataclass
class TrainLog:
    epochs: list = field(default_factory=list)  # per-epoch dicts
    best_epoch: int = -1
    best_val_acc: float = -1.0


def window_accuracy(model: BackboneModel, data: LabeledWindowSet,
                    batch: int = 512) -> float:
    if len(data) == 0:
        raise DataError("empty evaluation set")
    correct = 0
    for i in range(0, len(data), batch):
        idx = range(i, min(i + batch, len(data)))
        probs = model.predict_base(data.stack(idx))
        correct += int(np.sum(probs.argmax(axis=1) == data.labels[list(idx)]))
    return correct / len(data)


def train_backbone(data: LabeledWindowSet,
                   opt: nn.OptimizerConfig | None = None,
                   epochs: int = 200, batch_size: int = 256,
                   seed: int = 0, model: BackboneModel | None = None,
                   balance_classes: bool = False,
                   verbose: bool = False):
    """Adam + cross-entropy over the train split; keeps the epoch with the
    best validation window accuracy. balance_classes reweights the loss by
    inverse class frequency (useful at small corpus scale). Returns
    (model, TrainLog)."""
    opt = opt or nn.OptimizerConfig()
    train = data.subset("train")
    val = data.subset("val")
    if len(train) == 0 or len(val) == 0:
        raise DataError("need non-empty train and val splits")
    if len(np.unique(train.labels)) < 2:
        raise DataError("training data must contain at least two classes")
    weights = None
    if balance_classes:
        counts = np.maximum(np.bincount(train.labels,
                                        minlength=len(data.class_names)), 1)
        weights = np.sqrt(len(train) / (len(counts) * counts)).astype(np.float32)

    model = model or build_backbone(seed)
    params = model.params()
    optimizer = nn.Adam(params, opt)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 77]))
    log = TrainLog()
    best = None

    for epoch in range(epochs):
        order = rng.permutation(len(train))
        losses = []
        for i in range(0, len(order), batch_size):
            idx = order[i:i + batch_size]
            x = train.stack(idx).astype(model.dtype)
            y = train.labels[idx]
            emb = model.extractor.forward(x, train=True)
            probs = model.inference.forward(emb, train=True)
            loss, grad = nn.cross_entropy(probs, y, class_weights=weights)
            g = model.inference.backward(grad, skip_last=True)
            model.extractor.backward(g)
            optimizer.step(model.grads(), epoch)
            losses.append(loss)
        val_acc = window_accuracy(model, val)
        entry = {"epoch": epoch, "loss": float(np.mean(losses)),
                 "val_acc": val_acc, "lr": opt.lr_at(epoch)}
        log.epochs.append(entry)
        if verbose:
            print(f"epoch {epoch:3d} loss {entry['loss']:.4f} "
                  f"val_acc {val_acc:.3f} lr {entry['lr']:.2e}")
        if val_acc > log.best_val_acc:
            log.best_val_acc = val_acc
            log.best_epoch = epoch
            best = {k: v.copy() for k, v in model.tensors().items()}
    if best is not None:
        nn.assign_tensors(model.tensors(), best)
    return model, log


def l2_normalize(emb: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    norms = np.linalg.norm(emb, axis=-1, keepdims=True)
    return emb / np.maximum(norms, eps)
