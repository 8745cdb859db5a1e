"""Per-user prediction head over (negative + custom gestures).

A two-layer network on 120-dim embeddings: dense(120->hidden) with leaky
ReLU, L2 kernel regularizer and dropout, then dense(hidden->K+1) softmax.
Trained from scratch whenever the custom gesture set changes; the
backbone is never touched. Training minimizes
    cross_entropy + l2_penalty + adv_loss_weight * cross_entropy(FGSM(x))
with inverse-frequency class weights against the negative-heavy corpus.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import nncore as nn
from .backbone import EMBEDDING_DIM
from .errors import ConfigError, DataError
from .synthesis import DeltaEncoder, DeltaVectorBank, synthesize

NEGATIVE_NAME = "Negative"
GATE_THRESHOLD = 0.80


@dataclass(frozen=True)
class HeadConfig:
    hidden_units: int = 64
    alpha: float = 0.3
    l2: float = 5e-5
    dropout_p: float = 0.5
    adv_loss_weight: float = 0.2
    adv_step: float = 0.2
    epochs: int = 100
    lr0: float = 1e-3
    batch: int = 128
    val_frac: float = 0.1

    def __post_init__(self):
        if self.adv_step <= 0:
            raise ConfigError("adv_step must be positive")


@dataclass
class TrainingCorpus:
    """Embeddings labeled in head class space: 0 = negative, 1..K custom."""

    embeddings: np.ndarray
    labels: np.ndarray
    class_names: tuple  # (NEGATIVE_NAME, custom_1, ..., custom_K)

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.class_names[0] != NEGATIVE_NAME:
            raise ConfigError("class 0 must be the negative class")
        k = len(self.class_names) - 1
        if k < 1:
            raise ConfigError("need at least one custom gesture class")
        for c in range(1, k + 1):
            if not np.any(self.labels == c):
                raise DataError(f"no positives for class {self.class_names[c]}")


def assemble_corpus(custom: dict, negatives: np.ndarray) -> TrainingCorpus:
    """custom maps gesture name -> embedding rows (registration order)."""
    names = (NEGATIVE_NAME,) + tuple(custom)
    embs = [np.asarray(negatives, np.float32).reshape(-1, EMBEDDING_DIM)]
    labels = [np.zeros(len(embs[0]), dtype=np.int64)]
    for c, (name, rows) in enumerate(custom.items(), start=1):
        rows = np.asarray(rows, np.float32).reshape(-1, EMBEDDING_DIM)
        embs.append(rows)
        labels.append(np.full(len(rows), c, dtype=np.int64))
    return TrainingCorpus(np.concatenate(embs), np.concatenate(labels), names)


class PredictionHead:
    def __init__(self, class_names: tuple, config: HeadConfig | None = None,
                 seed: int = 0, dtype=np.float32):
        self.class_names = tuple(class_names)
        self.config = config or HeadConfig()
        self.seed = seed
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 67]))
        cfg = self.config
        self._dense1 = nn.Dense(EMBEDDING_DIM, cfg.hidden_units, rng,
                                l2=cfg.l2, dtype=dtype)
        self.net = nn.Sequential([
            self._dense1,
            nn.LeakyReLU(cfg.alpha),
            nn.Dropout(cfg.dropout_p, seed=seed * 97 + 5),
            nn.Dense(cfg.hidden_units, len(self.class_names), rng, dtype=dtype),
            nn.Softmax(),
        ])

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def predict(self, embeddings: np.ndarray, batch: int = 1024) -> np.ndarray:
        emb = np.asarray(embeddings, self.dtype)
        if emb.ndim != 2 or emb.shape[1] != EMBEDDING_DIM:
            raise DataError(f"expected (n, {EMBEDDING_DIM}), got {emb.shape}")
        return np.concatenate([self.net.forward(emb[i:i + batch], train=False)
                               for i in range(0, len(emb), batch)]) \
            if len(emb) else np.empty((0, self.n_classes))

    def save(self, path: str | Path) -> None:
        tensors = dict(self.net.params())
        nn.save_checkpoint(path, tensors, {
            "arch": "prediction-head-v1", "seed": self.seed,
            "dtype": self.dtype.name, "classes": list(self.class_names),
            "hidden_units": self.config.hidden_units})

    @classmethod
    def load(cls, path: str | Path) -> "PredictionHead":
        tensors, config = nn.load_checkpoint(path)
        head = cls(tuple(config["classes"]),
                   HeadConfig(hidden_units=int(config["hidden_units"])),
                   seed=int(config.get("seed", 0)),
                   dtype=config.get("dtype", "float32"))
        nn.assign_tensors(head.net.params(), tensors)
        return head


def adversarial_examples(head: PredictionHead, embeddings: np.ndarray,
                         labels: np.ndarray,
                         step: float | None = None) -> np.ndarray:
    """FGSM sign-ascent on the inputs: x + step * sign(dLoss/dx)."""
    step = head.config.adv_step if step is None else step
    x = np.asarray(embeddings, head.dtype)
    probs = head.net.forward(x, train=True)
    _, grad = nn.cross_entropy(probs, labels)
    gx = head.net.backward(grad.astype(head.dtype), skip_last=True)
    return x + step * np.sign(gx).astype(head.dtype)


def train_head(corpus: TrainingCorpus, cfg: HeadConfig | None = None,
               seed: int = 0, verbose: bool = False) -> tuple:
    """Returns (head, log). Loss components are logged per epoch so the
    combined loss decomposes exactly as ce + l2 + adv_loss_weight*ce_adv."""
    cfg = cfg or HeadConfig()
    head = PredictionHead(corpus.class_names, cfg, seed=seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 71]))

    n = len(corpus.embeddings)
    order = rng.permutation(n)
    n_val = max(1, int(round(cfg.val_frac * n)))
    val_idx, train_idx = order[:n_val], order[n_val:]
    x_all, y_all = corpus.embeddings, corpus.labels

    counts = np.bincount(y_all[train_idx], minlength=head.n_classes)
    counts = np.maximum(counts, 1)
    weights = (len(train_idx) / (head.n_classes * counts)).astype(np.float32)

    optimizer = nn.Adam(head.net.params(), nn.OptimizerConfig(lr0=cfg.lr0))
    log = {"epochs": [], "best_epoch": -1, "best_val_acc": -1.0,
           "class_weights": weights.tolist()}
    best = None

    for epoch in range(cfg.epochs):
        perm = rng.permutation(len(train_idx))
        comp = {"ce": [], "l2": [], "ce_adv": [], "total": []}
        for i in range(0, len(perm), cfg.batch):
            idx = train_idx[perm[i:i + cfg.batch]]
            x, y = x_all[idx], y_all[idx]
            probs = head.net.forward(x, train=True)
            ce, grad = nn.cross_entropy(probs, y, class_weights=weights)
            gx = head.net.backward(grad.astype(head.dtype), skip_last=True)
            g_clean = {k: v.copy() for k, v in head.net.grads().items()}
            x_adv = x + cfg.adv_step * np.sign(gx).astype(head.dtype)

            # adversarial pass: CE gradient only (regularizer already counted)
            head._dense1.l2 = 0.0
            probs_adv = head.net.forward(x_adv, train=True)
            ce_adv, grad_adv = nn.cross_entropy(probs_adv, y,
                                                class_weights=weights)
            head.net.backward(grad_adv.astype(head.dtype), skip_last=True)
            head._dense1.l2 = cfg.l2

            g_adv = head.net.grads()
            total_grads = {k: g_clean[k] + cfg.adv_loss_weight * g_adv[k]
                           for k in g_clean}
            optimizer.step(total_grads, epoch)

            l2_pen = head.net.l2_penalty()
            comp["ce"].append(ce)
            comp["l2"].append(l2_pen)
            comp["ce_adv"].append(ce_adv)
            comp["total"].append(ce + l2_pen + cfg.adv_loss_weight * ce_adv)
        val_probs = head.predict(x_all[val_idx])
        val_acc = float(np.mean(val_probs.argmax(axis=1) == y_all[val_idx]))
        entry = {k: float(np.mean(v)) for k, v in comp.items()}
        entry.update({"epoch": epoch, "val_acc": val_acc})
        log["epochs"].append(entry)
        if verbose:
            print(f"head epoch {epoch:3d} total {entry['total']:.4f} "
                  f"val_acc {val_acc:.3f}")
        if val_acc > log["best_val_acc"]:
            log["best_val_acc"] = val_acc
            log["best_epoch"] = epoch
            best = {k: v.copy() for k, v in head.net.params().items()}
    if best is not None:
        nn.assign_tensors(head.net.params(), best)
    return head, log


def gate_accuracy(head: PredictionHead, test_embeddings: np.ndarray,
                  test_labels: np.ndarray) -> tuple:
    """Accuracy on a freshly synthesized test set; pass iff >= 0.80."""
    if len(test_embeddings) == 0:
        raise DataError("gate test set is empty")
    probs = head.predict(test_embeddings)
    acc = float(np.mean(probs.argmax(axis=1) == np.asarray(test_labels)))
    verdict = "pass" if acc >= GATE_THRESHOLD else "offer_more_shots"
    return acc, verdict


def synthesize_gate_set(head: PredictionHead, encoder: DeltaEncoder,
                        bank: DeltaVectorBank, embeddings: np.ndarray,
                        labels: np.ndarray, seed: int) -> tuple:
    """Post-training synthetic test set from a fresh RNG stream (disjoint
    from the training synthesis draws by seed derivation)."""
    return synthesize(encoder, bank, embeddings, labels,
                      seed=seed * 2 + 999_983)
