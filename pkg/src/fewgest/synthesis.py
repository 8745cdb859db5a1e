"""Embedding-space sample synthesis via a delta-encoder.

The encoder compresses one embedding into a 5-number delta vector; the
decoder reconstructs it from (delta, reference embedding). Training pairs
come from the same gesture AND the same user, so the delta captures
within-user motion variance. At customization time, deltas harvested from
held-out users are replayed onto the new gesture's embeddings to
synthesize 10x more samples per input.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nncore as nn
from .backbone import EMBEDDING_DIM
from .errors import DataError, UsageError

DELTA_DIM = 5
HIDDEN = 4096
SYNTH_FACTOR = 10
RANDOM_DELTA_P = 0.1


class DeltaEncoder:
    def __init__(self, seed: int = 0, dtype=np.float32):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 23]))
        self.dtype = np.dtype(dtype)
        self.seed = seed
        self.encoder = nn.Sequential([
            nn.Dense(EMBEDDING_DIM, HIDDEN, rng, dtype=dtype),
            nn.LeakyReLU(0.3),
            nn.Dense(HIDDEN, DELTA_DIM, rng, dtype=dtype),
        ])
        self.decoder = nn.Sequential([
            nn.Dense(DELTA_DIM + EMBEDDING_DIM, HIDDEN, rng, dtype=dtype),
            nn.LeakyReLU(0.3),
            nn.Dense(HIDDEN, EMBEDDING_DIM, rng, dtype=dtype),
        ])
        self.trained = False

    def encode(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        return self.encoder.forward(np.asarray(x, self.dtype), train)

    def decode(self, delta: np.ndarray, ref: np.ndarray,
               train: bool = False) -> np.ndarray:
        z = np.concatenate([np.asarray(delta, self.dtype),
                            np.asarray(ref, self.dtype)], axis=1)
        return self.decoder.forward(z, train)

    def reconstruct(self, x: np.ndarray, ref: np.ndarray,
                    train: bool = False) -> np.ndarray:
        return self.decode(self.encode(x, train), ref, train)

    def params(self):
        return {**{f"encoder.{k}": v for k, v in self.encoder.params().items()},
                **{f"decoder.{k}": v for k, v in self.decoder.params().items()}}

    def grads(self):
        return {**{f"encoder.{k}": v for k, v in self.encoder.grads().items()},
                **{f"decoder.{k}": v for k, v in self.decoder.grads().items()}}

    def save(self, path: str | Path) -> None:
        nn.save_checkpoint(path, self.params(),
                           {"arch": "delta-encoder-v1", "seed": self.seed,
                            "dtype": self.dtype.name, "delta_dim": DELTA_DIM,
                            "trained": self.trained})

    @classmethod
    def load(cls, path: str | Path) -> "DeltaEncoder":
        tensors, config = nn.load_checkpoint(path)
        enc = cls(seed=int(config.get("seed", 0)),
                  dtype=config.get("dtype", "float32"))
        nn.assign_tensors(enc.params(), tensors)
        enc.trained = bool(config.get("trained", True))
        return enc


@dataclass
class DeltaVectorBank:
    vectors: np.ndarray                      # (n, 5)
    source: str = "held_out_pairs"
    std: np.ndarray = field(default=None)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != DELTA_DIM:
            raise DataError(f"bank must be (n, {DELTA_DIM})")
        if len(self.vectors) == 0:
            raise DataError("delta bank is empty")
        if not np.all(np.isfinite(self.vectors)):
            raise DataError("delta bank contains non-finite values")
        if self.std is None:
            self.std = self.vectors.std(axis=0)

    def save(self, path: str | Path) -> None:
        nn.save_checkpoint(path, {"vectors": self.vectors, "std": self.std},
                           {"arch": "delta-bank-v1", "source": self.source})

    @classmethod
    def load(cls, path: str | Path) -> "DeltaVectorBank":
        tensors, config = nn.load_checkpoint(path)
        return cls(tensors["vectors"], config.get("source", "file"),
                   tensors["std"])


def group_indices(labels: np.ndarray, user_ids: np.ndarray,
                  min_size: int = 2) -> dict:
    """(user, gesture) -> row indices, gesture classes only (label != 0)."""
    groups = {}
    for i, (lbl, uid) in enumerate(zip(labels, user_ids)):
        if lbl == 0:
            continue
        groups.setdefault((int(uid), int(lbl)), []).append(i)
    return {k: np.array(v) for k, v in groups.items() if len(v) >= min_size}


def _sample_pairs(groups: dict, n_pairs: int, rng) -> tuple:
    keys = list(groups)
    gi = rng.integers(0, len(keys), size=n_pairs)
    a = np.empty(n_pairs, dtype=np.int64)
    b = np.empty(n_pairs, dtype=np.int64)
    for j, g in enumerate(gi):
        rows = groups[keys[g]]
        i1, i2 = rng.choice(len(rows), size=2, replace=False)
        a[j], b[j] = rows[i1], rows[i2]
    return a, b


def train_delta_encoder(embeddings: np.ndarray, labels: np.ndarray,
                        user_ids: np.ndarray, epochs: int = 200,
                        batch: int = 256, lr0: float = 1e-3,
                        pairs_per_epoch: int | None = None,
                        seed: int = 0, verbose: bool = False) -> tuple:
    """MSE-trained delta-encoder on same-user same-gesture pairs.

    Learning rate halves every 30 epochs; the epoch with the best
    validation MSE is kept. Returns (encoder, log dict).
    """
    groups = group_indices(labels, user_ids)
    if len(groups) < 2:
        raise DataError("need >= 2 (user, gesture) groups with >= 2 samples")
    emb = np.asarray(embeddings, dtype=np.float32)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 31]))
    enc = DeltaEncoder(seed=seed)
    opt_cfg = nn.OptimizerConfig(lr0=lr0, decay_factor=0.5, decay_every=30)
    optimizer = nn.Adam(enc.params(), opt_cfg)

    n_pairs = pairs_per_epoch or min(5000, 4 * len(emb))
    n_val = max(32, n_pairs // 10)
    va, vb = _sample_pairs(groups, n_val, rng)
    log = {"epochs": [], "best_epoch": -1, "best_val_mse": np.inf}
    best = None

    for epoch in range(epochs):
        a, b = _sample_pairs(groups, n_pairs, rng)
        losses = []
        for i in range(0, n_pairs, batch):
            xi, xr = emb[a[i:i + batch]], emb[b[i:i + batch]]
            delta = enc.encode(xi, train=True)
            recon = enc.decode(delta, xr, train=True)
            loss, grad = nn.mse(recon, xi)
            gz = enc.decoder.backward(grad.astype(np.float32))
            enc.encoder.backward(np.ascontiguousarray(gz[:, :DELTA_DIM]))
            optimizer.step(enc.grads(), epoch)
            losses.append(loss)
        val_mse = float(nn.mse(enc.reconstruct(emb[va], emb[vb]), emb[va])[0])
        log["epochs"].append({"epoch": epoch, "loss": float(np.mean(losses)),
                              "val_mse": val_mse, "lr": opt_cfg.lr_at(epoch)})
        if verbose:
            print(f"delta epoch {epoch:3d} loss {np.mean(losses):.5f} "
                  f"val {val_mse:.5f}")
        if val_mse < log["best_val_mse"]:
            log["best_val_mse"] = val_mse
            log["best_epoch"] = epoch
            best = {k: v.copy() for k, v in enc.params().items()}
    if best is not None:
        nn.assign_tensors(enc.params(), best)
    enc.trained = True
    return enc, log


def harvest_delta_bank(encoder: DeltaEncoder, embeddings: np.ndarray,
                       labels: np.ndarray, user_ids: np.ndarray,
                       size: int = 1000, seed: int = 0) -> DeltaVectorBank:
    """Delta vectors from same-user same-gesture pairs of a held-out set."""
    if not encoder.trained:
        raise UsageError("delta encoder must be trained before harvesting")
    if len(embeddings) == 0:
        raise DataError("held-out embedding set is empty")
    groups = group_indices(labels, user_ids)
    if not groups:
        raise DataError("no (user, gesture) group with >= 2 samples")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 41]))
    a, _ = _sample_pairs(groups, size, rng)
    deltas = encoder.encode(np.asarray(embeddings, np.float32)[a])
    return DeltaVectorBank(deltas)


def synthesize(encoder: DeltaEncoder, bank: DeltaVectorBank,
               embeddings: np.ndarray, labels: np.ndarray,
               factor: int = SYNTH_FACTOR, seed: int = 0,
               p_random: float = RANDOM_DELTA_P) -> tuple:
    """factor-x synthetic embeddings; each input acts as the reference for
    `factor` decoded deltas (bank draws, or scaled N(0, I) with probability
    p_random). Outputs inherit the reference's label. Returns
    (synthetic_embeddings, synthetic_labels)."""
    if not encoder.trained:
        raise UsageError("delta encoder must be trained before synthesis")
    emb = np.asarray(embeddings, dtype=np.float32)
    labels = np.asarray(labels)
    if len(emb) == 0:
        return np.empty((0, EMBEDDING_DIM), np.float32), labels[:0]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 53]))
    n = len(emb)
    refs = np.repeat(emb, factor, axis=0)
    out_labels = np.repeat(labels, factor, axis=0)
    picks = rng.integers(0, len(bank.vectors), size=n * factor)
    deltas = bank.vectors[picks].astype(np.float32)
    random_mask = rng.random(n * factor) < p_random
    n_rand = int(random_mask.sum())
    if n_rand:
        deltas[random_mask] = (rng.standard_normal((n_rand, DELTA_DIM))
                               * bank.std).astype(np.float32)
    out = np.concatenate([encoder.decode(deltas[i:i + 1024], refs[i:i + 1024])
                          for i in range(0, n * factor, 1024)])
    return out, out_labels
