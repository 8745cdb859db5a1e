import numpy as np
import pytest

from fewgest import nncore as nn
from fewgest.backbone import EMBEDDING_DIM
from fewgest.errors import DataError, UsageError
from fewgest.synthesis import (DELTA_DIM, DeltaEncoder, DeltaVectorBank,
                               _sample_pairs, group_indices,
                               harvest_delta_bank, synthesize,
                               train_delta_encoder)


def blob_corpus(n_users=6, n_gestures=3, per_group=12, seed=0):
    """Synthetic embeddings: one tight Gaussian blob per (user, gesture)."""
    rng = np.random.default_rng(seed)
    emb, labels, users = [], [], []
    for u in range(n_users):
        for g in range(1, n_gestures + 1):
            center = rng.normal(0, 1.0, EMBEDDING_DIM)
            emb.append(center + rng.normal(0, 0.1, (per_group, EMBEDDING_DIM)))
            labels += [g] * per_group
            users += [u] * per_group
    return (np.concatenate(emb).astype(np.float32), np.array(labels),
            np.array(users))


@pytest.fixture(scope="module")
def trained():
    emb, labels, users = blob_corpus()
    enc, log = train_delta_encoder(emb, labels, users, epochs=25,
                                   pairs_per_epoch=1024, seed=0)
    return enc, log, (emb, labels, users)


def test_architecture_shapes():
    enc = DeltaEncoder(seed=0)
    x = np.random.default_rng(0).normal(size=(4, EMBEDDING_DIM)).astype(np.float32)
    delta = enc.encode(x)
    assert delta.shape == (4, DELTA_DIM)
    recon = enc.decode(delta, x)
    assert recon.shape == (4, EMBEDDING_DIM)
    # bottleneck: the information path from the encoded sample is 5 numbers
    assert enc.encoder.layers[-1].w.shape[1] == DELTA_DIM
    assert enc.decoder.layers[0].w.shape[0] == DELTA_DIM + EMBEDDING_DIM


def test_lr_decay_matches_protocol():
    cfg = nn.OptimizerConfig(lr0=1e-3, decay_factor=0.5, decay_every=30)
    assert cfg.lr_at(30) / cfg.lr_at(0) == pytest.approx(0.5)


def test_pair_sampler_never_crosses_groups():
    emb, labels, users = blob_corpus(seed=3)
    groups = group_indices(labels, users)
    rng = np.random.default_rng(0)
    a, b = _sample_pairs(groups, 500, rng)
    for i, j in zip(a, b):
        assert users[i] == users[j]
        assert labels[i] == labels[j]
        assert i != j


def test_training_reduces_mse(trained):
    _, log, _ = trained
    first = log["epochs"][0]["loss"]
    last = log["epochs"][-1]["loss"]
    assert last <= 0.5 * first


def test_insufficient_groups_rejected():
    emb = np.random.default_rng(0).normal(size=(4, EMBEDDING_DIM))
    with pytest.raises(DataError):
        train_delta_encoder(emb, np.array([1, 1, 1, 1]),
                            np.array([0, 0, 0, 0]), epochs=1)


def test_bank_entries_and_errors(trained):
    enc, _, (emb, labels, users) = trained
    bank = harvest_delta_bank(enc, emb, labels, users, size=200, seed=1)
    assert bank.vectors.shape == (200, DELTA_DIM)
    assert np.all(np.isfinite(bank.vectors))
    with pytest.raises(DataError):
        harvest_delta_bank(enc, emb[:0], labels[:0], users[:0])
    fresh = DeltaEncoder(seed=1)
    with pytest.raises(UsageError):
        harvest_delta_bank(fresh, emb, labels, users)


def test_synthesize_counts_and_labels(trained):
    enc, _, (emb, labels, users) = trained
    bank = harvest_delta_bank(enc, emb, labels, users, size=100, seed=2)
    sub, sub_labels = emb[:120], labels[:120]
    syn, syn_labels = synthesize(enc, bank, sub, sub_labels, seed=5)
    assert syn.shape == (1200, EMBEDDING_DIM)
    assert np.all(np.isfinite(syn))
    assert np.array_equal(syn_labels, np.repeat(sub_labels, 10))


def test_synthesize_requires_training():
    enc = DeltaEncoder(seed=2)
    bank = DeltaVectorBank(np.zeros((5, DELTA_DIM)))
    with pytest.raises(UsageError):
        synthesize(enc, bank, np.zeros((2, EMBEDDING_DIM)), np.zeros(2))


def test_empty_bank_rejected():
    with pytest.raises(DataError):
        DeltaVectorBank(np.empty((0, DELTA_DIM)))


def test_checkpoint_roundtrip(tmp_path, trained):
    enc, _, (emb, labels, users) = trained
    path = tmp_path / "delta.fgc"
    enc.save(path)
    loaded = DeltaEncoder.load(path)
    x = emb[:8]
    assert np.array_equal(loaded.encode(x), enc.encode(x))
    assert loaded.trained
    bank = harvest_delta_bank(enc, emb, labels, users, size=50, seed=3)
    bpath = tmp_path / "bank.fgc"
    bank.save(bpath)
    loaded_bank = DeltaVectorBank.load(bpath)
    assert np.array_equal(loaded_bank.vectors, bank.vectors)
