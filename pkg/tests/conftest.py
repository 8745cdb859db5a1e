"""Shared fixtures: the desk-scale artifact bundle (trained backbone,
delta encoder, delta bank, activity atlas, negative embeddings).

Building the bundle trains real models (~15 min cold). Artifacts are
cached under tests/.cache keyed by a recipe tag, so reruns are fast;
delete the directory or set FEWGEST_TEST_CACHE=0 to force a fresh build.
The wall-clock seconds of the build that produced the artifacts are
recorded alongside them (used by the acceptance runtime budgets).
"""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from fewgest import nncore as nn
from fewgest.backbone import BackboneModel, train_backbone
from fewgest.datagen import (SyntheticUser, build_corpus,
                             generate_negative_stream, split_users,
                             user_activity_sessions)
from fewgest.feedback import (ActivityAtlas, atlas_event_embeddings,
                              build_activity_atlas)
from fewgest.signal import FilterBankConfig, design_filter_bank
from fewgest.synthesis import (DeltaEncoder, DeltaVectorBank,
                               harvest_delta_bank, train_delta_encoder)

RECIPE = "desk-v2"
CORPUS_SEED = 7
N_USERS = 40
BACKBONE_SEED = 0
EPOCHS = 60

CACHE = Path(__file__).parent / ".cache" / RECIPE


@dataclass
class DeskBundle:
    bank: object
    backbone: BackboneModel
    delta: DeltaEncoder
    delta_bank: DeltaVectorBank
    atlas: ActivityAtlas
    negatives: np.ndarray          # train-split negative embeddings
    test_user_ids: list
    build_seconds: float
    backbone_val_acc: float

    def model_bundle(self):
        from fewgest.app.session import ModelBundle
        return ModelBundle(self.bank, self.backbone, self.delta,
                           self.delta_bank, self.atlas, self.negatives)

    def make_profile(self, root) -> "object":
        from fewgest.app.profile import UserProfile
        return UserProfile.create(root, self.backbone, self.delta,
                                  self.delta_bank, self.atlas, self.negatives)


def desk_corpus(bank):
    return build_corpus(n_users=N_USERS, bank=bank, instances_per_gesture=4,
                        sessions=2, negative_s_per_user=22.0,
                        seed=CORPUS_SEED, negative_keep_every=3,
                        activity_reps=4)


def desk_atlas_recordings():
    """Negative recordings backing the atlas: every corpus user's activity
    sessions plus the test users' background streams (same derivations as
    build_corpus)."""
    recs = []
    for uid in range(N_USERS):
        user = SyntheticUser.make(uid, CORPUS_SEED)
        recs.extend(user_activity_sessions(user, CORPUS_SEED, 4))
    for uid in split_users(N_USERS, CORPUS_SEED)["test"]:
        user = SyntheticUser.make(uid, CORPUS_SEED)
        recs.append(generate_negative_stream(22.0, CORPUS_SEED * 31 + uid,
                                             user))
    return recs


def _build(bank) -> DeskBundle:
    t_start = time.time()
    corpus = desk_corpus(bank)
    opt = nn.OptimizerConfig(lr0=1e-3, decay_factor=0.1, decay_every=30)
    model, log = train_backbone(corpus, opt, epochs=EPOCHS, batch_size=96,
                                seed=BACKBONE_SEED, balance_classes=True)
    train = corpus.subset("train")
    test = corpus.subset("test")
    tr_emb = model.embed(train.stack())
    te_emb = model.embed(test.stack())
    delta, _ = train_delta_encoder(tr_emb, train.labels, train.user_ids,
                                   epochs=150, pairs_per_epoch=4000, seed=0)
    dbank = harvest_delta_bank(delta, te_emb, test.labels, test.user_ids,
                               seed=0)
    atlas = build_activity_atlas(
        atlas_event_embeddings(desk_atlas_recordings(), bank, model))
    negatives = tr_emb[train.labels == 0]
    build_seconds = time.time() - t_start

    CACHE.mkdir(parents=True, exist_ok=True)
    model.save(CACHE / "backbone.fgc")
    delta.save(CACHE / "delta.fgc")
    dbank.save(CACHE / "delta_bank.fgc")
    atlas.save(CACHE / "atlas.fgc")
    nn.save_checkpoint(CACHE / "negatives.fgc",
                       {"embeddings": negatives.astype(np.float32)},
                       {"arch": "negative-embeddings-v1"})
    meta = {"build_seconds": build_seconds,
            "backbone_val_acc": log.best_val_acc,
            "test_user_ids": sorted(set(test.user_ids.tolist()))}
    (CACHE / "meta.json").write_text(json.dumps(meta))
    return _load(bank)


def _load(bank) -> DeskBundle:
    meta = json.loads((CACHE / "meta.json").read_text())
    tensors, _ = nn.load_checkpoint(CACHE / "negatives.fgc")
    return DeskBundle(
        bank=bank,
        backbone=BackboneModel.load(CACHE / "backbone.fgc"),
        delta=DeltaEncoder.load(CACHE / "delta.fgc"),
        delta_bank=DeltaVectorBank.load(CACHE / "delta_bank.fgc"),
        atlas=ActivityAtlas.load(CACHE / "atlas.fgc"),
        negatives=tensors["embeddings"],
        test_user_ids=meta["test_user_ids"],
        build_seconds=meta["build_seconds"],
        backbone_val_acc=meta["backbone_val_acc"])


@pytest.fixture(scope="session")
def bank():
    return design_filter_bank(FilterBankConfig())


@pytest.fixture(scope="session")
def desk(bank) -> DeskBundle:
    use_cache = os.environ.get("FEWGEST_TEST_CACHE", "1") != "0"
    if use_cache and (CACHE / "meta.json").exists():
        return _load(bank)
    return _build(bank)
