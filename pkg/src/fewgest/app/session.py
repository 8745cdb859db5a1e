"""Customization flow: the head-training pipeline and the session state
machine (recording -> verdicts -> training -> accuracy gate).

Phases: idle, recording, analyzing, verdict_shown, training, gate_shown,
more_shots_recording, completed, rejected. A failed verdict returns to
idle (shots discarded, gesture redefined); a sub-0.80 gate lets the user
either accept ("good enough") or record more shots; a second sub-gate
failure rejects the gesture.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..augmentation import AugmentationConfig, expand_shot_tensors, tensor_crops
from ..backbone import BackboneModel
from ..errors import ProtocolError, UsageError
from ..feedback import ActivityAtlas, FeedbackVerdict, run_feedback_pipeline
from ..head import (HeadConfig, PredictionHead, assemble_corpus,
                    gate_accuracy, train_head)
from ..segmentation import extract_shot_tensors
from ..signal import FilterBank, FilterBankConfig, ImuStream, design_filter_bank
from ..synthesis import DeltaEncoder, DeltaVectorBank, synthesize
from .profile import UserProfile

DEFAULT_SHOTS = 3
COUNTDOWN_S = 3.0
SHOT_GAP_S = 2.5
NEGATIVE_CAP = 20_000


@dataclass
class ModelBundle:
    """Shared read-only models backing sessions and evaluations."""

    bank: FilterBank
    backbone: BackboneModel
    delta: DeltaEncoder
    delta_bank: DeltaVectorBank
    atlas: ActivityAtlas
    negatives: np.ndarray

    @classmethod
    def from_profile(cls, profile: UserProfile) -> "ModelBundle":
        return cls(bank=design_filter_bank(FilterBankConfig()),
                   backbone=profile.backbone(),
                   delta=profile.delta_encoder(),
                   delta_bank=profile.delta_bank(),
                   atlas=profile.atlas(),
                   negatives=profile.negative_embeddings())


@dataclass
class PipelineResult:
    head: PredictionHead
    gate_accuracy: float
    gate_verdict: str
    corpus_sizes: dict
    log: dict


def shot_embeddings(shot_tensors: np.ndarray, bundle: ModelBundle, seed: int,
                    augmentation: bool = True,
                    aug_cfg: AugmentationConfig | None = None) -> tuple:
    """(positive_embeddings, negative_embeddings) for filter-bank shot
    tensors (k, 6, rows, 150), with or without the 8x/24x augmentation."""
    aug_cfg = aug_cfg or AugmentationConfig()
    if augmentation:
        pos_x, neg_x = expand_shot_tensors(shot_tensors, aug_cfg, seed)
    else:
        pos_x = tensor_crops(shot_tensors)
        neg_x = np.empty((0,) + pos_x.shape[1:])
    pos = bundle.backbone.embed(pos_x)
    neg = bundle.backbone.embed(neg_x) if len(neg_x) else \
        np.empty((0, pos.shape[1]), pos.dtype)
    return pos, neg


def train_gesture_pipeline(bundle: ModelBundle, gesture_name: str,
                           shots: np.ndarray, prior: dict | None = None,
                           seed: int = 0, augmentation: bool = True,
                           synthesis_on: bool = True,
                           adversarial: bool = True,
                           head_cfg: HeadConfig | None = None,
                           negative_cap: int = NEGATIVE_CAP) -> PipelineResult:
    """Shot tensors -> augmented/synthesized corpus -> trained head ->
    accuracy gate. `prior` maps already-registered gesture names to their
    shot tensors (retraining from scratch covers the whole custom set)."""
    head_cfg = head_cfg or HeadConfig()
    if not adversarial:
        head_cfg = HeadConfig(**{**head_cfg.__dict__, "adv_loss_weight": 0.0})
    custom: dict = {}
    neg_parts = []
    all_sets = {**(prior or {}), gesture_name: shots}
    for g_i, (name, g_shots) in enumerate(all_sets.items()):
        pos, neg = shot_embeddings(g_shots, bundle, seed * 131 + g_i,
                                   augmentation)
        if synthesis_on:
            syn_pos, _ = synthesize(bundle.delta, bundle.delta_bank, pos,
                                    np.ones(len(pos)), seed=seed * 17 + g_i)
            pos = np.concatenate([pos, syn_pos])
            if len(neg):
                syn_neg, _ = synthesize(bundle.delta, bundle.delta_bank, neg,
                                        np.zeros(len(neg)),
                                        seed=seed * 19 + g_i)
                neg = np.concatenate([neg, syn_neg])
        custom[name] = pos
        if len(neg):
            neg_parts.append(neg)

    pretrain_neg = bundle.negatives
    if len(pretrain_neg) > negative_cap:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 83]))
        pretrain_neg = pretrain_neg[
            rng.choice(len(pretrain_neg), negative_cap, replace=False)]
    neg_parts.append(pretrain_neg)
    corpus = assemble_corpus(custom, np.concatenate(neg_parts))

    head, log = train_head(corpus, head_cfg, seed=seed)

    # gate on a freshly synthesized test set (fresh RNG stream)
    gate_pos, gate_neg = [], []
    for g_i, (name, g_shots) in enumerate(all_sets.items()):
        pos, neg = shot_embeddings(g_shots, bundle, seed * 131 + g_i,
                                   augmentation)
        cls = corpus.class_names.index(name)
        sp, lp = synthesize(bundle.delta, bundle.delta_bank, pos,
                            np.full(len(pos), cls),
                            seed=seed * 977 + g_i + 10_007)
        gate_pos.append((sp, lp))
        if len(neg):
            sn, ln = synthesize(bundle.delta, bundle.delta_bank, neg,
                                np.zeros(len(neg), dtype=int),
                                seed=seed * 983 + g_i + 20_011)
            gate_neg.append((sn, ln))
    test_emb = np.concatenate([e for e, _ in gate_pos + gate_neg])
    test_lbl = np.concatenate([l for _, l in gate_pos + gate_neg])
    acc, verdict = gate_accuracy(head, test_emb, test_lbl)

    return PipelineResult(head, acc, verdict,
                          {"positives": {k: len(v) for k, v in custom.items()},
                           "negatives": int(sum(len(p) for p in neg_parts)),
                           "gate_set": len(test_emb)},
                          log)


def countdown_schedule(n_shots: int, countdown_s: float = COUNTDOWN_S,
                       gap_s: float = SHOT_GAP_S) -> list:
    """Expected shot-center reference times for the recording protocol."""
    refs = []
    cursor = countdown_s
    for _ in range(n_shots):
        refs.append(cursor + 0.4)  # nominal burst center after the beep
        cursor += gap_s + 0.8
    return refs


class CustomizationSession:
    """One gesture-addition flow for one profile; single-owner."""

    def __init__(self, profile: UserProfile, bundle: ModelBundle | None = None,
                 seed: int = 0, clock=time.time):
        self.profile = profile
        self.bundle = bundle or ModelBundle.from_profile(profile)
        self.seed = seed
        self.clock = clock
        self.phase = "idle"
        self.transcript = []
        self.last_verdict: FeedbackVerdict | None = None
        self.gesture_name = ""
        self.shots_expected = DEFAULT_SHOTS
        self._attempt = 0
        self._recordings: list = []   # (stream, kept peak times)
        self._shots: np.ndarray | None = None
        self._pending: PipelineResult | None = None
        self._last_t = -np.inf
        self._log("idle", {})

    def _log(self, phase: str, info: dict) -> None:
        t = max(self.clock(), np.nextafter(self._last_t, np.inf))
        self._last_t = t
        self.phase = phase
        self.transcript.append({"t": t, "phase": phase, **info})

    def _require(self, *phases):
        if self.phase not in phases:
            raise ProtocolError(
                f"operation invalid in phase {self.phase!r} (needs {phases})")

    # -- flow ------------------------------------------------------------------
    def start_recording(self, gesture_name: str,
                        shots: int = DEFAULT_SHOTS) -> list:
        self._require("idle")
        if gesture_name in self.profile.gesture_names():
            raise ProtocolError(f"gesture {gesture_name!r} already exists")
        self.gesture_name = gesture_name
        self.shots_expected = shots
        self._attempt = 1
        self._recordings = []
        self._shots = None
        self._log("recording", {"gesture": gesture_name, "shots": shots})
        return countdown_schedule(shots)

    def submit_recording(self, stream: ImuStream,
                         reference_times: list | None = None) -> FeedbackVerdict:
        self._require("recording", "more_shots_recording")
        second_round = self.phase == "more_shots_recording"
        self._log("analyzing", {})
        head = self.profile.head()
        verdict, shot_set, peaks = run_feedback_pipeline(
            stream, self.bundle.bank, self.bundle.backbone, head,
            self.bundle.atlas, self.shots_expected, reference_times)
        if second_round and verdict.kind == "inconsistent" and shot_set.shots:
            # round two only adds data; partial extra shots still help
            verdict = FeedbackVerdict("pass", {"kept": len(shot_set.shots)})
        self.last_verdict = verdict
        self._log("verdict_shown", verdict.to_dict())
        if verdict.kind != "pass":
            self._recordings = []
            self._log("idle", {"discarded": True})
            return verdict
        self._recordings.append((stream, list(peaks.peak_times)))
        self._train_and_gate()
        return verdict

    def _train_and_gate(self) -> None:
        tensors = [extract_shot_tensors(s, p, self.bundle.bank)
                   for s, p in self._recordings]
        self._shots = np.concatenate(tensors)
        self._log("training", {"n_shots": len(self._shots)})
        prior = {g.name: self.profile.load_shot_tensors(g.name, self.bundle.bank)
                 for g in self.profile.gestures()}
        result = train_gesture_pipeline(self.bundle, self.gesture_name,
                                        self._shots, prior,
                                        seed=self.seed + 7 * self._attempt)
        self._pending = result
        self._log("gate_shown", {"accuracy": result.gate_accuracy,
                                 "verdict": result.gate_verdict})
        if result.gate_verdict == "pass":
            self._complete()
        elif self._attempt >= 2:
            self._log("rejected", {"accuracy": result.gate_accuracy})

    def gate_decision(self, choice: str) -> None:
        """User choice on a sub-0.80 gate: 'good_enough' or 'more_shots'."""
        self._require("gate_shown")
        if self._pending is None or self._pending.gate_verdict == "pass":
            raise ProtocolError("no pending sub-threshold gate")
        if choice == "good_enough":
            self._complete()
        elif choice == "more_shots":
            if self._attempt >= 2:
                raise ProtocolError("second gate already failed")
            self._attempt += 1
            self._log("more_shots_recording", {})
        else:
            raise ProtocolError(f"unknown gate decision {choice!r}")

    def _complete(self) -> None:
        result = self._pending
        if result is None:
            raise UsageError("nothing trained")
        self.profile.commit_gesture(self.gesture_name, self._recordings,
                                    self.seed, result.head)
        self._log("completed", {"gesture": self.gesture_name,
                                "accuracy": result.gate_accuracy,
                                "classes": list(result.head.class_names)})
        self.profile.append_session(self.transcript)

    def reset(self) -> None:
        """Back to idle from a terminal or verdict state."""
        if self.phase in ("completed", "rejected"):
            self.profile.append_session(self.transcript) \
                if self.phase == "rejected" else None
        self.phase = "idle"
        self._recordings = []
        self._shots = None
        self._pending = None
        self._log("idle", {"reset": True})

    def state(self) -> dict:
        info = {"phase": self.phase, "gesture": self.gesture_name,
                "shots_expected": self.shots_expected,
                "attempt": self._attempt,
                "gestures": list(self.profile.gesture_names())}
        if self.last_verdict is not None:
            info["last_verdict"] = self.last_verdict.to_dict()
        if self._pending is not None:
            info["gate_accuracy"] = self._pending.gate_accuracy
        return info
