"""Candidate-gesture vetting: too-similar, inconsistent, daily-activity
checks plus the activity atlas built by density clustering.

Checks run in a fixed order (TooSimilar -> Inconsistent -> DailyActivity)
and short-circuit on the first failure; a recording that survives all
three proceeds to training. All embedding distances use L2-normalized
vectors, matching the segmentation outlier convention.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.cluster import HDBSCAN

from . import nncore as nn
from .augmentation import tensor_crops
from .backbone import (BASE_CLASSES, EMBEDDING_DIM, BackboneModel,
                       l2_normalize)
from .errors import DataError
from .head import PredictionHead
from .segmentation import ShotSet, extract_shot_tensors, segment_recording
from .signal import FilterBank, ImuStream

MIN_CLUSTER_SIZE = 3
DAILY_DISTANCE = 0.4
MIN_ATLAS_POINTS = 100
MAJORITY = 0.5  # strict: fraction must exceed this


@dataclass
class ActivityAtlas:
    """Cluster centers of normalized negative-corpus embeddings."""

    centers: np.ndarray                 # (k, 120)
    sizes: np.ndarray                   # members per cluster
    built_with: dict = field(default_factory=dict)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64)
        self.sizes = np.asarray(self.sizes, dtype=np.int64)

    def __len__(self):
        return len(self.centers)

    def nearest_distance(self, embeddings: np.ndarray) -> np.ndarray:
        """Distance from each normalized embedding to its closest center."""
        if len(self.centers) == 0:
            return np.full(len(embeddings), np.inf)
        emb = l2_normalize(np.asarray(embeddings, np.float64))
        d2 = ((emb[:, None, :] - self.centers[None]) ** 2).sum(axis=2)
        return np.sqrt(d2.min(axis=1))

    def save(self, path: str | Path) -> None:
        nn.save_checkpoint(path, {"centers": self.centers, "sizes": self.sizes},
                           {"arch": "activity-atlas-v1", **self.built_with})

    @classmethod
    def load(cls, path: str | Path) -> "ActivityAtlas":
        tensors, config = nn.load_checkpoint(path)
        config.pop("arch", None)
        return cls(tensors["centers"], tensors["sizes"], config)


def build_activity_atlas(negative_embeddings: np.ndarray,
                         min_cluster_size: int = MIN_CLUSTER_SIZE,
                         min_points: int = MIN_ATLAS_POINTS) -> ActivityAtlas:
    """Hierarchical density clustering (mutual reachability -> MST ->
    condensed tree, excess-of-mass extraction) over normalized negative
    embeddings; centers are per-cluster means, noise excluded."""
    emb = np.asarray(negative_embeddings, dtype=np.float64)
    if len(emb) < min_points:
        raise DataError(f"need >= {min_points} negative embeddings")
    if len(emb) < min_cluster_size:
        return ActivityAtlas(np.empty((0, emb.shape[1])), np.empty(0),
                             {"min_cluster_size": min_cluster_size})
    emb = l2_normalize(emb)
    labels = HDBSCAN(min_cluster_size=min_cluster_size, metric="euclidean",
                     cluster_selection_method="eom").fit_predict(emb)
    ids = np.unique(labels[labels >= 0])
    if len(ids) == 0:
        warnings.warn("all negative embeddings classified as noise; "
                      "daily-activity check will pass vacuously")
        return ActivityAtlas(np.empty((0, emb.shape[1])), np.empty(0),
                             {"min_cluster_size": min_cluster_size})
    centers = np.stack([emb[labels == i].mean(axis=0) for i in ids])
    sizes = np.array([(labels == i).sum() for i in ids])
    return ActivityAtlas(centers, sizes,
                         {"min_cluster_size": min_cluster_size,
                          "n_points": len(emb), "n_noise": int((labels < 0).sum())})


@dataclass(frozen=True)
class FeedbackVerdict:
    kind: str          # "too_similar" | "inconsistent" | "daily_activity" | "pass"
    detail: dict

    def to_dict(self) -> dict:
        return {"kind": self.kind, "detail": self.detail}


def check_too_similar(crop_embeddings: np.ndarray,
                      backbone: BackboneModel,
                      head: "PredictionHead | None") -> "FeedbackVerdict | None":
    """TooSimilar when either model argmaxes a strict majority of the shot
    crops to one existing gesture (base set, or the head's custom set).

    crop_embeddings: embeddings of the shots' 1 s crops (5 per shot).
    """
    if not len(crop_embeddings):
        return None
    emb = crop_embeddings
    votes = {}
    base = backbone.predict_from_embedding(emb).argmax(axis=1)
    for cls_idx in np.unique(base[base != 0]):
        votes[BASE_CLASSES[cls_idx]] = float(np.mean(base == cls_idx))
    if head is not None:
        hp = head.predict(emb).argmax(axis=1)
        for cls_idx in np.unique(hp[hp != 0]):
            name = head.class_names[cls_idx]
            votes[name] = max(votes.get(name, 0.0), float(np.mean(hp == cls_idx)))
    if votes:
        label, frac = max(votes.items(), key=lambda kv: kv[1])
        if frac > MAJORITY:
            return FeedbackVerdict("too_similar",
                                   {"label": label, "fraction": frac})
    return None


def check_inconsistent(kept: int, expected: int) -> "FeedbackVerdict | None":
    """Inconsistent when outlier filtering leaves fewer repetitions than
    the protocol expected; extras are kept and used."""
    if expected < 1:
        raise DataError("expected_count must be >= 1")
    if kept < expected:
        return FeedbackVerdict("inconsistent",
                               {"kept": kept, "expected": expected})
    return None


def atlas_event_embeddings(recordings: list, bank: FilterBank,
                           backbone: BackboneModel) -> np.ndarray:
    """Embeddings of peak-centered 1 s windows of negative recordings.

    The atlas represents daily-activity EVENTS, mirroring how candidate
    gestures are sliced (peak-centered), so distances compare like with
    like; quiet stretches contribute nothing.
    """
    from .segmentation import detect_peaks
    from .signal import apply_filter_bank
    windows = []
    for rec in recordings:
        peaks = detect_peaks(rec, bank)
        if not peaks.peak_times:
            continue
        filtered = apply_filter_bank(rec, bank)
        n = filtered.shape[-1]
        half = int(round(rec.sample_rate / 2))
        for t in peaks.peak_times:
            c = int(round((t - rec.t0) * rec.sample_rate))
            s = min(max(c - half, 0), n - 2 * half)
            windows.append(filtered[..., s:s + 2 * half])
    if not windows:
        return np.empty((0, EMBEDDING_DIM))
    return backbone.embed(np.stack(windows))


def daily_fraction(embeddings: np.ndarray, atlas: ActivityAtlas,
                   threshold: float = DAILY_DISTANCE) -> float:
    """Fraction of embeddings strictly closer than `threshold` to their
    nearest atlas center (the boundary itself does not count as close)."""
    dist = atlas.nearest_distance(embeddings)
    return float(np.mean(dist < threshold))


def check_daily_activity(crop_embeddings: np.ndarray, atlas: ActivityAtlas,
                         threshold: float = DAILY_DISTANCE
                         ) -> "FeedbackVerdict | None":
    """DailyActivity when a strict majority of the shot crops sit strictly
    closer than `threshold` to some atlas center."""
    if len(atlas) == 0:
        warnings.warn("empty activity atlas; daily-activity check skipped")
        return None
    if not len(crop_embeddings):
        return None
    emb = crop_embeddings
    frac = daily_fraction(emb, atlas, threshold)
    dist = atlas.nearest_distance(emb)
    if frac > MAJORITY:
        return FeedbackVerdict("daily_activity",
                               {"fraction_near": frac,
                                "median_distance": float(np.median(dist))})
    return None


def run_feedback_pipeline(recording: ImuStream, bank: FilterBank,
                          backbone: BackboneModel,
                          head: "PredictionHead | None",
                          atlas: "ActivityAtlas | None",
                          expected_count: int,
                          reference_times: list | None = None) -> tuple:
    """Segment, then vet in fixed order. Returns (verdict, shots, peaks);
    verdict.kind == "pass" hands the shots to training."""
    shots, peaks = segment_recording(recording, bank, backbone,
                                     reference_times, expected_count)
    if not shots.shots:
        return (FeedbackVerdict("inconsistent",
                                {"kept": 0, "expected": expected_count,
                                 "rejected": peaks.rejected}),
                shots, peaks)
    tensors = extract_shot_tensors(recording, peaks.peak_times, bank)
    crop_emb = backbone.embed(tensor_crops(tensors))
    verdict = check_too_similar(crop_emb, backbone, head)
    if verdict is None:
        verdict = check_inconsistent(len(shots.shots), expected_count)
    if verdict is None and atlas is not None:
        verdict = check_daily_activity(crop_emb, atlas)
    if verdict is None:
        verdict = FeedbackVerdict("pass", {"kept": len(shots.shots)})
    return verdict, shots, peaks
