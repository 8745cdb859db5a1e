"""Fused real-time recognition: backbone + head per window, consecutive-
window aggregation into gesture events, and threshold tooling.

Aggregation semantics (shared by the offline and streaming paths): a
class fires after threshold(c) consecutive windows predict c; negative
windows and class switches reset the run; after an event the automaton
ignores windows inside the refractory interval. Event onset is the first
window of the run; confidence is the mean over the run's windows.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .backbone import BASE_CLASSES, BackboneModel
from .errors import DataError
from .head import PredictionHead
from .signal import (SAMPLE_RATE, FilterBank, ImuStream, StreamingFilterBank,
                     WindowingConfig, apply_filter_bank, slide_windows,
                     stack_windows)

NEGATIVE_NAME = "Negative"
BASE_THRESHOLDS = {"Clench": 3, "DoubleClench": 4, "Pinch": 3, "DoublePinch": 4}
CUSTOM_THRESHOLD = 5


@dataclass(frozen=True)
class AggregationPolicy:
    thresholds: dict
    refractory_s: float = 1.0

    def __post_init__(self):
        if any(t < 1 for t in self.thresholds.values()):
            raise DataError("thresholds must be >= 1")

    @classmethod
    def paper_default(cls, custom_labels: tuple = ()) -> "AggregationPolicy":
        th = dict(BASE_THRESHOLDS)
        th.update({c: CUSTOM_THRESHOLD for c in custom_labels})
        return cls(th)

    def threshold(self, label: str) -> int:
        return self.thresholds.get(label, CUSTOM_THRESHOLD)


@dataclass(frozen=True)
class WindowPrediction:
    t: float           # window start time, stream clock
    label: str
    confidence: float
    source: str        # "base_model" | "head"


@dataclass(frozen=True)
class GestureEvent:
    label: str
    onset_s: float     # first window of the emitting run
    emit_s: float      # window that completed the run
    confidence: float
    source: str

    def to_dict(self) -> dict:
        return {"label": self.label, "onset_s": round(self.onset_s, 4),
                "emit_s": round(self.emit_s, 4),
                "confidence": round(self.confidence, 4),
                "source": self.source}


class Aggregator:
    """Single-stream consecutive-window automaton."""

    def __init__(self, policy: AggregationPolicy):
        self.policy = policy
        self._label = None
        self._run = 0
        self._onset = 0.0
        self._confs = []
        self._sources = []
        self._refractory_until = -np.inf

    def _reset_run(self):
        self._label, self._run = None, 0
        self._confs, self._sources = [], []

    def feed(self, pred: WindowPrediction) -> "GestureEvent | None":
        if pred.t < self._refractory_until - 1e-12:
            self._reset_run()
            return None
        if pred.label == NEGATIVE_NAME:
            self._reset_run()
            return None
        if pred.label == self._label:
            self._run += 1
        else:
            self._label, self._run = pred.label, 1
            self._onset = pred.t
            self._confs, self._sources = [], []
        self._confs.append(pred.confidence)
        self._sources.append(pred.source)
        if self._run >= self.policy.threshold(pred.label):
            counts = Counter(self._sources)
            top = max(counts.values())
            source = next(s for s in reversed(self._sources)
                          if counts[s] == top)
            event = GestureEvent(pred.label, self._onset, pred.t,
                                 float(np.mean(self._confs)), source)
            self._refractory_until = pred.t + self.policy.refractory_s
            self._reset_run()
            return event
        return None


def aggregate(predictions: list, policy: AggregationPolicy) -> list:
    """Batch aggregation of an ordered prediction stream."""
    agg = Aggregator(policy)
    events = []
    for p in predictions:
        ev = agg.feed(p)
        if ev is not None:
            events.append(ev)
    return events


def fuse_probabilities(base_probs: np.ndarray,
                       head_probs: "np.ndarray | None",
                       head_classes: tuple = ()) -> tuple:
    """Vectorized fusion: both models vote; when both argmax to a gesture,
    the higher softmax confidence wins; negative only when both say so.

    Returns (labels, confidences, sources) as lists/arrays.
    """
    n = len(base_probs)
    b_arg = base_probs.argmax(axis=1)
    b_conf = base_probs.max(axis=1)
    labels, confs, sources = [], np.empty(n), []
    if head_probs is None:
        for i in range(n):
            labels.append(BASE_CLASSES[b_arg[i]])
            confs[i] = b_conf[i]
            sources.append("base_model")
        return labels, confs, sources
    h_arg = head_probs.argmax(axis=1)
    h_conf = head_probs.max(axis=1)
    for i in range(n):
        base_pos = b_arg[i] != 0
        head_pos = h_arg[i] != 0
        if base_pos and (not head_pos or b_conf[i] >= h_conf[i]):
            labels.append(BASE_CLASSES[b_arg[i]])
            confs[i] = b_conf[i]
            sources.append("base_model")
        elif head_pos:
            labels.append(head_classes[h_arg[i]])
            confs[i] = h_conf[i]
            sources.append("head")
        else:
            labels.append(NEGATIVE_NAME)
            confs[i] = b_conf[i]
            sources.append("base_model")
    return labels, confs, sources


def fused_window_predict(backbone: BackboneModel,
                         head: "PredictionHead | None",
                         window: np.ndarray) -> tuple:
    """(label, confidence, source) for one window (6, 4, 100)."""
    x = window[None] if window.ndim == 3 else window
    emb = backbone.embed(x)
    base_probs = backbone.predict_from_embedding(emb)
    head_probs = head.predict(emb) if head is not None else None
    labels, confs, sources = fuse_probabilities(
        base_probs, head_probs, head.class_names if head else ())
    return labels[0], float(confs[0]), sources[0]


def predict_window_stream(backbone: BackboneModel,
                          head: "PredictionHead | None",
                          windows: list, t0: float = 0.0) -> list:
    """WindowPredictions for a window list (from signal.slide_windows)."""
    if not windows:
        return []
    x = stack_windows(windows)
    emb = backbone.embed(x)
    base_probs = backbone.predict_from_embedding(emb)
    head_probs = head.predict(emb) if head is not None else None
    labels, confs, sources = fuse_probabilities(
        base_probs, head_probs, head.class_names if head else ())
    return [WindowPrediction(t0 + w.start_s, l, float(c), s)
            for w, l, c, s in zip(windows, labels, confs, sources)]


def recognize_stream(stream: ImuStream, bank: FilterBank,
                     backbone: BackboneModel, head: "PredictionHead | None",
                     policy: AggregationPolicy,
                     cfg: WindowingConfig | None = None) -> tuple:
    """Offline recognition of a whole recording.

    Returns (window_predictions, events).
    """
    cfg = cfg or WindowingConfig()
    filtered = apply_filter_bank(stream, bank)
    windows = slide_windows(filtered, cfg, stream.sample_rate, t0=stream.t0)
    preds = predict_window_stream(backbone, head, windows)
    return preds, aggregate(preds, policy)


class StreamRecognizer:
    """Online single-stream recognizer: push frames, collect predictions
    and events incrementally. Single-owner (one automaton per stream)."""

    def __init__(self, backbone: BackboneModel, head: "PredictionHead | None",
                 bank: FilterBank, policy: AggregationPolicy,
                 step_s: float = 0.125, t0: float = 0.0):
        self.backbone = backbone
        self.head = head
        self.policy = policy
        self._filter = StreamingFilterBank(bank)
        self._agg = Aggregator(policy)
        self._step = step_s
        self._t0 = t0
        self._buffer = np.empty((6, bank.config.n_rows, 0))
        self._base_sample = 0   # absolute index of buffer[..., 0]
        self._next_window = 0   # next window ordinal

    def push(self, frames: np.ndarray) -> tuple:
        """Feed (n, 6) frames; returns (window_predictions, events)."""
        chunk = self._filter.process(frames)
        self._buffer = np.concatenate([self._buffer, chunk], axis=2)
        preds, events = [], []
        windows, starts = [], []
        while True:
            start = int(round(self._next_window * self._step * SAMPLE_RATE))
            lo = start - self._base_sample
            if lo + 100 > self._buffer.shape[2]:
                break
            windows.append(self._buffer[..., lo:lo + 100])
            starts.append(start)
            self._next_window += 1
        if windows:
            x = np.stack(windows)
            emb = self.backbone.embed(x)
            base_probs = self.backbone.predict_from_embedding(emb)
            head_probs = self.head.predict(emb) if self.head else None
            labels, confs, sources = fuse_probabilities(
                base_probs, head_probs,
                self.head.class_names if self.head else ())
            for s, l, c, src in zip(starts, labels, confs, sources):
                p = WindowPrediction(self._t0 + s / SAMPLE_RATE, l,
                                     float(c), src)
                preds.append(p)
                ev = self._agg.feed(p)
                if ev is not None:
                    events.append(ev)
            # drop consumed buffer prefix (keep one window of history)
            keep_from = int(round(self._next_window * self._step
                                  * SAMPLE_RATE)) - self._base_sample
            if keep_from > 0:
                self._buffer = self._buffer[..., keep_from:]
                self._base_sample += keep_from
        return preds, events


def false_positive_rate(events: list, duration_s: float) -> float:
    """Events per hour on a stream known to contain no gestures."""
    if duration_s <= 0:
        raise DataError("duration must be positive")
    return len(events) / (duration_s / 3600.0)


def match_events(truth: list, predicted: list, tol_s: float = 0.75) -> tuple:
    """Greedy time-ordered matching of predicted events to ground truth.

    truth: (time_s, label) pairs; predicted: GestureEvents. Returns
    (matches, missed_truth, spurious) where matches pair equal labels
    within tol_s of the truth time.
    """
    used = [False] * len(predicted)
    matches, missed = [], []
    for t_time, t_label in sorted(truth):
        best, best_dt = None, tol_s
        for j, ev in enumerate(predicted):
            if used[j] or ev.label != t_label:
                continue
            dt = abs(ev.onset_s + 0.5 - t_time)
            if dt <= best_dt:
                best, best_dt = j, dt
        if best is None:
            missed.append((t_time, t_label))
        else:
            used[best] = True
            matches.append(((t_time, t_label), predicted[best]))
    spurious = [ev for j, ev in enumerate(predicted) if not used[j]]
    return matches, missed, spurious


def event_prf(truth: list, predicted: list, labels: tuple,
              tol_s: float = 0.75) -> dict:
    """Per-label precision/recall/F1 plus macro-F1 from event matching."""
    matches, missed, spurious = match_events(truth, predicted, tol_s)
    out = {}
    f1s = []
    for lbl in labels:
        tp = sum(1 for (_, tl), _ in matches if tl == lbl)
        fn = sum(1 for _, tl in missed if tl == lbl)
        fp = sum(1 for ev in spurious if ev.label == lbl)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        out[lbl] = {"tp": tp, "fp": fp, "fn": fn,
                    "precision": prec, "recall": rec, "f1": f1}
        f1s.append(f1)
    out["macro_f1"] = float(np.mean(f1s)) if f1s else 0.0
    return out


def grid_search_thresholds(predictions: list, truth: list, duration_s: float,
                           classes: tuple, candidates=range(1, 9),
                           fp_ceiling_per_h: float = 1.0,
                           refractory_s: float = 1.0) -> AggregationPolicy:
    """Per-class coordinate sweep maximizing that class's event F1 subject
    to the overall spurious-event ceiling; ties take the smallest value."""
    if not predictions:
        raise DataError("empty validation predictions")
    thresholds = {c: CUSTOM_THRESHOLD for c in classes}
    for cls in classes:
        best_t, best_f1 = None, -1.0
        for t in candidates:
            trial = dict(thresholds)
            trial[cls] = t
            events = aggregate(predictions,
                               AggregationPolicy(trial, refractory_s))
            stats = event_prf(truth, events, (cls,))
            _, _, spurious = match_events(truth, events)
            fp_rate = len(spurious) / (duration_s / 3600.0)
            if fp_rate > fp_ceiling_per_h:
                continue
            f1 = stats[cls]["f1"]
            if f1 > best_f1 + 1e-12:
                best_f1, best_t = f1, t
        if best_t is not None:
            thresholds[cls] = best_t
    return AggregationPolicy(thresholds, refractory_s)
