"""Evaluation harness: shots x gesture-combination sweeps and ablation
rows, reported at window and gesture level for head-only, fused-on-new
and fused-on-all views plus non-gesture false positives.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..backbone import BASE_CLASSES
from ..datagen import (SyntheticUser, build_eval_stream,
                       generate_negative_stream, label_windows, motif_by_label,
                       record_shots)
from ..errors import ConfigError
from ..runtime import (AggregationPolicy, CUSTOM_THRESHOLD, WindowPrediction,
                       aggregate, event_prf, false_positive_rate,
                       match_events, predict_window_stream, recognize_stream)
from ..segmentation import extract_shot_tensors, segment_recording
from ..signal import WindowingConfig, apply_filter_bank, slide_windows, stack_windows
from .session import ModelBundle, train_gesture_pipeline


def collect_shots(bundle: ModelBundle, user: SyntheticUser, label: str,
                  n_shots: int, seed: int) -> np.ndarray:
    """Record and segment a shot session; returns filter-bank shot tensors."""
    stream, refs = record_shots(motif_by_label(label), user, n_shots, seed)
    _, peaks = segment_recording(stream, bundle.bank, bundle.backbone,
                                 refs, n_shots)
    return extract_shot_tensors(stream, peaks.peak_times, bundle.bank)


def _window_metrics(pred_labels: list, true_labels: list,
                    gesture_classes: tuple) -> dict:
    """Accuracy + macro-F1 over the given gesture classes."""
    pred = np.asarray(pred_labels)
    true = np.asarray(true_labels)
    acc = float(np.mean(pred == true)) if len(true) else 0.0
    f1s = []
    for c in gesture_classes:
        tp = int(np.sum((pred == c) & (true == c)))
        fp = int(np.sum((pred == c) & (true != c)))
        fn = int(np.sum((pred != c) & (true == c)))
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * p * r / (p + r) if p + r else 0.0)
    return {"acc": acc, "f1": float(np.mean(f1s)) if f1s else 0.0}


def _event_metrics(truth: list, events: list, labels: tuple) -> dict:
    matches, missed, _ = match_events(truth, events)
    total = len(truth)
    acc = len(matches) / total if total else 0.0
    prf = event_prf(truth, events, labels)
    return {"acc": acc, "f1": prf["macro_f1"]}


def evaluate_head(bundle: ModelBundle, head, user: SyntheticUser,
                  new_labels: tuple, seed: int,
                  reps_per_motif: int = 3,
                  negative_s: float = 300.0) -> dict:
    """All metric views for one trained head on fresh eval streams."""
    policy = AggregationPolicy.paper_default(new_labels)
    cfg = WindowingConfig()

    def window_truth(stream_events, windows, classes):
        starts = np.array([w.start_s for w in windows])
        idx = label_windows(starts, cfg.window_s, stream_events, classes)
        return [classes[i] for i in idx]

    out = {}
    # -- new gestures only ---------------------------------------------------
    ev = build_eval_stream(user, list(new_labels), seed=seed * 3 + 1,
                           reps_per_motif=reps_per_motif)
    filtered = apply_filter_bank(ev.stream, bundle.bank)
    windows = slide_windows(filtered, cfg)
    head_classes = ("Negative",) + tuple(head.class_names[1:])
    truth_lbls = window_truth(ev.events, windows, head_classes)

    emb = bundle.backbone.embed(stack_windows(windows))
    head_probs = head.predict(emb)
    head_lbls = [head.class_names[i] for i in head_probs.argmax(axis=1)]
    out["head_window"] = _window_metrics(head_lbls, truth_lbls, new_labels)
    head_preds = [WindowPrediction(w.start_s, l, float(c.max()), "head")
                  for w, l, c in zip(windows, head_lbls, head_probs)]
    head_events = aggregate(head_preds, policy)
    out["head_gesture"] = _event_metrics(ev.events, head_events, new_labels)

    fused_preds = predict_window_stream(bundle.backbone, head, windows)
    fused_events = aggregate(fused_preds, policy)
    out["fused_new_window"] = _window_metrics(
        [p.label for p in fused_preds], truth_lbls, new_labels)
    out["fused_new_gesture"] = _event_metrics(ev.events, fused_events,
                                              new_labels)

    # -- new + existing gestures ----------------------------------------------
    all_labels = tuple(BASE_CLASSES[1:]) + tuple(new_labels)
    ev_all = build_eval_stream(user, list(all_labels), seed=seed * 3 + 2,
                               reps_per_motif=max(2, reps_per_motif - 1))
    preds_all, events_all = recognize_stream(ev_all.stream, bundle.bank,
                                             bundle.backbone, head, policy)
    filtered_all = apply_filter_bank(ev_all.stream, bundle.bank)
    windows_all = slide_windows(filtered_all, cfg)
    classes_all = ("Negative",) + all_labels
    truth_all = window_truth(ev_all.events, windows_all, classes_all)
    out["fused_all_window"] = _window_metrics(
        [p.label for p in preds_all], truth_all, all_labels)
    out["fused_all_gesture"] = _event_metrics(ev_all.events, events_all,
                                              all_labels)

    # -- non-gesture stream -----------------------------------------------------
    neg = generate_negative_stream(negative_s, seed=seed * 3 + 3, user=user)
    neg_preds, neg_events = recognize_stream(neg, bundle.bank,
                                             bundle.backbone, head, policy)
    out["fp_window_rate"] = float(np.mean(
        [p.label != "Negative" for p in neg_preds])) if neg_preds else 0.0
    out["fp_per_hour"] = false_positive_rate(neg_events, negative_s)
    return out


SWEEP_COLUMNS = [
    "n_shots", "n_gestures", "combo", "user", "rep",
    "head_window_acc", "head_window_f1", "head_gesture_acc", "head_gesture_f1",
    "fused_new_window_acc", "fused_new_window_f1",
    "fused_new_gesture_acc", "fused_new_gesture_f1",
    "fused_all_window_acc", "fused_all_window_f1",
    "fused_all_gesture_acc", "fused_all_gesture_f1",
    "fp_window_rate", "fp_per_hour",
]


def _flatten(metrics: dict) -> dict:
    row = {}
    for view in ("head_window", "head_gesture", "fused_new_window",
                 "fused_new_gesture", "fused_all_window", "fused_all_gesture"):
        row[f"{view}_acc"] = metrics[view]["acc"]
        row[f"{view}_f1"] = metrics[view]["f1"]
    row["fp_window_rate"] = metrics["fp_window_rate"]
    row["fp_per_hour"] = metrics["fp_per_hour"]
    return row


def run_cell(bundle: ModelBundle, user: SyntheticUser, combo: tuple,
             n_shots: int, seed: int, reps_per_motif: int = 3,
             negative_s: float = 300.0, **pipeline_kw) -> dict:
    """Train one head for (user, combo, n_shots) and evaluate it."""
    shots_by_label = {}
    for j, label in enumerate(combo):
        shots_by_label[label] = collect_shots(bundle, user, label, n_shots,
                                              seed * 101 + j)
    last = combo[-1]
    prior = {l: s for l, s in shots_by_label.items() if l != last}
    result = train_gesture_pipeline(bundle, last, shots_by_label[last],
                                    prior, seed=seed, **pipeline_kw)
    metrics = evaluate_head(bundle, result.head, user, combo, seed,
                            reps_per_motif, negative_s)
    metrics["gate_accuracy"] = result.gate_accuracy
    return metrics


def evaluate_sweep(bundle: ModelBundle, user_ids: list, motif_pool: list,
                   shots_axis: list, combo_sizes: list, reps: int = 3,
                   seed: int = 0, out_csv: str | Path | None = None,
                   max_cells: int = 200, user_seed: int = 0,
                   reps_per_motif: int = 3, negative_s: float = 300.0) -> list:
    """Sweep shots x gesture combinations; rows are per (cell, user, rep),
    plus one aggregate row per cell (user="mean")."""
    combos = []
    for size in combo_sizes:
        combos.extend(itertools.combinations(motif_pool, size))
    n_cells = len(combos) * len(shots_axis)
    if n_cells > max_cells:
        raise ConfigError(f"{n_cells} cells exceeds --max-cells={max_cells}")
    rows = []
    for n_shots in shots_axis:
        for combo in combos:
            cell_rows = []
            for rep in range(reps):
                for uid in user_ids:
                    user = SyntheticUser.make(uid, user_seed)
                    cell_seed = abs(hash((seed, n_shots, combo, rep, uid))) % (2**31)
                    m = run_cell(bundle, user, combo, n_shots, cell_seed,
                                 reps_per_motif, negative_s)
                    row = {"n_shots": n_shots, "n_gestures": len(combo),
                           "combo": "+".join(combo), "user": uid, "rep": rep,
                           **_flatten(m)}
                    rows.append(row)
                    cell_rows.append(row)
            mean_row = {"n_shots": n_shots, "n_gestures": len(combo),
                        "combo": "+".join(combo), "user": "mean", "rep": -1}
            for col in SWEEP_COLUMNS[5:]:
                mean_row[col] = float(np.mean([r[col] for r in cell_rows]))
            rows.append(mean_row)
    if out_csv:
        write_rows_csv(out_csv, rows, SWEEP_COLUMNS)
    return rows


ABLATION_ROWS = ("full", "no_augmentation", "no_synthesis", "no_adversarial")
_TOGGLES = {
    "full": {},
    "no_augmentation": {"augmentation": False},
    "no_synthesis": {"synthesis_on": False},
    "no_adversarial": {"adversarial": False},
}


def ablation_run(bundle: ModelBundle, user_ids: list, combo: tuple,
                 n_shots: int = 3, n_seeds: int = 10, seed: int = 0,
                 out_csv: str | Path | None = None, user_seed: int = 0,
                 reps_per_motif: int = 3, negative_s: float = 300.0) -> dict:
    """Table-style comparison: full pipeline vs single-stage ablations at
    three shots / two gestures, identical shots and eval streams per seed
    across rows."""
    if len(combo) != 2 or n_shots != 3:
        raise ConfigError("ablation protocol is pinned to 3 shots, 2 gestures")
    results = {name: [] for name in ABLATION_ROWS}
    for s in range(n_seeds):
        uid = user_ids[s % len(user_ids)]
        user = SyntheticUser.make(uid, user_seed)
        cell_seed = seed * 1000 + s
        for name in ABLATION_ROWS:
            m = run_cell(bundle, user, combo, n_shots, cell_seed,
                         reps_per_motif, negative_s, **_TOGGLES[name])
            results[name].append(m)
    summary = {}
    for name, ms in results.items():
        summary[name] = {
            "window_acc": float(np.mean([m["fused_new_window"]["acc"] for m in ms])),
            "window_f1": float(np.mean([m["fused_new_window"]["f1"] for m in ms])),
            "gesture_acc": float(np.mean([m["fused_new_gesture"]["acc"] for m in ms])),
            "gesture_f1": float(np.mean([m["fused_new_gesture"]["f1"] for m in ms])),
            "fp_per_hour": float(np.mean([m["fp_per_hour"] for m in ms])),
            "n_seeds": len(ms),
        }
    if out_csv:
        rows = [{"row": name, **vals} for name, vals in summary.items()]
        write_rows_csv(out_csv, rows,
                       ["row", "window_acc", "window_f1", "gesture_acc",
                        "gesture_f1", "fp_per_hour", "n_seeds"])
    return summary


def write_rows_csv(path: str | Path, rows: list, columns: list) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
