"""Shot extraction from raw recordings: envelope peaks, embedding-based
outlier rejection, 1.5 s crops.

Peaks are local maxima of the mid-band magnitude envelope at least 1 s
apart; peaks below the envelope's overall mean are dropped, and when the
recording protocol supplies countdown reference times, peaks far from
every reference are dropped too. Survivors are embedded (1 s window
centered on the peak) and outliers are removed by their median pairwise
distance in normalized embedding space (threshold 0.8).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .backbone import BackboneModel, l2_normalize
from .errors import DataError
from .signal import (SAMPLE_RATE, FilterBank, ImuStream, apply_filter_bank,
                     magnitude_envelope)

MIN_PEAK_SPACING_S = 1.0
OUTLIER_DISTANCE = 0.8
REFERENCE_TOLERANCE_S = 0.75
CROP_S = 1.5


@dataclass
class PeakSet:
    peak_times: list
    envelope: np.ndarray
    rejected: list = field(default_factory=list)  # (time_s, reason)

    def __post_init__(self):
        times = sorted(self.peak_times)
        if times != list(self.peak_times):
            raise DataError("peak_times must be sorted")
        if any(b - a < MIN_PEAK_SPACING_S - 1e-9
               for a, b in zip(times, times[1:])):
            raise DataError("peaks closer than the 1 s spacing floor")


@dataclass
class ShotSet:
    shots: list            # 1.5 s ImuStream crops
    peak_times: list
    expected_count: int
    padded: list = field(default_factory=list)  # indices of edge-padded shots


def _plateau_center(env: np.ndarray, i: int, frac: float = 0.95) -> int:
    """Midpoint of the near-flat region around a local maximum.

    A 1 s moving average turns a sub-second burst into a flat-topped
    trapezoid; raw argmax lands wherever the noise tips it, this recenters
    on the plateau (= the burst's energy centroid)."""
    level = env[i] * frac
    lo = i
    while lo > 0 and env[lo - 1] >= level:
        lo -= 1
    hi = i
    while hi < len(env) - 1 and env[hi + 1] >= level:
        hi += 1
    return (lo + hi) // 2


def detect_peaks(recording: ImuStream, bank: FilterBank,
                 reference_times: list | None = None) -> PeakSet:
    """Envelope peak picking per the segmentation rules above."""
    if recording.duration_s < 3.0:
        raise DataError("recording must be at least 3 s")
    env = magnitude_envelope(recording, bank)
    spacing = int(round(MIN_PEAK_SPACING_S * recording.sample_rate))
    idx, _ = find_peaks(env, distance=spacing)
    idx = sorted({_plateau_center(env, i) for i in idx})
    # plateau recentering may shrink gaps; re-enforce spacing, higher wins
    kept_idx = []
    for i in idx:
        if kept_idx and i - kept_idx[-1] < spacing:
            if env[i] > env[kept_idx[-1]]:
                kept_idx[-1] = i
        else:
            kept_idx.append(i)
    mean_level = float(env.mean())
    times, rejected = [], []
    for i in kept_idx:
        t = i / recording.sample_rate
        if env[i] <= mean_level:
            rejected.append((t, "below_mean"))
            continue
        if reference_times is not None:
            off = min(abs(t - r) for r in reference_times) \
                if reference_times else np.inf
            if off > REFERENCE_TOLERANCE_S:
                rejected.append((t, "off_reference"))
                continue
        times.append(t)
    return PeakSet(times, env, rejected)


def _embed_peak_windows(recording: ImuStream, bank: FilterBank,
                        model: BackboneModel, times: list) -> np.ndarray:
    filtered = apply_filter_bank(recording, bank)
    n = filtered.shape[-1]
    half = int(round(0.5 * recording.sample_rate))
    wins = []
    for t in times:
        c = int(round(t * recording.sample_rate))
        start = min(max(c - half, 0), n - 2 * half)
        wins.append(filtered[..., start:start + 2 * half])
    return model.embed(np.stack(wins))


def filter_outlier_shots(peaks: PeakSet, recording: ImuStream,
                         bank: FilterBank, model: BackboneModel) -> PeakSet:
    """Drop peaks whose 1 s window embedding sits far from the rest.

    Statistic: median Euclidean distance to the other peaks' normalized
    embeddings, rejected above 0.8. A single candidate passes untouched.
    """
    if len(peaks.peak_times) < 2:
        return peaks
    emb = l2_normalize(_embed_peak_windows(recording, bank, model,
                                           peaks.peak_times))
    diff = emb[:, None, :] - emb[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    kept, rejected = [], list(peaks.rejected)
    for i, t in enumerate(peaks.peak_times):
        others = np.delete(dist[i], i)
        if float(np.median(others)) > OUTLIER_DISTANCE:
            rejected.append((t, "outlier_embedding"))
        else:
            kept.append(t)
    return PeakSet(kept, peaks.envelope, rejected)


def extract_shots(recording: ImuStream, peaks: PeakSet,
                  expected_count: int = 0) -> ShotSet:
    """1.5 s crops centered on each accepted peak; crops that would cross
    a recording edge are replication-padded and flagged."""
    n = len(recording)
    half = int(round(CROP_S / 2 * recording.sample_rate))
    shots, padded = [], []
    for k, t in enumerate(peaks.peak_times):
        c = int(round((t - recording.t0) * recording.sample_rate))
        lo, hi = c - half, c + half
        pad_l, pad_r = max(0, -lo), max(0, hi - n)
        seg = recording.frames[max(lo, 0):min(hi, n)]
        if pad_l or pad_r:
            seg = np.concatenate(
                [np.repeat(seg[:1], pad_l, axis=0), seg,
                 np.repeat(seg[-1:], pad_r, axis=0)])
            padded.append(k)
        shots.append(ImuStream(seg, recording.sample_rate,
                               t0=recording.t0 + lo / recording.sample_rate))
    return ShotSet(shots, list(peaks.peak_times), expected_count, padded)


def extract_shot_tensors(recording: ImuStream, peak_times: list,
                         bank: FilterBank) -> np.ndarray:
    """1.5 s filter-bank segments (k, 6, rows, 150) cut from the
    continuously filtered recording, edge-replicated at stream ends.

    This is the representation the customization pipeline trains on: the
    rows match what the streaming runtime would have produced around the
    same instant (no isolated-crop filter transients).
    """
    filtered = apply_filter_bank(recording, bank)
    n = filtered.shape[-1]
    half = int(round(CROP_S / 2 * recording.sample_rate))
    out = []
    for t in peak_times:
        c = int(round((t - recording.t0) * recording.sample_rate))
        lo, hi = c - half, c + half
        pad_l, pad_r = max(0, -lo), max(0, hi - n)
        seg = filtered[..., max(lo, 0):min(hi, n)]
        if pad_l or pad_r:
            seg = np.concatenate(
                [np.repeat(seg[..., :1], pad_l, axis=-1), seg,
                 np.repeat(seg[..., -1:], pad_r, axis=-1)], axis=-1)
        out.append(seg)
    return np.stack(out) if out else np.empty((0, filtered.shape[0],
                                               filtered.shape[1], 2 * half))


def segment_recording(recording: ImuStream, bank: FilterBank,
                      model: BackboneModel,
                      reference_times: list | None = None,
                      expected_count: int = 0) -> tuple:
    """Full chain: detect -> outlier-filter -> crop. Returns (ShotSet, PeakSet)."""
    peaks = detect_peaks(recording, bank, reference_times)
    peaks = filter_outlier_shots(peaks, recording, bank, model)
    return extract_shots(recording, peaks, expected_count), peaks
