"""Few-shot corpus expansion on 1.5 s shots.

Positive variants: the original plus all 7 non-empty combinations of
{zoom, scale, time-warp} (8 total). Negative variants: {cutout, reverse,
piece-shuffle} each kept as-is and passed through the 7 positive combos
(3 + 21 = 24), all labeled negative. Cropping turns each 1.5 s variant
into 5 one-second model inputs on the 0.1 s grid.

Transforms are representation-agnostic (any time x feature matrix). The
training pipeline applies them to filter-bank shot tensors cut from the
continuously filtered recording (see segmentation.extract_shot_tensors),
so training inputs match what the streaming runtime produces; the
ImuStream entry points transform raw 6-channel crops.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ConfigError
from .signal import (SAMPLE_RATE, FilterBank, ImuStream, WindowingConfig,
                     apply_filter_bank, slide_windows, stack_windows)

N_POSITIVE_VARIANTS = 8
N_NEGATIVE_VARIANTS = 24
N_CROPS = 5
CROP_STEP = 10          # samples: the 0.1 s grid
WINDOW = 100


@dataclass(frozen=True)
class AugmentationConfig:
    zoom_lo: float = 0.9
    zoom_hi: float = 1.0
    scale_sd: float = 0.2
    warp_knots: int = 2
    warp_sd: float = 0.05
    clip_lo: float = 0.0
    clip_hi: float = 2.0
    cutout_len_s: float = 0.5
    shuffle_piece_s: float = 0.1

    def __post_init__(self):
        if not 0 < self.zoom_lo <= self.zoom_hi <= 1.0:
            raise ConfigError("zoom range must sit inside (0, 1]")


def zoom(frames: np.ndarray, factor: float) -> np.ndarray:
    """Time-compress the content by `factor` (faster motion) and pad the
    tail by edge replication so the length stays fixed."""
    n = frames.shape[0]
    m = max(2, int(round(factor * n)))
    src = np.linspace(0.0, n - 1, m)
    out = np.empty_like(frames)
    for c in range(frames.shape[1]):
        out[:m, c] = np.interp(src, np.arange(n), frames[:, c])
    out[m:] = out[m - 1]
    return out


def scale(frames: np.ndarray, s: float) -> np.ndarray:
    return frames * s


def time_warp(frames: np.ndarray, anchor_speeds: np.ndarray) -> np.ndarray:
    """Smooth monotone time remap; anchor_speeds are the local rates at
    evenly spaced anchors (endpoints + interior knots)."""
    from scipy.interpolate import CubicSpline
    n = frames.shape[0]
    anchors = np.linspace(0, n - 1, len(anchor_speeds))
    speed = CubicSpline(anchors, np.maximum(anchor_speeds, 1e-3))(np.arange(n))
    speed = np.maximum(speed, 1e-3)
    cum = np.cumsum(speed)
    cum = (cum - cum[0]) / (cum[-1] - cum[0]) * (n - 1)
    out = np.empty_like(frames)
    for c in range(frames.shape[1]):
        out[:, c] = np.interp(cum, np.arange(n), frames[:, c])
    return out


def cutout(frames: np.ndarray, rng: np.random.Generator,
           length_s: float = 0.5) -> np.ndarray:
    """Zero-mask a random contiguous span across all channels."""
    n = frames.shape[0]
    span = int(round(length_s * SAMPLE_RATE))
    start = int(rng.integers(0, n - span + 1))
    out = frames.copy()
    out[start:start + span] = 0.0
    return out


def reverse(frames: np.ndarray) -> np.ndarray:
    return frames[::-1].copy()


def shuffle_pieces(frames: np.ndarray, rng: np.random.Generator,
                   piece_s: float = 0.1) -> np.ndarray:
    n = frames.shape[0]
    piece = int(round(piece_s * SAMPLE_RATE))
    if n % piece:
        raise ConfigError(f"piece length {piece} must divide window length {n}")
    k = n // piece
    order = rng.permutation(k)
    return frames.reshape(k, piece, -1)[order].reshape(n, -1)


def _positive_combos():
    ops = ("zoom", "scale", "warp")
    out = [()]
    for r in (1, 2, 3):
        out.extend(combinations(ops, r))
    return out


def _apply_combo(frames, combo, cfg: AugmentationConfig,
                 rng: np.random.Generator) -> np.ndarray:
    out = frames
    if "zoom" in combo:
        out = zoom(out, float(rng.uniform(cfg.zoom_lo, cfg.zoom_hi)))
    if "scale" in combo:
        s = float(np.clip(rng.normal(1.0, cfg.scale_sd), cfg.clip_lo, cfg.clip_hi))
        out = scale(out, s)
    if "warp" in combo:
        speeds = np.clip(rng.normal(1.0, cfg.warp_sd, size=cfg.warp_knots + 2),
                         cfg.clip_lo, cfg.clip_hi)
        out = time_warp(out, speeds)
    return out


def positive_variants(seg: np.ndarray, cfg: AugmentationConfig,
                      rng: np.random.Generator) -> list:
    """Original plus 7 combos, on any (time, features) matrix."""
    return [_apply_combo(seg, combo, cfg, rng) for combo in _positive_combos()]


def negative_variants(seg: np.ndarray, cfg: AugmentationConfig,
                      rng: np.random.Generator) -> list:
    """{cutout, reverse, shuffle} then each through the 7 combos (24)."""
    bases = [cutout(seg, rng, cfg.cutout_len_s),
             reverse(seg),
             shuffle_pieces(seg, rng, cfg.shuffle_piece_s)]
    out = []
    for base in bases:
        out.append(base)
        for combo in _positive_combos()[1:]:
            out.append(_apply_combo(base, combo, cfg, rng))
    return out


def augment_positive(shot: ImuStream, cfg: AugmentationConfig,
                     rng: np.random.Generator) -> list[ImuStream]:
    """The original raw shot plus its 7 transform combinations, all 1.5 s."""
    return [ImuStream(v, shot.sample_rate)
            for v in positive_variants(shot.frames, cfg, rng)]


def augment_negative(shot: ImuStream, cfg: AugmentationConfig,
                     rng: np.random.Generator) -> list[ImuStream]:
    """24 negativity-inducing raw variants, labeled negative downstream."""
    return [ImuStream(v, shot.sample_rate)
            for v in negative_variants(shot.frames, cfg, rng)]


def crop_to_inputs(variant: ImuStream, bank: FilterBank,
                   n_crops: int = N_CROPS) -> np.ndarray:
    """(n_crops, 6, 4, 100) model inputs from one raw 1.5 s variant via the
    0.1 s sliding grid (first n_crops offsets)."""
    filtered = apply_filter_bank(variant, bank)
    cfg = WindowingConfig(step_s=0.1)
    windows = slide_windows(filtered, cfg)[:n_crops]
    return stack_windows(windows)


def tensor_crops(tensors: np.ndarray, n_crops: int = N_CROPS) -> np.ndarray:
    """(k*n_crops, 6, rows, 100) window slices of (k, 6, rows, 150) shot
    tensors on the 0.1 s grid, ordered shot-major."""
    crops = [tensors[:, :, :, off:off + WINDOW]
             for off in range(0, n_crops * CROP_STEP, CROP_STEP)]
    stacked = np.stack(crops, axis=1)  # (k, n_crops, 6, rows, 100)
    return stacked.reshape(-1, tensors.shape[1], tensors.shape[2], WINDOW)


def expand_shot_tensors(tensors: np.ndarray, cfg: AugmentationConfig,
                        seed: int) -> tuple:
    """Full expansion of filter-bank shot tensors (k, 6, rows, 150).

    Returns (positive_inputs, negative_inputs) stacked as
    (k*8*5, 6, rows, 100) and (k*24*5, 6, rows, 100).
    """
    k, ch, rows, n = tensors.shape
    pos, neg = [], []
    for i in range(k):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        seg = tensors[i].reshape(ch * rows, n).T  # (time, features)
        for v in positive_variants(seg, cfg, rng):
            pos.append(v.T.reshape(ch, rows, n))
        for v in negative_variants(seg, cfg, rng):
            neg.append(v.T.reshape(ch, rows, n))
    empty = np.empty((0, ch, rows, WINDOW))
    pos_t = tensor_crops(np.stack(pos)) if pos else empty
    neg_t = tensor_crops(np.stack(neg)) if neg else empty
    return pos_t, neg_t
