"""Inertial stream representation, Butterworth filter bank, windowing, envelope.

A recording is a 6-channel stream (ax, ay, az in g; gx, gy, gz in rad/s)
sampled at 100 Hz. Each channel is expanded by a 3-band Butterworth bank
plus a raw mean-removed row, giving the fixed 4x100 per-channel model
input for 1-second windows.

Filtered row order (see ROW_* constants): raw, low band, mid band, high
band. All filtering is causal (streaming runtime); no zero-phase passes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .errors import ConfigError, DataError

SAMPLE_RATE = 100.0
CHANNELS = ("ax", "ay", "az", "gx", "gy", "gz")
N_CHANNELS = 6

# Row layout of the per-channel filter-bank expansion.
ROW_RAW = 0
ROW_LOW = 1
ROW_MID = 2
ROW_HIGH = 3
N_ROWS = 4

WINDOW_SAMPLES = 100

RECORDING_HEADER = "t,ax,ay,az,gx,gy,gz"


@dataclass(frozen=True)
class ImuStream:
    """Uniformly sampled 6-channel inertial recording.

    frames has shape (n, 6) in CHANNELS order; timestamps are implicit:
    t0 + k / sample_rate.
    """

    frames: np.ndarray
    sample_rate: float = SAMPLE_RATE
    t0: float = 0.0

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != N_CHANNELS:
            raise DataError(f"frames must be (n, {N_CHANNELS}), got {frames.shape}")
        if frames.size and not np.all(np.isfinite(frames)):
            raise DataError("stream contains NaN/Inf samples")
        if self.sample_rate <= 0:
            raise DataError("sample_rate must be positive")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) / self.sample_rate

    def slice_seconds(self, start_s: float, stop_s: float) -> "ImuStream":
        """Crop [start_s, stop_s) relative to the stream's own time axis."""
        i0 = max(0, int(round((start_s - self.t0) * self.sample_rate)))
        i1 = min(len(self), int(round((stop_s - self.t0) * self.sample_rate)))
        return ImuStream(self.frames[i0:i1], self.sample_rate,
                         self.t0 + i0 / self.sample_rate)


@dataclass(frozen=True)
class FilterBankConfig:
    """Band-pass bank layout; an open top (None) means high-pass."""

    bands: tuple = ((0.22, 8.0), (8.0, 32.0), (32.0, None))
    order: int = 4
    include_raw: bool = True

    def __post_init__(self):
        if self.order < 2 or self.order % 2 != 0:
            raise ConfigError("filter order must be even and >= 2")
        prev_high = None
        for low, high in self.bands:
            if low <= 0:
                raise ConfigError("band edges must be positive")
            if high is not None and high <= low:
                raise ConfigError(f"band ({low}, {high}) is empty")
            if prev_high is not None and low != prev_high:
                raise ConfigError("adjacent bands must share an edge")
            prev_high = high

    @property
    def n_rows(self) -> int:
        return len(self.bands) + (1 if self.include_raw else 0)


@dataclass
class FilterBank:
    """Designed cascades, one second-order-section array per band."""

    config: FilterBankConfig
    sample_rate: float
    sos: list = field(default_factory=list)  # list of (n_sections, 6) arrays

    def poles(self) -> np.ndarray:
        """All pole magnitudes across every designed section."""
        mags = []
        for sos in self.sos:
            for section in sos:
                b, a = section[:3], section[3:]
                mags.extend(np.abs(np.roots(a)))
        return np.asarray(mags)


def design_filter_bank(config: FilterBankConfig,
                       sample_rate: float = SAMPLE_RATE) -> FilterBank:
    """Design one stable SOS cascade per configured band.

    Raises ConfigError when a finite band edge reaches Nyquist.
    """
    nyquist = sample_rate / 2.0
    highest = max(h for _, h in
                  ((low, high if high is not None else low)
                   for low, high in config.bands))
    if sample_rate <= 2 * highest:
        raise ConfigError(
            f"sample rate {sample_rate} too low for band edge {highest} Hz")
    sos_list = []
    for low, high in config.bands:
        if high is None:
            sos = sps.butter(config.order, low, btype="highpass",
                             fs=sample_rate, output="sos")
        else:
            # order is the total order; butter's N is per edge for bandpass
            sos = sps.butter(config.order // 2, [low, high], btype="bandpass",
                             fs=sample_rate, output="sos")
        sos_list.append(np.asarray(sos, dtype=np.float64))
    bank = FilterBank(config=config, sample_rate=sample_rate, sos=sos_list)
    if bank.poles().size and np.max(bank.poles()) >= 1.0:
        raise ConfigError("designed filter is not strictly stable")
    return bank


def apply_filter_bank(stream: ImuStream, bank: FilterBank) -> np.ndarray:
    """Expand a stream to per-channel filter rows.

    Returns shape (6, rows, n): row 0 is the raw channel minus its stream
    mean (when include_raw), followed by one causally filtered row per band.
    Zero-length input passes through as an empty array.
    """
    frames = stream.frames
    n = frames.shape[0]
    rows = bank.config.n_rows
    out = np.empty((N_CHANNELS, rows, n), dtype=np.float64)
    if n == 0:
        return out
    x = frames.T  # (6, n)
    row = 0
    if bank.config.include_raw:
        out[:, row, :] = x - x.mean(axis=1, keepdims=True)
        row += 1
    for sos in bank.sos:
        out[:, row, :] = sps.sosfilt(sos, x, axis=1)
        row += 1
    return out


class StreamingFilterBank:
    """Stateful causal variant of apply_filter_bank for live frames.

    Single-owner: feed chunks in order. Band rows are bit-identical to the
    offline path; the raw row subtracts the running mean of all samples
    seen so far instead of the whole-stream mean (causal approximation).
    """

    def __init__(self, bank: FilterBank):
        self.bank = bank
        self._zi = [np.zeros((sos.shape[0], N_CHANNELS, 2)) for sos in bank.sos]
        self._count = 0
        self._sum = np.zeros(N_CHANNELS)

    def process(self, frames: np.ndarray) -> np.ndarray:
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != N_CHANNELS:
            raise DataError(f"frames must be (n, {N_CHANNELS})")
        if frames.size and not np.all(np.isfinite(frames)):
            raise DataError("frames contain NaN/Inf")
        n = frames.shape[0]
        rows = self.bank.config.n_rows
        out = np.empty((N_CHANNELS, rows, n), dtype=np.float64)
        if n == 0:
            return out
        x = frames.T
        row = 0
        if self.bank.config.include_raw:
            self._sum += frames.sum(axis=0)
            self._count += n
            mean = self._sum / self._count
            out[:, row, :] = x - mean[:, None]
            row += 1
        for i, sos in enumerate(self.bank.sos):
            y, self._zi[i] = sps.sosfilt(sos, x, axis=1, zi=self._zi[i])
            out[:, row, :] = y
            row += 1
        return out


@dataclass(frozen=True)
class WindowingConfig:
    window_s: float = 1.0
    step_s: float = 0.125
    crop_window_s: float = 1.5

    def __post_init__(self):
        if not 0 < self.step_s <= self.window_s:
            raise ConfigError("need 0 < step_s <= window_s")
        if self.crop_window_s < self.window_s:
            raise ConfigError("crop_window_s must cover window_s")


@dataclass(frozen=True)
class SignalWindow:
    """One model input: (6, rows, 100) filter-bank slice plus start time."""

    data: np.ndarray  # view into the filtered stream
    start_s: float

    @property
    def end_s(self) -> float:
        return self.start_s + self.data.shape[-1] / SAMPLE_RATE


def window_starts(n_samples: int, cfg: WindowingConfig,
                  sample_rate: float = SAMPLE_RATE) -> np.ndarray:
    """Start sample indices for every full window.

    Fractional steps (0.125 s at 100 Hz = 12.5 samples) round per window:
    start_k = round(k * step_s * fs), so hops alternate 12/13 samples.
    """
    win = int(round(cfg.window_s * sample_rate))
    if n_samples < win:
        return np.empty(0, dtype=np.int64)
    step = cfg.step_s * sample_rate
    k_max = int(np.floor((n_samples - win) / step + 1e-9))
    starts = np.round(np.arange(k_max + 1) * step).astype(np.int64)
    return starts[starts + win <= n_samples]


def slide_windows(filtered: np.ndarray, cfg: WindowingConfig,
                  sample_rate: float = SAMPLE_RATE,
                  t0: float = 0.0) -> list[SignalWindow]:
    """Cut ordered, fixed-length window views out of a filtered stream."""
    n = filtered.shape[-1]
    win = int(round(cfg.window_s * sample_rate))
    return [SignalWindow(filtered[..., s:s + win], t0 + s / sample_rate)
            for s in window_starts(n, cfg, sample_rate)]


def stack_windows(windows: list[SignalWindow]) -> np.ndarray:
    """Batch windows into one (n, 6, rows, 100) array."""
    if not windows:
        return np.empty((0, N_CHANNELS, N_ROWS, WINDOW_SAMPLES))
    return np.stack([w.data for w in windows])


def magnitude_envelope(stream: ImuStream, bank: FilterBank) -> np.ndarray:
    """Summed |mid-band| across channels, smoothed by a 1 s moving average.

    The second configured band (8-32 Hz by default) is the mid band.
    """
    if len(stream) == 0:
        raise DataError("cannot compute envelope of an empty stream")
    mid = sps.sosfilt(bank.sos[1], stream.frames.T, axis=1)
    raw = np.abs(mid).sum(axis=0)
    k = int(round(stream.sample_rate))
    kernel = np.full(k, 1.0 / k)
    return np.convolve(raw, kernel, mode="same")


def read_recording(path: str | Path) -> ImuStream:
    """Load a recording CSV (header t,ax,...,gz; see docs/formats.md)."""
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64)
    if data.size == 0:
        return ImuStream(np.empty((0, N_CHANNELS)))
    data = np.atleast_2d(data)
    if data.shape[1] != N_CHANNELS + 1:
        raise DataError(f"{path}: expected 7 columns, got {data.shape[1]}")
    t = data[:, 0]
    if len(t) > 1:
        dt = np.diff(t)
        if np.any(dt <= 0) or np.max(np.abs(dt - dt[0])) > 1e-9:
            raise DataError(f"{path}: timestamps not uniformly increasing")
        rate = 1.0 / dt[0]
    else:
        rate = SAMPLE_RATE
    return ImuStream(data[:, 1:], float(round(rate, 6)), t0=float(t[0]))


def write_recording(stream: ImuStream, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = np.column_stack([stream.times, stream.frames])
    np.savetxt(path, cols, delimiter=",", header=RECORDING_HEADER,
               comments="", fmt="%.9g")
