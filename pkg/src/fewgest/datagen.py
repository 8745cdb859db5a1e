"""Parametric synthetic IMU corpus: per-user gesture motifs, negative
background streams, shot recordings, and user-disjoint corpora.

Motifs are sums of damped-sinusoid / Gaussian-pulse atoms per channel,
mostly inside the 8-32 Hz band so the filter bank and envelope-based
segmentation see them the way real wrist gestures present. Users carry
fixed amplitude/frequency/timing perturbations (high between-user, low
within-user variance); sessions add wear-position drift. Every generated
event is logged, so evaluation oracles are exact.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .backbone import BASE_CLASSES, LabeledWindowSet
from .errors import ConfigError
from .signal import (SAMPLE_RATE, ImuStream, WindowingConfig,
                     apply_filter_bank, slide_windows)

SENSOR_NOISE_G = 0.01


@dataclass(frozen=True)
class MotifAtom:
    channel: int          # 0..5
    kind: str             # "damped_sine" | "gauss_pulse"
    amp: float
    freq_hz: float        # carrier (damped_sine) or envelope width proxy
    t_offset_s: float
    width_s: float


@dataclass(frozen=True)
class GestureMotif:
    label: str
    duration_s: float
    atoms: tuple

    def __post_init__(self):
        if not 0.2 <= self.duration_s <= 1.2:
            raise ConfigError(f"motif duration {self.duration_s} outside [0.2, 1.2] s")

    def render(self, amp_gain: float = 1.0, freq_shift_hz: float = 0.0,
               time_scale: float = 1.0, fs: float = SAMPLE_RATE) -> np.ndarray:
        """Burst waveform (n, 6) with no margins or noise."""
        n = int(round(self.duration_s * time_scale * fs))
        t = np.arange(n) / fs
        out = np.zeros((n, 6))
        for a in self.atoms:
            t0 = a.t_offset_s * time_scale
            w = a.width_s * time_scale
            rel = t - t0
            if a.kind == "gauss_pulse":
                wave = np.exp(-((rel) / w) ** 2)
            else:
                env = np.exp(-np.maximum(rel, 0.0) / w) * (rel >= 0)
                wave = env * np.sin(2 * np.pi * (a.freq_hz + freq_shift_hz) * rel)
            out[:, a.channel] += amp_gain * a.amp * wave
        return out


def _burst(label, duration, channel_amps, freq, double=False, pulse_gap=0.3):
    """Helper: damped-sine burst with a Gaussian accent on given channels.

    Double gestures repeat the pulse with a lighter, quicker second hit
    (real repetitions land softer), keeping singles and doubles apart.
    """
    atoms = []
    starts = (0.02, 0.02 + pulse_gap) if double else (0.02,)
    for s in starts:
        for ch, amp in channel_amps:
            atoms.append(MotifAtom(ch, "damped_sine", amp, freq, s, 0.07))
            atoms.append(MotifAtom(ch, "gauss_pulse", 0.35 * amp, freq,
                                   s + 0.05, 0.04))
    return GestureMotif(label, duration, tuple(atoms))


def base_motifs() -> list[GestureMotif]:
    """The four pre-trained gestures (singles ~0.55 s, doubles ~0.8 s)."""
    return [
        _burst("Clench", 0.55, [(0, 0.9), (1, 0.7), (5, 1.1)], 12.0),
        _burst("DoubleClench", 0.80, [(0, 0.9), (1, 0.7), (5, 1.1)], 12.0,
               double=True, pulse_gap=0.38),
        _burst("Pinch", 0.55, [(2, 0.75), (3, 0.95), (4, 0.55)], 17.0),
        _burst("DoublePinch", 0.80, [(2, 0.75), (3, 0.95), (4, 0.55)], 17.0,
               double=True, pulse_gap=0.38),
    ]


def custom_motifs() -> list[GestureMotif]:
    """12 held-out motifs spanning finger/wrist scale x single/double pulse."""
    return [
        _burst("FingerTap", 0.50, [(2, 0.35), (4, 0.45)], 24.0),
        _burst("DoubleFingerTap", 0.85, [(2, 0.35), (4, 0.45)], 24.0, double=True),
        _burst("FingerSnap", 0.45, [(1, 0.5), (3, 0.55)], 27.0),
        _burst("DoubleFingerSnap", 0.80, [(1, 0.5), (3, 0.55)], 27.0, double=True),
        _burst("FingerCurl", 0.60, [(2, 0.4), (5, 0.35)], 15.0),
        _burst("ThumbSlide", 0.65, [(0, 0.3), (4, 0.5)], 10.0),
        _burst("WristFlick", 0.55, [(3, 1.3), (4, 1.0), (0, 0.8)], 9.0),
        _burst("DoubleWristFlick", 0.90, [(3, 1.3), (4, 1.0), (0, 0.8)], 9.0,
               double=True),
        _burst("WristRotate", 0.70, [(3, 1.5), (1, 0.9)], 13.5),
        _burst("DoubleWristRotate", 1.00, [(3, 1.5), (1, 0.9)], 13.5, double=True,
               pulse_gap=0.4),
        _burst("WristTilt", 0.60, [(4, 1.2), (2, 0.8), (5, 0.6)], 16.5),
        _burst("ArmLift", 0.75, [(0, 1.4), (1, 1.2), (5, 0.7)], 8.5),
    ]


def daily_motifs() -> list[GestureMotif]:
    """Everyday-motion bursts mixed into negative streams (scratching,
    surface taps, wrist twists); also recordable as shots to exercise
    the daily-activity feedback path."""
    return [
        _burst("scratch", 0.90, [(1, 0.5), (2, 0.4), (3, 0.45)], 8.0, double=True,
               pulse_gap=0.35),
        _burst("surface_tap", 0.45, [(2, 0.6), (0, 0.3)], 23.0),
        _burst("wrist_twist", 0.80, [(3, 0.7), (4, 0.5)], 9.5),
        _burst("knock", 0.60, [(0, 0.8), (2, 0.5)], 26.0),
    ]


def motif_by_label(label: str) -> GestureMotif:
    for m in base_motifs() + custom_motifs() + daily_motifs():
        if m.label == label:
            return m
    raise ConfigError(f"unknown motif label {label!r}")


def _entropy(*parts) -> np.random.Generator:
    ints = [zlib.crc32(str(p).encode()) if isinstance(p, str) else int(p)
            for p in parts]
    return np.random.default_rng(np.random.SeedSequence(ints))


@dataclass(frozen=True)
class SyntheticUser:
    """Fixed per-user rendering style; jitter is resampled per repetition."""

    user_id: int
    amp_gain: float
    freq_shift_hz: float
    time_scale: float
    jitter_sd_s: float = 0.03

    @classmethod
    def make(cls, user_id: int, seed: int = 0) -> "SyntheticUser":
        rng = _entropy(seed, user_id, 101)
        return cls(user_id=user_id,
                   amp_gain=float(np.clip(rng.normal(1.0, 0.15), 0.5, 1.6)),
                   freq_shift_hz=float(rng.normal(0.0, 0.5)),
                   time_scale=float(np.clip(rng.normal(1.0, 0.06), 0.8, 1.2)))

    def wear_drift(self, session: int, seed: int = 0) -> np.ndarray:
        """Per-session channel gains modelling watch re-positioning."""
        rng = _entropy(seed, self.user_id, session, 202)
        return rng.normal(1.0, 0.05, size=6).clip(0.8, 1.2)


def generate_gesture_instance(motif: GestureMotif, user: SyntheticUser,
                              session: int, seed: int,
                              margin_s: tuple = (0.6, 0.9)) -> tuple:
    """One repetition with quiet margins.

    Returns (stream, center_s): deterministic in all arguments; additive
    sensor noise N(0, 0.01^2) g; the burst center carries the user's
    per-repetition timing jitter.
    """
    rng = _entropy(seed, user.user_id, session, zlib.crc32(motif.label.encode()))
    jitter = rng.normal(0.0, user.jitter_sd_s)
    lead = rng.uniform(*margin_s) + jitter
    tail = rng.uniform(*margin_s)
    burst = motif.render(user.amp_gain * rng.normal(1.0, 0.05),
                         user.freq_shift_hz, user.time_scale)
    n_lead = max(0, int(round(lead * SAMPLE_RATE)))
    n_tail = max(0, int(round(tail * SAMPLE_RATE)))
    frames = np.vstack([np.zeros((n_lead, 6)), burst, np.zeros((n_tail, 6))])
    frames *= user.wear_drift(session, seed)
    frames += rng.normal(0.0, SENSOR_NOISE_G, size=frames.shape)
    center = (n_lead + burst.shape[0] / 2) / SAMPLE_RATE
    return ImuStream(frames), center


def _random_daily_motif(rng: np.random.Generator) -> GestureMotif:
    """Ad-hoc everyday-motion burst: random channel subset, frequency and
    envelope (the long tail of daily activities beyond the canonical set)."""
    channels = rng.choice(6, size=rng.integers(1, 4), replace=False)
    amps = rng.uniform(0.3, 0.8, size=len(channels))
    freq = float(rng.uniform(6.5, 27.0))
    duration = float(rng.uniform(0.4, 1.0))
    return _burst("variety", duration, list(zip(channels.tolist(), amps)),
                  freq, double=bool(rng.random() < 0.3),
                  pulse_gap=float(rng.uniform(0.25, 0.4)))


def generate_negative_stream(duration_s: float, seed: int,
                             user: SyntheticUser | None = None,
                             burst_rate_hz: float = 0.12,
                             walk_fraction: float | None = None) -> ImuStream:
    """Daily-activity background: posture drift, walk-like stretches,
    sporadic daily bursts (canonical motifs plus randomized variety) and
    sensor noise. No gesture motif appears."""
    if duration_s <= 0:
        raise ConfigError("duration must be positive")
    rng = _entropy(seed, user.user_id if user else 0, 303)
    n = int(round(duration_s * SAMPLE_RATE))
    t = np.arange(n) / SAMPLE_RATE
    frames = rng.normal(0.0, SENSOR_NOISE_G, size=(n, 6))

    # slow posture drift (integrated noise, heavily smoothed)
    drift = np.cumsum(rng.normal(0, 2e-4, size=(n, 3)), axis=0)
    kernel = np.full(201, 1 / 201)
    for c in range(3):
        frames[:, c] += np.convolve(drift[:, c], kernel, mode="same")

    # walk-like stretches with harmonics; part of the stream is still
    f_walk = rng.uniform(1.5, 2.5)
    gait = 0.08 * np.sin(2 * np.pi * f_walk * t) \
        + 0.03 * np.sin(2 * np.pi * 2 * f_walk * t + 1.0)
    envelope = 0.5 + 0.5 * np.sin(2 * np.pi * rng.uniform(0.01, 0.05) * t) ** 2
    frac = rng.uniform(0.3, 0.8) if walk_fraction is None else walk_fraction
    active = (rng.random(max(1, int(np.ceil(duration_s / 10)))) < frac)
    mask = np.repeat(active, int(10 * SAMPLE_RATE))[:n].astype(np.float64)
    for c, g in enumerate(rng.uniform(0.4, 1.0, size=6)):
        frames[:, c] += g * gait * envelope * mask

    # sporadic daily bursts: canonical motifs and randomized variety
    dailies = daily_motifs()
    n_bursts = rng.poisson(burst_rate_hz * duration_s)
    for _ in range(n_bursts):
        if rng.random() < 0.5:
            m = dailies[rng.integers(len(dailies))]
        else:
            m = _random_daily_motif(rng)
        wave = m.render(rng.uniform(0.45, 0.95), rng.normal(0, 0.5),
                        rng.uniform(0.9, 1.1))
        start = rng.integers(0, max(1, n - wave.shape[0]))
        frames[start:start + wave.shape[0]] += wave
    return ImuStream(frames)


def generate_activity_session(user: SyntheticUser, motif: GestureMotif,
                              n_reps: int, seed: int,
                              gap_s: tuple = (1.5, 3.0)) -> ImuStream:
    """Repeated daily activity on quiet background, rendered with the
    user's own style (brushing-teeth-like negative corpus material)."""
    rng = _entropy(seed, user.user_id, 808, zlib.crc32(motif.label.encode()))
    pieces = [rng.normal(0, SENSOR_NOISE_G,
                         size=(int(rng.uniform(2.0, 3.0) * SAMPLE_RATE), 6))]
    for _ in range(n_reps):
        burst = motif.render(user.amp_gain * rng.normal(1.0, 0.08),
                             user.freq_shift_hz, user.time_scale)
        pieces.append(burst + rng.normal(0, SENSOR_NOISE_G, size=burst.shape))
        nq = int(round(rng.uniform(*gap_s) * SAMPLE_RATE))
        pieces.append(rng.normal(0, SENSOR_NOISE_G, size=(nq, 6)))
    return ImuStream(np.vstack(pieces))


def record_shots(motif: GestureMotif, user: SyntheticUser, n_shots: int,
                 seed: int, session: int = 0, countdown_s: float = 3.0,
                 gap_s: float = 2.5, lead_in_s: float = 2.0) -> tuple:
    """Simulated shot-recording session: a stream lead-in, then each
    repetition right after its countdown. Returns (stream,
    reference_times); references are the protocol's intended shot centers
    (the performed bursts carry the user's timing jitter around them)."""
    rng = _entropy(seed, user.user_id, session, 404,
                   zlib.crc32(motif.label.encode()))
    pieces = []
    refs = []
    cursor = 0.0
    for k in range(n_shots):
        quiet = countdown_s + lead_in_s if k == 0 else gap_s
        jit = rng.normal(0.0, user.jitter_sd_s)
        nq = int(round((quiet + jit) * SAMPLE_RATE))
        pieces.append(rng.normal(0, SENSOR_NOISE_G, size=(nq, 6)))
        cursor += nq / SAMPLE_RATE
        burst = motif.render(user.amp_gain * rng.normal(1.0, 0.05),
                             user.freq_shift_hz, user.time_scale)
        burst = burst + rng.normal(0, SENSOR_NOISE_G, size=burst.shape)
        pieces.append(burst)
        refs.append(cursor - jit + motif.duration_s * user.time_scale / 2)
        cursor += burst.shape[0] / SAMPLE_RATE
    tail = int(round(1.5 * SAMPLE_RATE))
    pieces.append(rng.normal(0, SENSOR_NOISE_G, size=(tail, 6)))
    return ImuStream(np.vstack(pieces)), refs


def mixed_shot_recording(motifs: list[GestureMotif], user: SyntheticUser,
                         seed: int) -> tuple:
    """One repetition of each listed motif in a row (an inconsistent
    recording when the motifs differ)."""
    rng = _entropy(seed, user.user_id, 505)
    pieces = [rng.normal(0, SENSOR_NOISE_G, size=(300, 6))]
    refs = []
    cursor = 3.0
    for m in motifs:
        burst = m.render(user.amp_gain, user.freq_shift_hz, user.time_scale)
        pieces.append(burst + rng.normal(0, SENSOR_NOISE_G, size=burst.shape))
        refs.append(cursor + m.duration_s / 2)
        cursor += burst.shape[0] / SAMPLE_RATE
        quiet = rng.normal(0, SENSOR_NOISE_G, size=(250, 6))
        pieces.append(quiet)
        cursor += 2.5
    return ImuStream(np.vstack(pieces)), refs


@dataclass
class EvalStream:
    """A continuous stream plus its exact event ground truth."""

    stream: ImuStream
    events: list  # of (center_s, label_str)


def build_eval_stream(user: SyntheticUser, motif_labels: list[str], seed: int,
                      reps_per_motif: int = 3, gap_s: float = 3.5) -> EvalStream:
    """Gestures injected into quiet background at known times."""
    rng = _entropy(seed, user.user_id, 606)
    pieces = [rng.normal(0, SENSOR_NOISE_G, size=(200, 6))]
    cursor = 2.0
    events = []
    order = [lbl for lbl in motif_labels for _ in range(reps_per_motif)]
    rng.shuffle(order)
    for lbl in order:
        m = motif_by_label(lbl)
        burst = m.render(user.amp_gain * rng.normal(1.0, 0.05),
                         user.freq_shift_hz, user.time_scale)
        pieces.append(burst + rng.normal(0, SENSOR_NOISE_G, size=burst.shape))
        events.append((cursor + m.duration_s / 2, lbl))
        cursor += burst.shape[0] / SAMPLE_RATE
        quiet_n = int(round(rng.uniform(gap_s, gap_s + 1.0) * SAMPLE_RATE))
        pieces.append(rng.normal(0, SENSOR_NOISE_G, size=(quiet_n, 6)))
        cursor += quiet_n / SAMPLE_RATE
    return EvalStream(ImuStream(np.vstack(pieces)), events)


def split_users(n_users: int, seed: int,
                fractions=(0.5, 0.1, 0.4)) -> dict:
    """User-disjoint train/val/test partition (50/10/40 by default)."""
    if n_users < 10:
        raise ConfigError("need at least 10 users for a meaningful split")
    rng = _entropy(seed, n_users, 707)
    ids = np.arange(n_users)
    rng.shuffle(ids)
    n_train = int(round(fractions[0] * n_users))
    n_val = max(1, int(round(fractions[1] * n_users)))
    return {"train": ids[:n_train].tolist(),
            "val": ids[n_train:n_train + n_val].tolist(),
            "test": ids[n_train + n_val:].tolist()}


def save_corpus_recordings(out_dir, n_users: int, seed: int,
                           motif_labels: tuple = BASE_CLASSES[1:],
                           instances_per_gesture: int = 5, sessions: int = 2,
                           negative_s_per_user: float = 25.0) -> int:
    """Emit the corpus as recording CSVs plus ground_truth.jsonl.

    Each line: {"file", "user_id", "split", "events": [[center_s, label]]}.
    Returns the number of recordings written.
    """
    import json
    from pathlib import Path

    from .signal import write_recording

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    assignment = split_users(n_users, seed)
    split_of = {uid: s for s, ids in assignment.items() for uid in ids}
    lines = []
    n_files = 0
    per_session = int(np.ceil(instances_per_gesture / sessions))
    for uid in range(n_users):
        user = SyntheticUser.make(uid, seed)
        udir = out / f"user{uid:04d}"
        for lbl in motif_labels:
            motif = motif_by_label(lbl)
            rep = 0
            for session in range(sessions):
                for _ in range(per_session):
                    if rep >= instances_per_gesture:
                        break
                    stream, center = generate_gesture_instance(
                        motif, user, session, seed * 10_000 + rep)
                    rel = f"user{uid:04d}/{lbl}_{rep:02d}.csv"
                    write_recording(stream, out / rel)
                    lines.append({"file": rel, "user_id": uid,
                                  "split": split_of[uid],
                                  "events": [[center, lbl]]})
                    n_files += 1
                    rep += 1
        neg = generate_negative_stream(negative_s_per_user, seed * 31 + uid,
                                       user)
        rel = f"user{uid:04d}/negative.csv"
        write_recording(neg, out / rel)
        lines.append({"file": rel, "user_id": uid, "split": split_of[uid],
                      "events": []})
        n_files += 1
    with open(out / "ground_truth.jsonl", "w") as f:
        for line in lines:
            f.write(json.dumps(line) + "\n")
    return n_files


def load_corpus_recordings(data_dir, bank, negative_keep_every: int = 2,
                           class_names: tuple = BASE_CLASSES) -> LabeledWindowSet:
    """Rebuild a LabeledWindowSet from a gen-data directory."""
    import json
    from pathlib import Path

    from .signal import read_recording

    data = Path(data_dir)
    windows, labels, user_ids, splits = [], [], [], []
    cfg = WindowingConfig()
    with open(data / "ground_truth.jsonl") as f:
        for raw in f:
            line = json.loads(raw)
            stream = read_recording(data / line["file"])
            filtered = apply_filter_bank(stream, bank)
            ws = slide_windows(filtered, cfg)
            if line["events"]:
                starts = np.array([w.start_s for w in ws])
                wl = label_windows(starts, cfg.window_s,
                                   [(t, l) for t, l in line["events"]],
                                   class_names)
            else:
                ws = ws[::negative_keep_every]
                wl = np.zeros(len(ws), dtype=np.int64)
            windows.extend(w.data for w in ws)
            labels.extend(wl)
            user_ids.extend([line["user_id"]] * len(ws))
            splits.extend([line["split"]] * len(ws))
    return LabeledWindowSet(windows, np.array(labels), np.array(user_ids),
                            np.array(splits), class_names)


def label_windows(starts_s: np.ndarray, window_s: float, events: list,
                  class_names: tuple, min_overlap_frac: float = 0.7) -> np.ndarray:
    """Ground-truth window labels from the injection log: a window takes a
    gesture's class when it covers >= min_overlap_frac of the gesture."""
    labels = np.zeros(len(starts_s), dtype=np.int64)
    for center, lbl in events:
        m = motif_by_label(lbl)
        g0, g1 = center - m.duration_s / 2, center + m.duration_s / 2
        overlap = (np.minimum(starts_s + window_s, g1)
                   - np.maximum(starts_s, g0))
        hit = overlap >= min_overlap_frac * (g1 - g0)
        labels[hit] = class_names.index(lbl)
    return labels


def user_activity_sessions(user: SyntheticUser, seed: int,
                           reps: int = 4) -> list:
    """One repeated-activity session per canonical daily motif; the same
    derivation serves corpus building and atlas construction."""
    return [generate_activity_session(user, m, reps,
                                      seed=seed * 53 + user.user_id * 7 + k)
            for k, m in enumerate(daily_motifs())]


def build_corpus(n_users: int, bank, motif_labels: tuple = BASE_CLASSES[1:],
                 instances_per_gesture: int = 8, sessions: int = 2,
                 negative_s_per_user: float = 60.0, seed: int = 0,
                 negative_keep_every: int = 2, activity_reps: int = 4,
                 class_names: tuple = BASE_CLASSES) -> LabeledWindowSet:
    """Windowed pretraining corpus with user-disjoint 50/10/40 splits.

    Negative material per user: a mixed walking/still background stream
    plus one repeated-activity session per canonical daily motif.
    Gesture recordings are windowed on the 0.125 s grid and labeled from
    the injection log; negative windows are thinned by negative_keep_every
    to keep the class mix workable.
    """
    assignment = split_users(n_users, seed)
    split_of = {uid: s for s, ids in assignment.items() for uid in ids}
    cfg = WindowingConfig()
    windows, labels, user_ids, splits = [], [], [], []
    per_session = int(np.ceil(instances_per_gesture / sessions))

    def add_negative(stream, uid):
        filtered = apply_filter_bank(stream, bank)
        ws = slide_windows(filtered, cfg)[::negative_keep_every]
        windows.extend(w.data for w in ws)
        labels.extend([0] * len(ws))
        user_ids.extend([uid] * len(ws))
        splits.extend([split_of[uid]] * len(ws))

    for uid in range(n_users):
        user = SyntheticUser.make(uid, seed)
        for lbl in motif_labels:
            motif = motif_by_label(lbl)
            rep = 0
            for session in range(sessions):
                for _ in range(per_session):
                    if rep >= instances_per_gesture:
                        break
                    stream, center = generate_gesture_instance(
                        motif, user, session, seed * 10_000 + rep)
                    rep += 1
                    filtered = apply_filter_bank(stream, bank)
                    ws = slide_windows(filtered, cfg)
                    starts = np.array([w.start_s for w in ws])
                    wl = label_windows(starts, cfg.window_s,
                                       [(center, lbl)], class_names)
                    windows.extend(w.data for w in ws)
                    labels.extend(wl)
                    user_ids.extend([uid] * len(ws))
                    splits.extend([split_of[uid]] * len(ws))
        add_negative(generate_negative_stream(negative_s_per_user,
                                              seed * 31 + uid, user), uid)
        if activity_reps > 0:
            for ses in user_activity_sessions(user, seed, activity_reps):
                add_negative(ses, uid)

    return LabeledWindowSet(windows, np.array(labels), np.array(user_ids),
                            np.array(splits), class_names)
