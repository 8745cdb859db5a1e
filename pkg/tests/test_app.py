import json

import numpy as np
import pytest

from fewgest.app.profile import UserProfile
from fewgest.app.session import (CustomizationSession, PipelineResult,
                                 countdown_schedule)
from fewgest.datagen import SyntheticUser, motif_by_label, record_shots
from fewgest.errors import DataError, ProtocolError
from fewgest.head import HeadConfig, PredictionHead


@pytest.fixture
def profile(desk, tmp_path):
    return desk.make_profile(tmp_path / "prof")


def test_profile_roundtrip(profile, desk, bank):
    assert profile.verify()
    assert profile.gesture_names() == ()
    assert profile.head() is None
    model = profile.backbone()
    x = np.zeros((2, 6, 4, 100))
    assert np.array_equal(model.embed(x), desk.backbone.embed(x))
    assert profile.policy().thresholds["Clench"] == 3


def test_commit_and_reload_gesture(profile, bank):
    user = SyntheticUser.make(700, 0)
    stream, refs = record_shots(motif_by_label("WristFlick"), user, 3, seed=1)
    head = PredictionHead(("Negative", "Wave"), HeadConfig(), seed=0)
    profile.commit_gesture("Wave", [(stream, refs)], seed=0, head=head)
    assert profile.gesture_names() == ("Wave",)
    assert profile.verify()
    tensors = profile.load_shot_tensors("Wave", bank)
    assert tensors.shape == (3, 6, 4, 150)
    assert profile.policy().thresholds["Wave"] == 5
    with pytest.raises(DataError):
        profile.commit_gesture("Wave", [(stream, refs)], 0, head)


def test_delete_gesture(profile, bank):
    user = SyntheticUser.make(701, 0)
    stream, refs = record_shots(motif_by_label("WristFlick"), user, 3, seed=2)
    head = PredictionHead(("Negative", "Wave"), HeadConfig(), seed=0)
    profile.commit_gesture("Wave", [(stream, refs)], seed=0, head=head)
    profile.delete_gesture("Wave", None)
    assert profile.gesture_names() == ()
    assert profile.head() is None
    assert profile.shot_paths("Wave") == []
    with pytest.raises(DataError):
        profile.delete_gesture("Wave", None)


def test_manifest_hash_detects_tamper(profile):
    assert profile.verify()
    path = profile.root / "atlas.fgc"
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 0xFF
    path.write_bytes(bytes(raw))
    assert not profile.verify()


def test_countdown_schedule_spacing():
    refs = countdown_schedule(3)
    assert len(refs) == 3
    assert refs[0] >= 3.0  # after the first countdown
    gaps = np.diff(refs)
    assert np.all(gaps >= 2.0)  # quiet separation between shots


class _StubSession(CustomizationSession):
    """Session with the training pipeline stubbed to scripted gate values."""

    def __init__(self, profile, gate_values, **kw):
        self._gate_values = list(gate_values)
        self._trained = 0
        super().__init__(profile, bundle=object.__new__(_NullBundle), **kw)

    def _train_and_gate(self):
        acc = self._gate_values[self._trained]
        self._trained += 1
        head = PredictionHead(("Negative", self.gesture_name), HeadConfig(),
                              seed=0)
        verdict = "pass" if acc >= 0.80 else "offer_more_shots"
        self._pending = PipelineResult(head, acc, verdict, {}, {})
        self._log("gate_shown", {"accuracy": acc, "verdict": verdict})
        if verdict == "pass":
            self._complete()
        elif self._attempt >= 2:
            self._log("rejected", {"accuracy": acc})


class _NullBundle:
    pass


def _scripted_session(profile, gate_values):
    session = _StubSession(profile, gate_values)
    session.start_recording("Wave", 3)
    user = SyntheticUser.make(702, 0)
    stream, refs = record_shots(motif_by_label("WristFlick"), user, 3, seed=3)
    # bypass feedback: drive the post-pass path directly
    session._recordings.append((stream, refs))
    session._train_and_gate()
    return session, (stream, refs)


def test_gate_pass_completes(desk, tmp_path):
    profile = desk.make_profile(tmp_path / "p1")
    session, _ = _scripted_session(profile, [0.9])
    assert session.phase == "completed"
    assert profile.gesture_names() == ("Wave",)
    phases = [e["phase"] for e in session.transcript]
    assert phases[-1] == "completed"
    ts = [e["t"] for e in session.transcript]
    assert all(b > a for a, b in zip(ts, ts[1:]))


def test_gate_079_more_shots_then_completed(desk, tmp_path):
    profile = desk.make_profile(tmp_path / "p2")
    session, rec = _scripted_session(profile, [0.79, 0.85])
    assert session.phase == "gate_shown"
    session.gate_decision("more_shots")
    assert session.phase == "more_shots_recording"
    session._recordings.append(rec)
    session._attempt = 2
    session._train_and_gate()
    assert session.phase == "completed"


def test_gate_good_enough(desk, tmp_path):
    profile = desk.make_profile(tmp_path / "p3")
    session, _ = _scripted_session(profile, [0.70])
    session.gate_decision("good_enough")
    assert session.phase == "completed"
    assert profile.gesture_names() == ("Wave",)


def test_second_gate_failure_rejects(desk, tmp_path):
    profile = desk.make_profile(tmp_path / "p4")
    session, rec = _scripted_session(profile, [0.75, 0.70])
    session.gate_decision("more_shots")
    session._recordings.append(rec)
    session._attempt = 2
    session._train_and_gate()
    assert session.phase == "rejected"
    assert profile.gesture_names() == ()
    with pytest.raises(ProtocolError):
        session.gate_decision("more_shots")


def test_protocol_guards(desk, tmp_path):
    profile = desk.make_profile(tmp_path / "p5")
    session = _StubSession(profile, [0.9])
    with pytest.raises(ProtocolError):
        session.gate_decision("good_enough")
    with pytest.raises(ProtocolError):
        session.submit_recording(None)
    session.start_recording("Wave")
    with pytest.raises(ProtocolError):
        session.start_recording("Wave2")


def test_crash_safety_manifest_intact(desk, tmp_path):
    """A failing commit leaves the previous manifest readable and valid."""
    profile = desk.make_profile(tmp_path / "p6")
    before = json.loads((profile.root / "manifest.json").read_text())
    head = PredictionHead(("Negative", "Wave"), HeadConfig(), seed=0)
    user = SyntheticUser.make(703, 0)
    stream, refs = record_shots(motif_by_label("WristFlick"), user, 3, seed=4)
    profile.commit_gesture("Wave", [(stream, refs)], 0, head)
    with pytest.raises(DataError):
        profile.commit_gesture("Wave", [(stream, refs)], 0, head)
    manifest = json.loads((profile.root / "manifest.json").read_text())
    assert [g["name"] for g in manifest["gestures"]] == ["Wave"]
    assert profile.verify()
    assert before["created_at"] == manifest["created_at"]
