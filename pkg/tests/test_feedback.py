import numpy as np
import pytest

from fewgest.backbone import l2_normalize
from fewgest.datagen import (SyntheticUser, mixed_shot_recording,
                             motif_by_label, record_shots)
from fewgest.errors import DataError
from fewgest.feedback import (ActivityAtlas, FeedbackVerdict,
                              build_activity_atlas, check_daily_activity,
                              check_inconsistent, check_too_similar,
                              daily_fraction, run_feedback_pipeline)


def planted_blobs(seed=0, n_blobs=3, pts=50, sd=0.01, dim=120):
    """Well-separated unit-norm blobs; returns (points, blob means)."""
    rng = np.random.default_rng(seed)
    centers = []
    while len(centers) < n_blobs:
        c = l2_normalize(rng.normal(size=dim))
        if all(np.linalg.norm(c - o) >= 1.0 for o in centers):
            centers.append(c)
    points, means = [], []
    for c in centers:
        blob = c + rng.normal(0, sd, (pts, dim))
        points.append(blob)
        means.append(l2_normalize(blob).mean(axis=0))
    return np.concatenate(points), np.stack(means)


def test_planted_clusters_recovered():
    points, means = planted_blobs()
    atlas = build_activity_atlas(points)
    assert len(atlas) == 3
    # each blob mean is matched by one center within 0.05
    d = np.sqrt((((atlas.centers[:, None] - means[None]) ** 2).sum(-1)))
    assert np.allclose(np.sort(d.min(axis=0)), 0.0, atol=0.05)
    assert all(s >= 3 for s in atlas.sizes)


def test_two_points_no_clusters():
    pts = np.random.default_rng(0).normal(size=(2, 120))
    atlas = build_activity_atlas(pts, min_points=0)
    assert len(atlas) == 0


def test_min_points_guard():
    with pytest.raises(DataError):
        build_activity_atlas(np.zeros((50, 120)))


def test_atlas_deterministic():
    points, _ = planted_blobs(seed=4)
    a = build_activity_atlas(points)
    b = build_activity_atlas(points)
    assert np.array_equal(a.centers, b.centers)


def test_atlas_roundtrip(tmp_path):
    points, _ = planted_blobs(seed=5)
    atlas = build_activity_atlas(points)
    atlas.save(tmp_path / "atlas.fgc")
    loaded = ActivityAtlas.load(tmp_path / "atlas.fgc")
    assert np.array_equal(loaded.centers, atlas.centers)
    assert loaded.built_with["min_cluster_size"] == 3


def unit_vectors_at_distance(d, dim=120, seed=0):
    """Two unit vectors with ||u - v|| exactly d."""
    rng = np.random.default_rng(seed)
    u = l2_normalize(rng.normal(size=dim))
    w = rng.normal(size=dim)
    w = l2_normalize(w - np.dot(w, u) * u)
    cos = 1.0 - d * d / 2.0
    v = cos * u + np.sqrt(1 - cos ** 2) * w
    return u, v


def test_daily_distance_boundary_strict():
    u, v_at = unit_vectors_at_distance(0.4)
    _, v_in = unit_vectors_at_distance(0.39)
    atlas = ActivityAtlas(u[None], np.array([3]))
    assert daily_fraction(v_at[None], atlas, 0.4) == 0.0  # exactly 0.4: not close
    assert daily_fraction(v_in[None], atlas, 0.4) == 1.0


def test_check_inconsistent_rule():
    assert check_inconsistent(3, 3) is None
    v = check_inconsistent(2, 3)
    assert v.kind == "inconsistent"
    assert v.detail == {"kept": 2, "expected": 3}
    assert check_inconsistent(5, 3) is None  # extras retained
    with pytest.raises(DataError):
        check_inconsistent(1, 0)


def test_empty_atlas_passes_with_warning():
    atlas = ActivityAtlas(np.empty((0, 120)), np.empty(0))
    with pytest.warns(UserWarning):
        out = check_daily_activity(np.zeros((5, 120)), atlas)
    assert out is None


def test_too_similar_fires_on_base_motif(desk, bank):
    user = SyntheticUser.make(600, 0)
    rec, refs = record_shots(motif_by_label("Clench"), user, 3, seed=1)
    verdict, _, _ = run_feedback_pipeline(rec, bank, desk.backbone, None,
                                          desk.atlas, 3, refs)
    assert verdict.kind == "too_similar"
    assert verdict.detail["label"] == "Clench"
    assert verdict.detail["fraction"] > 0.5


def test_novel_motif_passes(desk, bank):
    user = SyntheticUser.make(601, 0)
    rec, refs = record_shots(motif_by_label("WristRotate"), user, 3, seed=2)
    verdict, shots, _ = run_feedback_pipeline(rec, bank, desk.backbone, None,
                                              desk.atlas, 3, refs)
    assert verdict.kind == "pass"
    assert len(shots.shots) >= 3


def test_mixed_shots_inconsistent(desk, bank):
    user = SyntheticUser.make(602, 0)
    motifs = [motif_by_label(l) for l in ("WristFlick", "FingerTap", "ArmLift")]
    rec, refs = mixed_shot_recording(motifs, user, seed=3)
    verdict, _, _ = run_feedback_pipeline(rec, bank, desk.backbone, None,
                                          desk.atlas, 3, refs)
    assert verdict.kind == "inconsistent"
    assert verdict.detail["kept"] < 3


def test_daily_motif_flagged(desk, bank):
    user = SyntheticUser.make(603, 0)
    rec, refs = record_shots(motif_by_label("surface_tap"), user, 3, seed=4)
    verdict, _, _ = run_feedback_pipeline(rec, bank, desk.backbone, None,
                                          desk.atlas, 3, refs)
    assert verdict.kind == "daily_activity"


def test_verdict_exclusive_and_ordering(desk, bank):
    # a base-motif recording would be both TooSimilar and (likely) near the
    # atlas; the pipeline must report TooSimilar (fixed order, short-circuit)
    user = SyntheticUser.make(604, 0)
    rec, refs = record_shots(motif_by_label("Pinch"), user, 3, seed=5)
    verdict, _, _ = run_feedback_pipeline(rec, bank, desk.backbone, None,
                                          desk.atlas, 3, refs)
    assert isinstance(verdict, FeedbackVerdict)
    assert verdict.kind == "too_similar"


def test_shot_order_invariance(desk, bank):
    user = SyntheticUser.make(605, 0)
    rec, refs = record_shots(motif_by_label("WristTilt"), user, 3, seed=6)
    from fewgest.augmentation import tensor_crops
    from fewgest.segmentation import extract_shot_tensors, segment_recording
    _, peaks = segment_recording(rec, bank, desk.backbone, refs, 3)
    tensors = extract_shot_tensors(rec, peaks.peak_times, bank)
    emb = desk.backbone.embed(tensor_crops(tensors))
    a = check_too_similar(emb, desk.backbone, None)
    perm = np.random.default_rng(0).permutation(len(emb))
    b = check_too_similar(emb[perm], desk.backbone, None)
    assert (a is None) == (b is None)
