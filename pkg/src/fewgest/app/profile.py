"""User profile persistence: a directory of checkpoints plus a JSON
manifest with content hashes. All writes go through temp-then-rename so a
crash mid-update leaves the previous profile intact.

Layout (see docs/formats.md):
    manifest.json       refs + sha256 per artifact, gesture registry
    backbone.fgc        shared pre-trained model
    delta.fgc           delta encoder
    delta_bank.fgc      harvested delta vectors
    atlas.fgc           activity atlas centers
    negatives.fgc       pretraining negative embedding sample
    head.fgc            current prediction head (absent when no gestures)
    shots/<gesture>_<k>.csv   raw shot recordings per registered gesture
    sessions.jsonl      append-only session transcripts
"""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import nncore as nn
from ..backbone import BackboneModel
from ..errors import DataError
from ..feedback import ActivityAtlas
from ..head import PredictionHead
from ..runtime import AggregationPolicy
from ..segmentation import extract_shot_tensors
from ..signal import ImuStream, read_recording, write_recording
from ..synthesis import DeltaEncoder, DeltaVectorBank

MANIFEST = "manifest.json"
_ARTIFACTS = ("backbone.fgc", "delta.fgc", "delta_bank.fgc", "atlas.fgc",
              "negatives.fgc", "head.fgc")


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


@dataclass
class GestureRecord:
    name: str
    n_shots: int
    seed: int
    added_at: float
    recordings: list  # [{"file": str, "peaks": [seconds]}]


class UserProfile:
    """Owns one user's models and gesture registry."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    # -- creation / loading --------------------------------------------------
    @classmethod
    def create(cls, root: str | Path, backbone: BackboneModel,
               delta: DeltaEncoder, delta_bank: DeltaVectorBank,
               atlas: ActivityAtlas, negative_embeddings: np.ndarray,
               profile_id: str = "default") -> "UserProfile":
        prof = cls(root)
        prof.root.mkdir(parents=True, exist_ok=True)
        (prof.root / "shots").mkdir(exist_ok=True)
        backbone.save(prof.root / "backbone.fgc")
        delta.save(prof.root / "delta.fgc")
        delta_bank.save(prof.root / "delta_bank.fgc")
        atlas.save(prof.root / "atlas.fgc")
        nn.save_checkpoint(prof.root / "negatives.fgc",
                           {"embeddings": np.asarray(negative_embeddings,
                                                     np.float32)},
                           {"arch": "negative-embeddings-v1"})
        manifest = {"version": 1, "profile_id": profile_id,
                    "created_at": time.time(), "gestures": [],
                    "hashes": {}}
        prof._write_manifest(manifest)
        return prof

    def manifest(self) -> dict:
        path = self.root / MANIFEST
        if not path.exists():
            raise DataError(f"no profile manifest at {path}")
        return json.loads(path.read_text())

    def _write_manifest(self, manifest: dict) -> None:
        manifest["hashes"] = {name: nn.file_sha256(self.root / name)
                              for name in _ARTIFACTS
                              if (self.root / name).exists()}
        _atomic_write_text(self.root / MANIFEST,
                           json.dumps(manifest, indent=2))

    def verify(self) -> bool:
        """Recorded hashes match artifact bytes."""
        manifest = self.manifest()
        for name, digest in manifest["hashes"].items():
            if nn.file_sha256(self.root / name) != digest:
                return False
        return True

    # -- artifact accessors ---------------------------------------------------
    def backbone(self) -> BackboneModel:
        return BackboneModel.load(self.root / "backbone.fgc")

    def delta_encoder(self) -> DeltaEncoder:
        return DeltaEncoder.load(self.root / "delta.fgc")

    def delta_bank(self) -> DeltaVectorBank:
        return DeltaVectorBank.load(self.root / "delta_bank.fgc")

    def atlas(self) -> ActivityAtlas:
        return ActivityAtlas.load(self.root / "atlas.fgc")

    def negative_embeddings(self) -> np.ndarray:
        tensors, _ = nn.load_checkpoint(self.root / "negatives.fgc")
        return tensors["embeddings"]

    def head(self) -> "PredictionHead | None":
        path = self.root / "head.fgc"
        return PredictionHead.load(path) if path.exists() else None

    def backbone_hash(self) -> str:
        return nn.file_sha256(self.root / "backbone.fgc")

    # -- gesture registry -----------------------------------------------------
    def gestures(self) -> list:
        return [GestureRecord(**g) for g in self.manifest()["gestures"]]

    def gesture_names(self) -> tuple:
        return tuple(g.name for g in self.gestures())

    def policy(self) -> AggregationPolicy:
        return AggregationPolicy.paper_default(self.gesture_names())

    def shot_paths(self, gesture: str) -> list:
        return sorted((self.root / "shots").glob(f"{gesture}_rec*.csv"))

    def gesture_record(self, gesture: str) -> GestureRecord:
        for g in self.gestures():
            if g.name == gesture:
                return g
        raise DataError(f"gesture {gesture!r} not registered")

    def load_shot_tensors(self, gesture: str, bank) -> np.ndarray:
        """Filter-bank shot tensors re-derived from the stored recordings
        and their accepted peak times."""
        rec = self.gesture_record(gesture)
        parts = []
        for entry in rec.recordings:
            stream = read_recording(self.root / entry["file"])
            parts.append(extract_shot_tensors(stream, entry["peaks"], bank))
        return np.concatenate(parts)

    def commit_gesture(self, name: str, recordings: list, seed: int,
                       head: PredictionHead) -> None:
        """Persist a newly accepted gesture: the shot recordings with
        their accepted peak times, the retrained head, a registry entry.

        recordings: [(ImuStream, [peak seconds])].
        """
        manifest = self.manifest()
        if name in {g["name"] for g in manifest["gestures"]}:
            raise DataError(f"gesture {name!r} already registered")
        entries = []
        n_shots = 0
        for k, (stream, peaks) in enumerate(recordings):
            rel = f"shots/{name}_rec{k}.csv"
            write_recording(stream, self.root / rel)
            entries.append({"file": rel, "peaks": [float(t) for t in peaks]})
            n_shots += len(peaks)
        head.save(self.root / "head.fgc")
        manifest["gestures"].append(
            {"name": name, "n_shots": n_shots, "seed": seed,
             "added_at": time.time(), "recordings": entries})
        self._write_manifest(manifest)

    def delete_gesture(self, name: str,
                       head: "PredictionHead | None") -> None:
        """Drop a gesture; the caller supplies the retrained head (or None
        when no gestures remain)."""
        manifest = self.manifest()
        before = len(manifest["gestures"])
        manifest["gestures"] = [g for g in manifest["gestures"]
                                if g["name"] != name]
        if len(manifest["gestures"]) == before:
            raise DataError(f"gesture {name!r} not registered")
        for p in self.shot_paths(name):
            p.unlink()
        head_path = self.root / "head.fgc"
        if head is None:
            head_path.unlink(missing_ok=True)
        else:
            head.save(head_path)
        self._write_manifest(manifest)

    def append_session(self, transcript: list) -> None:
        path = self.root / "sessions.jsonl"
        with open(path, "a") as f:
            f.write(json.dumps(transcript) + "\n")
