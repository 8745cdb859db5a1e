"""Command-line interface. Set FEWGEST_PROFILE to default the --profile
option; see README for the end-to-end workflow."""
from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np

from .. import nncore as nn
from ..backbone import (BASE_CLASSES, BackboneModel, train_backbone,
                        window_accuracy)
from ..datagen import (custom_motifs, load_corpus_recordings,
                       save_corpus_recordings)
from ..errors import FewgestError
from ..feedback import build_activity_atlas
from ..runtime import recognize_stream
from ..segmentation import segment_recording
from ..signal import (FilterBankConfig, design_filter_bank, read_recording)
from ..synthesis import (DeltaEncoder, DeltaVectorBank, harvest_delta_bank,
                         synthesize, train_delta_encoder)
from .profile import UserProfile
from .session import CustomizationSession, ModelBundle

_profile_opt = click.option("--profile", envvar="FEWGEST_PROFILE",
                            required=True, type=click.Path(),
                            help="profile directory (env FEWGEST_PROFILE)")


def _bank():
    return design_filter_bank(FilterBankConfig())


def _embed_corpus(corpus, model, split):
    sub = corpus.subset(split)
    emb = model.embed(sub.stack())
    return sub, emb


@click.group()
def main():
    """Few-shot wrist-gesture customization toolkit."""


@main.command("gen-data")
@click.option("--users", default=40, show_default=True)
@click.option("--instances", default=5, show_default=True)
@click.option("--hours-negative", default=0.28, show_default=True,
              help="negative stream hours split across users")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def gen_data(users, instances, hours_negative, seed, out):
    """Generate the synthetic corpus as recordings + ground truth."""
    neg_s = hours_negative * 3600.0 / users
    n = save_corpus_recordings(out, users, seed,
                               instances_per_gesture=instances,
                               negative_s_per_user=neg_s)
    click.echo(f"wrote {n} recordings to {out}")


@main.command("backbone-train")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--epochs", default=55, show_default=True)
@click.option("--batch", default=96, show_default=True)
@click.option("--lr", default=1e-3, show_default=True)
@click.option("--decay-every", default=30, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def backbone_train(data, epochs, batch, lr, decay_every, seed, out):
    """Train the base-gesture model on a gen-data directory."""
    bank = _bank()
    corpus = load_corpus_recordings(data, bank, negative_keep_every=3)
    opt = nn.OptimizerConfig(lr0=lr, decay_factor=0.1, decay_every=decay_every)
    model, log = train_backbone(corpus, opt, epochs=epochs, batch_size=batch,
                                seed=seed, balance_classes=True, verbose=True)
    model.save(out)
    log_path = Path(out).with_suffix(".log.json")
    log_path.write_text(json.dumps(
        {"best_epoch": log.best_epoch, "best_val_acc": log.best_val_acc,
         "epochs": log.epochs}))
    click.echo(f"saved {out} (best val acc {log.best_val_acc:.3f} "
               f"@ epoch {log.best_epoch})")


@main.command("backbone-eval")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--split", default="test", show_default=True)
def backbone_eval(data, ckpt, split):
    """Window-level accuracy of a checkpoint on a corpus split."""
    bank = _bank()
    corpus = load_corpus_recordings(data, bank, negative_keep_every=3)
    model = BackboneModel.load(ckpt)
    acc = window_accuracy(model, corpus.subset(split))
    click.echo(f"{split} window accuracy: {acc:.4f}")


@main.command("delta-train")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--epochs", default=200, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--bank-out", required=True, type=click.Path())
def delta_train(data, ckpt, epochs, seed, out, bank_out):
    """Train the delta encoder and harvest the delta-vector bank."""
    bank = _bank()
    corpus = load_corpus_recordings(data, bank, negative_keep_every=3)
    model = BackboneModel.load(ckpt)
    tr, tr_emb = _embed_corpus(corpus, model, "train")
    enc, log = train_delta_encoder(tr_emb, tr.labels, tr.user_ids,
                                   epochs=epochs, seed=seed, verbose=True)
    enc.save(out)
    te, te_emb = _embed_corpus(corpus, model, "test")
    dbank = harvest_delta_bank(enc, te_emb, te.labels, te.user_ids, seed=seed)
    dbank.save(bank_out)
    click.echo(f"saved {out} (best val mse {log['best_val_mse']:.5f}) "
               f"and {bank_out} ({len(dbank.vectors)} vectors)")


@main.command("delta-synth")
@click.option("--delta", required=True, type=click.Path(exists=True))
@click.option("--delta-bank", required=True, type=click.Path(exists=True))
@click.option("--embeddings", required=True, type=click.Path(exists=True),
              help="FGC1 container with an 'embeddings' tensor")
@click.option("--factor", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def delta_synth(delta, delta_bank, embeddings, factor, seed, out):
    """Synthesize extra embeddings from a saved embedding set."""
    enc = DeltaEncoder.load(delta)
    dbank = DeltaVectorBank.load(delta_bank)
    tensors, _ = nn.load_checkpoint(embeddings)
    emb = tensors["embeddings"]
    syn, _ = synthesize(enc, dbank, emb, np.zeros(len(emb)), factor=factor,
                        seed=seed)
    nn.save_checkpoint(out, {"embeddings": syn},
                       {"arch": "synthetic-embeddings-v1", "factor": factor})
    click.echo(f"synthesized {len(syn)} embeddings -> {out}")


@main.command("atlas-build")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def atlas_build(data, ckpt, out):
    """Cluster negative test-split embeddings into the activity atlas."""
    bank = _bank()
    corpus = load_corpus_recordings(data, bank, negative_keep_every=2)
    model = BackboneModel.load(ckpt)
    te = corpus.subset("test")
    neg_idx = np.flatnonzero(te.labels == 0)
    emb = model.embed(te.stack(neg_idx))
    atlas = build_activity_atlas(emb)
    atlas.save(out)
    click.echo(f"atlas with {len(atlas)} clusters -> {out}")


@main.command("init-profile")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--backbone", "backbone_path", required=True,
              type=click.Path(exists=True))
@click.option("--delta", required=True, type=click.Path(exists=True))
@click.option("--delta-bank", required=True, type=click.Path(exists=True))
@click.option("--atlas", required=True, type=click.Path(exists=True))
@click.option("--negative-cap", default=20000, show_default=True)
@click.option("--out", required=True, type=click.Path())
def init_profile(data, backbone_path, delta, delta_bank, atlas, negative_cap,
                 out):
    """Assemble a user profile from trained artifacts."""
    from ..feedback import ActivityAtlas
    bank = _bank()
    model = BackboneModel.load(backbone_path)
    corpus = load_corpus_recordings(data, bank, negative_keep_every=2)
    tr = corpus.subset("train")
    neg_idx = np.flatnonzero(tr.labels == 0)[:negative_cap]
    neg_emb = model.embed(tr.stack(neg_idx))
    UserProfile.create(out, model, DeltaEncoder.load(delta),
                       DeltaVectorBank.load(delta_bank),
                       ActivityAtlas.load(atlas), neg_emb)
    click.echo(f"profile created at {out}")


@main.command("segment")
@_profile_opt
@click.option("--recording", required=True, type=click.Path(exists=True))
@click.option("--refs", default=None, help="comma-separated reference times")
@click.option("--expected", default=3, show_default=True)
def segment(profile, recording, refs, expected):
    """Peak/shot report for a recording (JSON to stdout)."""
    prof = UserProfile(profile)
    bank = _bank()
    model = prof.backbone()
    stream = read_recording(recording)
    reference = [float(x) for x in refs.split(",")] if refs else None
    shots, peaks = segment_recording(stream, bank, model, reference, expected)
    click.echo(json.dumps({
        "peak_times": [round(t, 3) for t in peaks.peak_times],
        "rejected": [[round(t, 3), r] for t, r in peaks.rejected],
        "n_shots": len(shots.shots),
        "padded": shots.padded,
        "expected": expected}, indent=2))


@main.command("add-gesture")
@_profile_opt
@click.option("--recording", required=True, type=click.Path(exists=True))
@click.option("--gesture", required=True)
@click.option("--shots", default=3, show_default=True)
@click.option("--refs", default=None)
@click.option("--good-enough/--strict", default=False,
              help="accept a sub-0.80 gate instead of failing")
@click.option("--seed", default=0, show_default=True)
def add_gesture(profile, recording, gesture, shots, refs, good_enough, seed):
    """Run the full customization flow on a recorded shot session."""
    prof = UserProfile(profile)
    session = CustomizationSession(prof, seed=seed)
    session.start_recording(gesture, shots)
    reference = [float(x) for x in refs.split(",")] if refs else None
    verdict = session.submit_recording(read_recording(recording), reference)
    click.echo(f"verdict: {json.dumps(verdict.to_dict())}")
    if session.phase == "gate_shown" and good_enough:
        session.gate_decision("good_enough")
    click.echo(f"final phase: {session.phase}")
    if session.phase == "completed":
        click.echo(f"gesture {gesture!r} added; head classes: "
                   f"{list(prof.head().class_names)}")
    elif verdict.kind == "pass":
        acc = session.state().get("gate_accuracy")
        click.echo(f"gate accuracy {acc:.3f} below 0.80; rerun with more "
                   "shots or --good-enough")


@main.command("recognize")
@_profile_opt
@click.option("--recording", required=True, type=click.Path(exists=True))
@click.option("--out", default=None, type=click.Path(),
              help="JSONL events file (default stdout)")
def recognize(profile, recording, out):
    """Run the fused recognizer over a recording; one JSON event per line."""
    prof = UserProfile(profile)
    bundle = ModelBundle.from_profile(prof)
    stream = read_recording(recording)
    _, events = recognize_stream(stream, bundle.bank, bundle.backbone,
                                 prof.head(), prof.policy())
    lines = [json.dumps(e.to_dict()) for e in events]
    if out:
        Path(out).write_text("\n".join(lines) + ("\n" if lines else ""))
        click.echo(f"{len(events)} events -> {out}")
    else:
        for line in lines:
            click.echo(line)


@main.command("sweep")
@_profile_opt
@click.option("--users", default=5, show_default=True)
@click.option("--shots", default="1,3,5", show_default=True)
@click.option("--combo-sizes", default="1", show_default=True)
@click.option("--reps", default=1, show_default=True)
@click.option("--motifs", default=None,
              help="comma-separated motif labels (default: library)")
@click.option("--max-cells", default=200, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def sweep(profile, users, shots, combo_sizes, reps, motifs, max_cells, seed,
          out):
    """Shots x gesture-combination evaluation sweep (CSV out)."""
    from .evaluate import evaluate_sweep
    prof = UserProfile(profile)
    bundle = ModelBundle.from_profile(prof)
    pool = motifs.split(",") if motifs else [m.label for m in custom_motifs()]
    rows = evaluate_sweep(bundle, list(range(1000, 1000 + users)), pool,
                          [int(s) for s in shots.split(",")],
                          [int(s) for s in combo_sizes.split(",")],
                          reps=reps, seed=seed, out_csv=out,
                          max_cells=max_cells)
    click.echo(f"{len(rows)} rows -> {out}")


@main.command("ablate")
@_profile_opt
@click.option("--gestures", default=None,
              help="two comma-separated motif labels")
@click.option("--seeds", default=10, show_default=True)
@click.option("--users", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def ablate(profile, gestures, seeds, users, seed, out):
    """Full-pipeline vs single-stage ablations at 3 shots / 2 gestures."""
    from .evaluate import ablation_run
    prof = UserProfile(profile)
    bundle = ModelBundle.from_profile(prof)
    combo = tuple(gestures.split(",")) if gestures else \
        tuple(m.label for m in custom_motifs()[:2])
    summary = ablation_run(bundle, list(range(1000, 1000 + users)), combo,
                           n_seeds=seeds, seed=seed, out_csv=out)
    for name, vals in summary.items():
        click.echo(f"{name:18s} gesture F1 {vals['gesture_f1']:.3f} "
                   f"acc {vals['gesture_acc']:.3f} FP/h {vals['fp_per_hour']:.3f}")
    click.echo(f"summary -> {out}")


@main.command("serve")
@_profile_opt
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8470, show_default=True)
@click.option("--seed", default=0, show_default=True)
def serve_cmd(profile, host, port, seed):
    """Run the session/stream service consumed by the companion UI."""
    from .service import serve
    serve(UserProfile(profile), host, port, seed)


if __name__ == "__main__":
    try:
        main()
    except FewgestError as e:
        raise SystemExit(f"error: {e}")
