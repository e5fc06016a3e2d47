"""Dataset-level steps (simulate, augment, extract, predict, fuse, score) and the full pipeline run."""
from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .audio_features import extract_audio_features
from .augmentation import AvClipPair, apply_transform
from .config import config_hash, load_config, validate_config
from .errors import DataError, NoEstimateError
from .events import EventAnnotation
from .fusion import FusionConfig, fuse_events
from .geometry import PanoramaSpec
from .io import (
    DatasetManifest,
    ManifestEntry,
    empty_keypoint_frames,
    read_foa_wav,
    read_keypoints,
    read_metadata_csv,
    write_feature,
    write_foa_wav,
    write_keypoints,
    write_manifest,
    write_metadata_csv,
)
from .metrics import FrameEvent, MetricsReport, SeldAccumulator
from .simulator import estimate_doa_iv, random_scene, simulate_clip
from .transforms import AcsSet, SpatialTransform, load_acs_set, pixel_map, transform_annotations
from .visual_features import GaussianWidths, assemble_visual_features, upsample_and_fuse

log = logging.getLogger(__name__)

WORKERS_ENV = "AVSELD_WORKERS"


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise DataError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
    return max(1, n)


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- clip file helpers


def write_pair(pair: AvClipPair, out_dir: Path, split: str) -> ManifestEntry:
    out_dir.mkdir(parents=True, exist_ok=True)
    audio = out_dir / f"{pair.clip_id}.wav"
    meta = out_dir / f"{pair.clip_id}.csv"
    kps = out_dir / f"{pair.clip_id}.json"
    write_foa_wav(audio, pair.audio)
    write_metadata_csv(pair.annotations, meta)
    write_keypoints(kps, pair.keypoints, pair.spec, pair.clip_id)
    return ManifestEntry(pair.clip_id, audio, meta, kps, split)


def read_pair(entry: ManifestEntry) -> AvClipPair:
    audio = read_foa_wav(entry.audio)
    events = read_metadata_csv(entry.metadata)
    if entry.keypoints is not None:
        doc = read_keypoints(entry.keypoints)
        frames, spec = doc.frames, doc.spec
    else:
        frames, spec = empty_keypoint_frames(int(round(audio.duration_s * 10))), PanoramaSpec()
    return AvClipPair(audio, frames, events, entry.clip_id, spec)


# ---------------------------------------------------------------- steps


def simulate_dataset(out_dir, num_clips: int, seed: int, events_per_clip: int = 4,
                     duration_s: float = 10.0, test_clips: int = 0, workers: int = 1) -> DatasetManifest:
    out_dir = Path(out_dir)
    seeds = np.random.SeedSequence(seed).generate_state(num_clips)

    def one(i):
        scene = random_scene(int(seeds[i]), events_per_clip, duration_s)
        pair = simulate_clip(scene, seed=int(seeds[i]), duration_s=duration_s, clip_id=f"sim{i:03d}")
        split = "dev-test" if i >= num_clips - test_clips else "dev-train"
        return write_pair(pair, out_dir, split)

    manifest = DatasetManifest(_map(one, list(range(num_clips)), workers), out_dir)
    write_manifest(manifest, out_dir / "manifest.json")
    return manifest


def augment_dataset(manifest: DatasetManifest, acs_set: AcsSet, out_dir, emit_pixel_map: bool = False,
                    workers: int = 1) -> DatasetManifest:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(entry):
        pair = read_pair(entry)
        return [write_pair(apply_transform(pair, t), out_dir, entry.split) for t in acs_set]

    entries = [e for group in _map(one, manifest.entries, workers) for e in group]
    if emit_pixel_map:
        specs = {read_keypoints(e.keypoints).spec for e in manifest.entries if e.keypoints is not None}
        for spec in sorted(specs, key=lambda s: (s.width_px, s.height_px)):
            for t in acs_set:
                np.save(out_dir / f"pixelmap_{t.name}_{spec.width_px}x{spec.height_px}.npy",
                        pixel_map(t, spec).astype(np.uint16))
    out = DatasetManifest(entries, out_dir)
    write_manifest(out, out_dir / "manifest.json")
    return out


def clip_features(pair: AvClipPair, kind: str = "audio", widths: GaussianWidths = GaussianWidths()) -> np.ndarray:
    audio = extract_audio_features(pair.audio)
    if kind == "audio":
        return audio.tensor
    visual = assemble_visual_features(pair.keypoints, pair.spec, widths)
    if kind == "visual":
        return visual.tensor
    return upsample_and_fuse(visual, audio)


def extract_dataset_features(manifest: DatasetManifest, out_dir, kind: str = "audio",
                             widths: GaussianWidths = GaussianWidths(), workers: int = 1) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(entry):
        path = out_dir / f"{entry.clip_id}.feat"
        write_feature(path, clip_features(read_pair(entry), kind, widths), layout=kind)
        return path

    return _map(one, manifest.entries, workers)


def event_runs(events: Sequence[EventAnnotation]) -> list[tuple[int, int, int, int]]:
    """Contiguous ``(source, class, start, stop)`` frame runs, stop exclusive."""
    keyed = sorted(events, key=lambda e: (e.source_index, e.class_index, e.frame_index))
    runs: list[list[int]] = []
    for e in keyed:
        if runs and runs[-1][:2] == [e.source_index, e.class_index] and runs[-1][3] == e.frame_index:
            runs[-1][3] += 1
        else:
            runs.append([e.source_index, e.class_index, e.frame_index, e.frame_index + 1])
    return [tuple(r) for r in runs]


def oracle_predictions(pair: AvClipPair) -> list[EventAnnotation]:
    """Per-event intensity-vector DOA estimates at the annotated frames."""
    preds = []
    for src, cls, start, stop in event_runs(pair.annotations):
        try:
            doa = estimate_doa_iv(pair.audio, (start, stop))
        except NoEstimateError:
            continue
        preds.extend(EventAnnotation(f, cls, src, doa) for f in range(start, stop))
    preds.sort(key=lambda e: (e.frame_index, e.class_index, e.source_index))
    return preds


def predict_dataset(manifest: DatasetManifest, out_dir, workers: int = 1) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(entry):
        path = out_dir / f"{entry.clip_id}.csv"
        write_metadata_csv(oracle_predictions(read_pair(entry)), path)
        return path

    return _map(one, manifest.entries, workers)


def fuse_file(pred_csv, keypoints_json, out_csv, cfg: FusionConfig = FusionConfig()) -> None:
    doc = read_keypoints(keypoints_json)
    write_metadata_csv(fuse_events(read_metadata_csv(pred_csv), doc.frames, cfg, doc.spec), out_csv)


def score_events(pairs: Sequence[tuple[Sequence[EventAnnotation], Sequence[EventAnnotation]]],
                 threshold_deg: float = 20.0) -> MetricsReport:
    acc = SeldAccumulator(threshold_deg)
    for preds, refs in pairs:
        acc.update([FrameEvent.from_annotation(e) for e in preds], [FrameEvent.from_annotation(e) for e in refs])
    return acc.report()


def score_dirs(pred_dir, ref_dir, threshold_deg: float = 20.0) -> tuple[MetricsReport, dict]:
    pred_dir, ref_dir = Path(pred_dir), Path(ref_dir)
    refs = sorted(ref_dir.glob("*.csv"))
    if not refs:
        raise DataError(f"{ref_dir}: no reference CSV files")
    pairs, per_clip = [], {}
    for ref in refs:
        pred = pred_dir / ref.name
        if not pred.is_file():
            raise DataError(f"{pred}: missing prediction file for reference {ref.name}")
        p, r = read_metadata_csv(pred), read_metadata_csv(ref)
        pairs.append((p, r))
        per_clip[ref.stem] = score_events([(p, r)], threshold_deg).as_dict()
    return score_events(pairs, threshold_deg), per_clip


# ---------------------------------------------------------------- full run


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


@dataclass
class PipelineResult:
    report: dict
    digests: dict
    out_dir: Path


def resolve_acs_set(value) -> AcsSet:
    if isinstance(value, list):
        return AcsSet(tuple(SpatialTransform.from_name(n) for n in value))
    return load_acs_set(value)


def run_pipeline(config: dict, out_dir, workers: Optional[int] = None) -> PipelineResult:
    """simulate -> augment -> features -> oracle predict -> fuse -> score, with provenance."""
    cfg = validate_config(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = workers if workers is not None else worker_count(cfg["workers"])
    acs_set = resolve_acs_set(cfg["acs_set"])
    sim = cfg["simulate"]

    log.info("simulating %d clips", sim["num_clips"])
    base = simulate_dataset(out / "sim", sim["num_clips"], cfg["seed"], sim["events_per_clip"],
                            sim["duration_s"], sim["test_clips"], workers)
    log.info("augmenting with %d transforms", len(acs_set))
    aug = augment_dataset(base, acs_set, out / "aug", workers=workers)

    if cfg["features"]["write"]:
        widths = GaussianWidths(cfg["features"]["gaussian_width_h"], cfg["features"]["gaussian_width_v"])
        if sim["duration_s"] == 10.0:
            extract_dataset_features(aug, out / "features", "fused", widths, workers)
        else:
            log.info("clips are not 10 s long; skipping feature extraction")

    predict_dataset(aug, out / "pred", workers)
    fcfg = FusionConfig(sigma_deg=cfg["fusion"]["sigma_deg"], min_confidence=cfg["fusion"]["min_confidence"])
    (out / "fused").mkdir(exist_ok=True)
    for e in aug.entries:
        fuse_file(out / "pred" / f"{e.clip_id}.csv", e.keypoints, out / "fused" / f"{e.clip_id}.csv", fcfg)

    # closure: originals transformed in memory vs augmented labels read back from disk
    thr = cfg["metrics"]["threshold_deg"]
    originals = {e.clip_id: read_metadata_csv(e.metadata) for e in base.entries}
    closure_pairs = []
    for e in base.entries:
        for t in acs_set:
            disk = read_metadata_csv(out / "aug" / f"{e.clip_id}_{t.name}.csv")
            closure_pairs.append((transform_annotations(t, originals[e.clip_id]), disk))
    closure = score_events(closure_pairs, thr)
    oracle, _ = score_dirs(out / "pred", out / "aug", thr)
    fused, _ = score_dirs(out / "fused", out / "aug", thr)

    report = {
        "provenance": {
            "config_sha256": config_hash(cfg),
            "seed": cfg["seed"],
            "toolkit_version": __version__,
            "acs_set": [t.name for t in acs_set],
        },
        "counts": {"input_clips": len(base.entries), "augmented_clips": len(aug.entries)},
        "closure": closure.as_dict(),
        "oracle_iv": oracle.as_dict(),
        "oracle_iv_fused": fused.as_dict(),
    }
    _dump(out / "config.resolved.json", cfg)
    _dump(out / "report.json", report)
    digests = {
        p.relative_to(out).as_posix(): _sha256(p)
        for p in sorted(out.rglob("*")) if p.is_file() and p.name != "digests.json"
    }
    _dump(out / "digests.json", digests)
    return PipelineResult(report, digests, out)


def run_pipeline_from_file(path, out_dir, workers: Optional[int] = None) -> PipelineResult:
    return run_pipeline(load_config(path), out_dir, workers)

