"""Video-guided decision fusion.

An active event of a class with an associated keypoint kind snaps its
DOA to the closest such keypoint when that keypoint lies within the
angular threshold. Activities are never touched.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import AlignmentError, ValidationError
from .events import CLASS_NAMES
from .geometry import (
    PanoramaSpec,
    SphericalDoa,
    angular_distance_array,
    cart_to_sph_array,
    pixel_to_spherical,
    sph_to_cart_array,
)
from .losses import SeldPredictions
from .visual_features import KeypointFrame

_C = {name: i for i, name in enumerate(CLASS_NAMES)}
DEFAULT_CLASS_KEYPOINTS = {
    _C["male_speech"]: ("mouth",),
    _C["female_speech"]: ("mouth",),
    _C["clapping"]: ("mouth",),
    _C["laughter"]: ("mouth",),
    _C["water_tap"]: ("left_hand", "right_hand"),
    _C["walk"]: ("left_foot", "right_foot"),
}


@dataclass(frozen=True)
class FusionConfig:
    sigma_deg: float = 30.0
    activity_threshold: float = 0.5
    min_confidence: float = 0.0
    class_keypoints: Mapping[int, tuple] = field(default_factory=lambda: dict(DEFAULT_CLASS_KEYPOINTS))

    def __post_init__(self):
        if not 0.0 < self.sigma_deg <= 180.0:
            raise ValidationError(f"sigma {self.sigma_deg} outside (0, 180]")


@dataclass(frozen=True)
class FramePredictions:
    """One 100 ms frame: activity (N,), doa (N, 3)."""

    frame_index: int
    activity: np.ndarray
    doa: np.ndarray


def keypoint_candidates(kps: KeypointFrame, spec: PanoramaSpec, min_confidence: float = 0.0):
    """Keypoints as ``(kind, sort_key, unit_vector)`` with deterministic ordering."""
    out = []
    for obs in kps.observations:
        if obs.confidence < min_confidence:
            continue
        d = pixel_to_spherical(obs.position, spec)
        vec = sph_to_cart_array(d.azimuth_deg, d.elevation_deg)
        out.append((obs.kind, (obs.person_id, obs.kind_order), vec))
    out.sort(key=lambda c: c[1])
    return out


def nearest_keypoint(doa: np.ndarray, candidates, kinds) -> Optional[tuple[float, np.ndarray]]:
    """Closest allowed candidate to ``doa``; ties go to the lowest (person, kind)."""
    doa = np.asarray(doa, dtype=float)
    norm = np.linalg.norm(doa)
    if norm == 0.0:
        return None
    best = None
    for kind, key, vec in candidates:
        if kind not in kinds:
            continue
        dist = float(angular_distance_array(doa, vec))
        if best is None or dist < best[0]:
            best = (dist, vec)
    return best


def fuse_direction(doa, class_index: int, candidates, cfg: FusionConfig) -> np.ndarray:
    kinds = cfg.class_keypoints.get(class_index)
    if not kinds:
        return doa
    hit = nearest_keypoint(doa, candidates, kinds)
    if hit is not None and hit[0] < cfg.sigma_deg:
        return hit[1].copy()
    return doa


def fuse_frame(preds: FramePredictions, kps: KeypointFrame, cfg: FusionConfig = FusionConfig(),
               spec: PanoramaSpec = PanoramaSpec()) -> FramePredictions:
    if preds.frame_index != kps.time_index:
        raise AlignmentError(
            f"prediction frame {preds.frame_index} paired with keypoint frame {kps.time_index}"
        )
    candidates = keypoint_candidates(kps, spec, cfg.min_confidence)
    doa = np.array(preds.doa, dtype=float, copy=True)
    if candidates:
        for n in range(doa.shape[0]):
            if preds.activity[n] >= cfg.activity_threshold:
                doa[n] = fuse_direction(doa[n], n, candidates, cfg)
    return FramePredictions(preds.frame_index, preds.activity, doa)


def fuse_clip(preds: Sequence[FramePredictions], kps: Sequence[KeypointFrame],
              cfg: FusionConfig = FusionConfig(), spec: PanoramaSpec = PanoramaSpec()) -> list[FramePredictions]:
    if len(preds) != len(kps):
        raise AlignmentError(f"{len(preds)} prediction frames vs {len(kps)} keypoint frames")
    return [fuse_frame(p, k, cfg, spec) for p, k in zip(preds, kps)]


def fuse_seld_predictions(pred: SeldPredictions, kps: Sequence[KeypointFrame],
                          cfg: FusionConfig = FusionConfig(), spec: PanoramaSpec = PanoramaSpec()) -> SeldPredictions:
    """Batch form over a (K, N) / (K, N, 3) prediction block."""
    frames = [FramePredictions(k, pred.activity[k], pred.doa[k]) for k in range(pred.activity.shape[0])]
    fused = fuse_clip(frames, kps, cfg, spec)
    return SeldPredictions(pred.activity, np.stack([f.doa for f in fused]) if fused else pred.doa)


def fuse_events(events, kps: Sequence[KeypointFrame], cfg: FusionConfig = FusionConfig(),
                spec: PanoramaSpec = PanoramaSpec()):
    """Fuse a list of predicted :class:`EventAnnotation` rows (all treated as active)."""
    by_frame = {k.time_index: k for k in kps}
    out = []
    for e in events:
        frame = by_frame.get(e.frame_index)
        if frame is None:
            out.append(e)
            continue
        candidates = keypoint_candidates(frame, spec, cfg.min_confidence)
        doa = sph_to_cart_array(e.doa.azimuth_deg, e.doa.elevation_deg)
        fused = fuse_direction(doa, e.class_index, candidates, cfg)
        if fused is doa:
            out.append(e)
        else:
            az, el = cart_to_sph_array(fused)
            out.append(e.with_doa(SphericalDoa(float(az), float(el))))
    return out
