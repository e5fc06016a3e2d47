"""Keypoint ingestion and Gaussian mouth-position encoding.

A mouth at pixel (u, v) becomes two 64-bin likelihood vectors. Bin ``i``
spans ``[i, i + 1)`` in bin units, so its center sits at ``i + 0.5``;
the mouth position in bin units is ``(u + 0.5) * 64 / width``. The
horizontal axis is periodic (a 360 degree panorama) and uses wrapped
distance; the vertical axis does not wrap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .audio_features import AudioFeature
from .errors import AlignmentError, FusionError
from .geometry import PanoramaSpec, PixelCoord

KEYPOINT_KINDS = ("mouth", "left_hand", "right_hand", "left_foot", "right_foot")
N_BINS = 64
MAX_PERSONS = 6
VISUAL_FRAMES = 100
UPSAMPLE = 5


@dataclass(frozen=True)
class KeypointObservation:
    person_id: int
    kind: str
    position: PixelCoord
    confidence: float = 1.0

    def __post_init__(self):
        if self.kind not in KEYPOINT_KINDS:
            raise ValueError(f"unknown keypoint kind {self.kind!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def kind_order(self) -> int:
        return KEYPOINT_KINDS.index(self.kind)


@dataclass(frozen=True)
class KeypointFrame:
    time_index: int
    observations: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))


@dataclass(frozen=True)
class GaussianWidths:
    """Standard deviations as fractions of the bin count."""

    horizontal: float = 0.04
    vertical: float = 0.08

    def sigmas(self) -> tuple[float, float]:
        s_h, s_v = self.horizontal * N_BINS, self.vertical * N_BINS
        if min(s_h, s_v) < 0.5:
            raise ValueError("Gaussian width must be at least half a bin")
        return s_h, s_v


@dataclass(frozen=True)
class VisualFeature:
    """(time, persons, 2, 64); axis 2 is (horizontal, vertical)."""

    tensor: np.ndarray


def encode_gaussian(mouth: PixelCoord, spec: PanoramaSpec = PanoramaSpec(),
                    widths: GaussianWidths = GaussianWidths()) -> tuple[np.ndarray, np.ndarray]:
    mouth.check_bounds(spec)
    s_h, s_v = widths.sigmas()
    centers = np.arange(N_BINS) + 0.5
    c_h = (mouth.u + 0.5) * N_BINS / spec.width_px
    c_v = (mouth.v + 0.5) * N_BINS / spec.height_px
    d_h = np.abs(centers - c_h)
    d_h = np.minimum(d_h, N_BINS - d_h)
    d_v = centers - c_v
    return np.exp(-d_h ** 2 / (2 * s_h ** 2)), np.exp(-d_v ** 2 / (2 * s_v ** 2))


def select_mouths(frame: KeypointFrame, max_persons: int = MAX_PERSONS) -> list[KeypointObservation]:
    """Mouth keypoints ranked by confidence (desc), then person id (asc)."""
    mouths = {}
    for obs in frame.observations:
        if obs.kind != "mouth":
            continue
        best = mouths.get(obs.person_id)
        if best is None or obs.confidence > best.confidence:
            mouths[obs.person_id] = obs
    ranked = sorted(mouths.values(), key=lambda o: (-o.confidence, o.person_id))
    return ranked[:max_persons]


def assemble_visual_features(frames: Sequence[KeypointFrame], spec: PanoramaSpec = PanoramaSpec(),
                             widths: GaussianWidths = GaussianWidths(),
                             num_frames: int = VISUAL_FRAMES) -> VisualFeature:
    if len(frames) != num_frames:
        raise AlignmentError(f"expected {num_frames} keypoint frames, got {len(frames)}")
    out = np.zeros((num_frames, MAX_PERSONS, 2, N_BINS))
    for t, frame in enumerate(frames):
        if frame.time_index != t:
            raise AlignmentError(f"keypoint frame {t} carries time index {frame.time_index}")
        for slot, obs in enumerate(select_mouths(frame)):
            out[t, slot, 0], out[t, slot, 1] = encode_gaussian(obs.position, spec, widths)
    return VisualFeature(out)


def frames_from_observations(observations: Sequence[tuple[int, KeypointObservation]],
                             num_frames: int = VISUAL_FRAMES) -> list[KeypointFrame]:
    """Group ``(time_index, observation)`` pairs into a dense frame list."""
    buckets: list[list[KeypointObservation]] = [[] for _ in range(num_frames)]
    for t, obs in observations:
        if not 0 <= t < num_frames:
            raise AlignmentError(f"keypoint time index {t} outside 0..{num_frames - 1}")
        buckets[t].append(obs)
    return [KeypointFrame(t, tuple(b)) for t, b in enumerate(buckets)]


def upsample_and_fuse(visual: VisualFeature, audio: AudioFeature) -> np.ndarray:
    """Stack audio (T, 7, 64) and time-repeated visual (T, 12, 64) channels."""
    v, a = visual.tensor, audio.tensor
    if v.ndim != 4 or v.shape[1:] != (MAX_PERSONS, 2, N_BINS):
        raise FusionError(f"visual tensor has shape {v.shape}")
    if a.ndim != 3 or a.shape[2] != N_BINS:
        raise FusionError(f"audio tensor has shape {a.shape}")
    if v.shape[0] * UPSAMPLE != a.shape[0]:
        raise FusionError(
            f"{v.shape[0]} visual frames do not cover {a.shape[0]} audio frames"
        )
    rep = np.repeat(v, UPSAMPLE, axis=0).reshape(a.shape[0], MAX_PERSONS * 2, N_BINS)
    return np.concatenate([a, rep], axis=1)
