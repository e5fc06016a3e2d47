"""Joint ACS-VPS expansion of audio-visual clips, and feature-space mixup."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .audio_features import FoaClip
from .geometry import PanoramaSpec
from .losses import SeldTargets
from .transforms import (
    AcsSet,
    NAMED_SETS,
    SpatialTransform,
    transform_annotations,
    transform_foa,
    transform_keypoints,
)

MIXUP_ALPHA = 0.5


@dataclass
class AvClipPair:
    audio: FoaClip
    keypoints: list
    annotations: list
    clip_id: str = "clip"
    spec: PanoramaSpec = field(default_factory=PanoramaSpec)


@dataclass(frozen=True)
class MixupParams:
    lam: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"mixup weight {self.lam} outside [0, 1]")

    @classmethod
    def sample(cls, rng: np.random.Generator, alpha: float = MIXUP_ALPHA) -> "MixupParams":
        return cls(float(rng.beta(alpha, alpha)))


def apply_transform(pair: AvClipPair, t: SpatialTransform) -> AvClipPair:
    return AvClipPair(
        audio=transform_foa(t, pair.audio),
        keypoints=transform_keypoints(t, pair.keypoints, pair.spec),
        annotations=transform_annotations(t, pair.annotations),
        clip_id=f"{pair.clip_id}_{t.name}",
        spec=pair.spec,
    )


def acs_vps_expand(pair: AvClipPair, acs_set: Optional[AcsSet] = None) -> list[AvClipPair]:
    acs_set = NAMED_SETS["default"] if acs_set is None else acs_set
    return [apply_transform(pair, t) for t in acs_set]


def expanded_duration(total_hours: float, acs_set_size: int = 8) -> float:
    return total_hours * acs_set_size


def mixup(a: np.ndarray, b: np.ndarray, ta: SeldTargets, tb: SeldTargets,
          params: MixupParams) -> tuple[np.ndarray, SeldTargets]:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"mixup inputs differ in shape: {a.shape} vs {b.shape}")
    if ta.activity.shape != tb.activity.shape or ta.doa.shape != tb.doa.shape:
        raise ValueError("mixup targets differ in shape")
    lam = params.lam
    if lam == 1.0:
        return a, ta
    if lam == 0.0:
        return b, tb
    # b + lam * (a - b) keeps mixup(a, a) == a exactly
    mix = lambda x, y: y + lam * (x - y)  # noqa: E731
    return mix(a, b), SeldTargets(mix(ta.activity, tb.activity), mix(ta.doa, tb.doa))
