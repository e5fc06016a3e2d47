"""Anechoic point-source FOA simulator used as a ground-truth oracle.

Sources are plane waves encoded with ACN/SN3D first-order gains
``(W, Y, Z, X) = s * (1, sin(az)cos(el), sin(el), cos(az)cos(el))``.
A white noise floor 60 dB below the strongest source is added to every
channel.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .augmentation import AvClipPair
from .audio_features import SAMPLE_RATE, FoaClip, HOP_LEN, W, X, Y, Z, stft
from .errors import NoEstimateError, ValidationError
from .events import LABEL_HOP_S, SPEECH_CLASSES, EventAnnotation
from .geometry import PanoramaSpec, SphericalDoa, cart_to_sph_array, sph_to_cart_array, spherical_to_pixel
from .visual_features import KeypointFrame, KeypointObservation

NOISE_FLOOR_DB = -60.0
LABEL_SAMPLES = int(round(SAMPLE_RATE * LABEL_HOP_S))
STFT_PER_LABEL = LABEL_SAMPLES // HOP_LEN
MIN_INTENSITY = 1e-12


@dataclass(frozen=True)
class Segment:
    start_frame: int
    end_frame: int  # exclusive, in 100 ms label frames
    doa: SphericalDoa
    class_index: int


@dataclass(frozen=True)
class SourceTrajectory:
    segments: tuple
    signal: str = "noise"  # "noise" or "tone"
    gain: float = 0.25
    tone_hz: float = 1000.0

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.signal not in ("noise", "tone"):
            raise ValidationError(f"unknown source signal {self.signal!r}")


def _validate(trajectories: Sequence[SourceTrajectory], n_frames: int) -> None:
    if not trajectories:
        raise ValidationError("simulation needs at least one source trajectory")
    for i, traj in enumerate(trajectories):
        spans = sorted((s.start_frame, s.end_frame) for s in traj.segments)
        for a, b in spans:
            if not 0 <= a < b <= n_frames:
                raise ValidationError(f"source {i}: segment [{a}, {b}) outside 0..{n_frames}")
        for (_, prev_end), (start, _) in zip(spans, spans[1:]):
            if start < prev_end:
                raise ValidationError(f"source {i}: overlapping segments")


def _source_signal(traj: SourceTrajectory, n: int, rng: np.random.Generator) -> np.ndarray:
    if traj.signal == "tone":
        t = np.arange(n) / SAMPLE_RATE
        return np.sqrt(2.0) * np.sin(2 * np.pi * traj.tone_hz * t)
    return rng.standard_normal(n)


def simulate_clip(trajectories: Sequence[SourceTrajectory], seed: int = 0, duration_s: float = 10.0,
                  spec: PanoramaSpec = PanoramaSpec(), clip_id: str = "sim") -> AvClipPair:
    n_frames = int(round(duration_s / LABEL_HOP_S))
    n_samples = n_frames * LABEL_SAMPLES
    _validate(trajectories, n_frames)
    rng = np.random.default_rng(seed)

    audio = np.zeros((4, n_samples))
    annotations = []
    mouths: list[list[KeypointObservation]] = [[] for _ in range(n_frames)]
    for src, traj in enumerate(trajectories):
        signal = traj.gain * _source_signal(traj, n_samples, rng)
        for seg in traj.segments:
            a, b = seg.start_frame * LABEL_SAMPLES, seg.end_frame * LABEL_SAMPLES
            x, y, z = sph_to_cart_array(seg.doa.azimuth_deg, seg.doa.elevation_deg)
            gains = np.zeros(4)
            gains[W], gains[Y], gains[Z], gains[X] = 1.0, y, z, x
            audio[:, a:b] += gains[:, None] * signal[None, a:b]
            pixel = spherical_to_pixel(seg.doa, spec)
            for frame in range(seg.start_frame, seg.end_frame):
                annotations.append(EventAnnotation(frame, seg.class_index, src, seg.doa))
                if seg.class_index in SPEECH_CLASSES:
                    mouths[frame].append(KeypointObservation(src, "mouth", pixel, 1.0))

    noise_rms = max(t.gain for t in trajectories) * 10.0 ** (NOISE_FLOOR_DB / 20.0)
    audio += noise_rms * rng.standard_normal(audio.shape)
    annotations.sort(key=lambda e: (e.frame_index, e.source_index))
    keypoints = [KeypointFrame(t, tuple(obs)) for t, obs in enumerate(mouths)]
    return AvClipPair(FoaClip(audio), keypoints, annotations, clip_id, spec)


def estimate_doa_iv(clip: FoaClip, frame_range: Optional[tuple] = None) -> SphericalDoa:
    """Closed-form DOA of a single dominant source from broadband intensity.

    ``frame_range`` is a ``(start, stop)`` pair of 100 ms label frames.
    """
    bins = stft(clip).bins
    if frame_range is not None:
        start, stop = frame_range
        bins = bins[:, start * STFT_PER_LABEL: stop * STFT_PER_LABEL]
    w = np.conj(bins[W])
    iv = np.array([np.sum(np.real(w * bins[ch])) for ch in (X, Y, Z)])
    norm = float(np.linalg.norm(iv))
    if not norm > MIN_INTENSITY:
        raise NoEstimateError("intensity is too weak for a direction estimate")
    az, el = cart_to_sph_array(iv / norm)
    return SphericalDoa(float(az), float(el))


def random_directions(n: int, seed: int = 0, integer: bool = False) -> list[SphericalDoa]:
    """Directions drawn uniformly on the sphere."""
    rng = np.random.default_rng(seed)
    az = rng.uniform(-180.0, 180.0, n)
    el = np.rad2deg(np.arcsin(rng.uniform(-1.0, 1.0, n)))
    if integer:
        az, el = np.rint(az), np.rint(el)
    return [SphericalDoa(float(a), float(e)) for a, e in zip(az, el)]


def random_scene(seed: int, n_events: int = 4, duration_s: float = 10.0,
                 classes: Sequence[int] = range(13)) -> list[SourceTrajectory]:
    """Back-to-back single-source events at integer directions, one per trajectory."""
    rng = np.random.default_rng(seed)
    n_frames = int(round(duration_s / LABEL_HOP_S))
    bounds = np.linspace(0, n_frames, n_events + 1).astype(int)
    dirs = random_directions(n_events, seed=int(rng.integers(2**31)), integer=True)
    classes = list(classes)
    out = []
    for i in range(n_events):
        cls = int(classes[int(rng.integers(len(classes)))])
        start, end = int(bounds[i]) + 1, int(bounds[i + 1]) - 1
        out.append(SourceTrajectory((Segment(start, end, dirs[i], cls),), "noise", 0.1))
    return out
