"""Channel-swap-realizable spatial transforms (ACS for audio, VPS for pixels).

A transform reflects the azimuth (optional), then rotates it by a
multiple of 90 degrees, and optionally flips the elevation sign. These
16 maps are exactly the rotations/reflections that act on FOA audio as a
signed permutation of the X, Y, Z channels, so they can be applied to
audio without any filtering. On an equirectangular frame each one is an
integer translation and/or mirror of pixel indices.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .audio_features import FoaClip, W, X, Y, Z
from .errors import UnsupportedSpecError, ValidationError
from .events import EventAnnotation
from .geometry import PanoramaSpec, PixelCoord, SphericalDoa, wrap_azimuth
from .visual_features import KeypointFrame, KeypointObservation


@dataclass(frozen=True, order=True)
class SpatialTransform:
    quarter_turns: int = 0
    reflect_azimuth: bool = False
    flip_elevation: bool = False

    def __post_init__(self):
        if self.quarter_turns not in (0, 1, 2, 3):
            raise ValueError(f"quarter_turns must be in 0..3, got {self.quarter_turns}")

    @property
    def name(self) -> str:
        parts = [f"rot{90 * self.quarter_turns}"]
        if self.reflect_azimuth:
            parts.append("refl")
        if self.flip_elevation:
            parts.append("flip")
        return "-".join(parts)

    @classmethod
    def from_name(cls, name: str) -> "SpatialTransform":
        parts = name.split("-")
        head = parts[0]
        if not head.startswith("rot") or head[3:] not in ("0", "90", "180", "270"):
            raise ValidationError(f"bad transform name {name!r}")
        flags = set(parts[1:])
        if not flags <= {"refl", "flip"} or len(flags) != len(parts) - 1:
            raise ValidationError(f"bad transform name {name!r}")
        return cls(int(head[3:]) // 90, "refl" in flags, "flip" in flags)

    def matrix(self) -> np.ndarray:
        """3x3 signed permutation acting on (x, y, z) direction vectors."""
        c, s = [(1, 0), (0, 1), (-1, 0), (0, -1)][self.quarter_turns]
        rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
        refl = np.diag([1, -1 if self.reflect_azimuth else 1, 1])
        flip = np.diag([1, 1, -1 if self.flip_elevation else 1])
        return flip @ rot @ refl


IDENTITY = SpatialTransform()
ALL_TRANSFORMS = tuple(
    SpatialTransform(q, r, f) for r, f, q in itertools.product((False, True), (False, True), range(4))
)


def from_matrix(m: np.ndarray) -> SpatialTransform:
    m = np.rint(np.asarray(m)).astype(int)
    flip = m[2, 2] == -1
    reflect = round(np.linalg.det(m[:2, :2])) == -1
    q = {(1, 0): 0, (0, 1): 1, (-1, 0): 2, (0, -1): 3}[(m[0, 0], m[1, 0])]
    t = SpatialTransform(q, bool(reflect), bool(flip))
    if not np.array_equal(t.matrix(), m):
        raise ValueError("matrix is not a channel-swap-realizable transform")
    return t


def compose(t1: SpatialTransform, t2: SpatialTransform) -> SpatialTransform:
    """Transform equal to applying ``t2`` first and then ``t1``."""
    return from_matrix(t1.matrix() @ t2.matrix())


def inverse(t: SpatialTransform) -> SpatialTransform:
    return from_matrix(t.matrix().T)


def transform_doa(t: SpatialTransform, d: SphericalDoa) -> SphericalDoa:
    sign = -1.0 if t.reflect_azimuth else 1.0
    az = wrap_azimuth(sign * d.azimuth_deg + 90.0 * t.quarter_turns)
    el = -d.elevation_deg if t.flip_elevation else d.elevation_deg
    return SphericalDoa(az, el)


def transform_xyz(t: SpatialTransform, xyz: np.ndarray) -> np.ndarray:
    """Apply to an array of Cartesian vectors with trailing axis 3."""
    return np.asarray(xyz) @ t.matrix().T


# dipole channel index per Cartesian axis
_AXIS_CHANNEL = (X, Y, Z)


@dataclass(frozen=True)
class ChannelOp:
    """Output channel ``i`` = ``signs[i] * input[sources[i]]`` (ACN order)."""

    sources: tuple
    signs: tuple

    def apply(self, samples: np.ndarray) -> np.ndarray:
        return samples[list(self.sources)] * np.asarray(self.signs, dtype=samples.dtype)[:, None]

    def describe(self) -> str:
        names = "WYZX"
        return " ".join(
            f"{names[o]}<-{'-' if sg < 0 else '+'}{names[s]}"
            for o, (s, sg) in enumerate(zip(self.sources, self.signs))
        )


def channel_op_of(t: SpatialTransform) -> ChannelOp:
    # FOA dipole gains are the direction components, so the channels
    # transform exactly like direction vectors.
    m = t.matrix()
    sources, signs = [W, 0, 0, 0], [1, 0, 0, 0]
    for out_axis in range(3):
        in_axis = int(np.flatnonzero(m[out_axis])[0])
        out_ch = _AXIS_CHANNEL[out_axis]
        sources[out_ch] = _AXIS_CHANNEL[in_axis]
        signs[out_ch] = int(m[out_axis, in_axis])
    return ChannelOp(tuple(sources), tuple(signs))


def transform_foa(t: SpatialTransform, clip: FoaClip) -> FoaClip:
    op = channel_op_of(t)
    return FoaClip(op.apply(clip.samples), clip.sample_rate)


def _check_pixel_spec(spec: PanoramaSpec) -> None:
    if spec.width_px % 4:
        raise UnsupportedSpecError(
            f"panorama width {spec.width_px} is not divisible by 4; quarter turns are not pixel-exact"
        )


def transform_pixel(t: SpatialTransform, p: PixelCoord, spec: PanoramaSpec = PanoramaSpec()) -> PixelCoord:
    _check_pixel_spec(spec)
    p.check_bounds(spec)
    u, v = p.u, p.v
    if t.reflect_azimuth:
        u = spec.width_px - 1 - u
    u = (u - t.quarter_turns * spec.width_px // 4) % spec.width_px
    if t.flip_elevation:
        v = spec.height_px - 1 - v
    return PixelCoord(u, v)


def pixel_map(t: SpatialTransform, spec: PanoramaSpec = PanoramaSpec()) -> np.ndarray:
    """Integer remap, shape (height, width, 2) holding (u', v') for each (v, u)."""
    _check_pixel_spec(spec)
    u = np.arange(spec.width_px)
    v = np.arange(spec.height_px)
    if t.reflect_azimuth:
        u = spec.width_px - 1 - u
    u = (u - t.quarter_turns * spec.width_px // 4) % spec.width_px
    if t.flip_elevation:
        v = spec.height_px - 1 - v
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu, vv], axis=-1)


def transform_annotations(t: SpatialTransform, events: Iterable[EventAnnotation]) -> list[EventAnnotation]:
    return [e.with_doa(transform_doa(t, e.doa)) for e in events]


def transform_keypoints(t: SpatialTransform, frames: Sequence[KeypointFrame],
                        spec: PanoramaSpec = PanoramaSpec()) -> list[KeypointFrame]:
    return [
        KeypointFrame(
            f.time_index,
            tuple(
                KeypointObservation(o.person_id, o.kind, transform_pixel(t, o.position, spec), o.confidence)
                for o in f.observations
            ),
        )
        for f in frames
    ]


@dataclass(frozen=True)
class AcsSet:
    transforms: tuple

    def __post_init__(self):
        ts = tuple(self.transforms)
        if len(ts) != 8:
            raise ValidationError(f"an ACS set holds exactly 8 transforms, got {len(ts)}")
        if len(set(ts)) != 8:
            raise ValidationError("ACS set transforms must be distinct")
        if IDENTITY not in ts:
            raise ValidationError("ACS set must contain the identity")
        object.__setattr__(self, "transforms", ts)

    def __iter__(self):
        return iter(self.transforms)

    def __len__(self):
        return len(self.transforms)


NAMED_SETS = {
    "default": AcsSet(tuple(SpatialTransform(q, False, f) for f in (False, True) for q in range(4))),
    "rotate-reflect": AcsSet(tuple(SpatialTransform(q, r, False) for r in (False, True) for q in range(4))),
}


def load_acs_set(name_or_path: str) -> AcsSet:
    """Resolve a named set, or read a JSON file listing transform names."""
    if name_or_path in NAMED_SETS:
        return NAMED_SETS[name_or_path]
    path = Path(name_or_path)
    if not path.is_file():
        raise ValidationError(
            f"unknown ACS set {name_or_path!r}; choose one of {sorted(NAMED_SETS)} or a JSON file"
        )
    names = json.loads(path.read_text())
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise ValidationError(f"{path}: expected a JSON list of transform names")
    return AcsSet(tuple(SpatialTransform.from_name(n) for n in names))


def transform_table() -> list[dict]:
    rows = []
    for t in ALL_TRANSFORMS:
        pix = [f"u -> (u - {t.quarter_turns}*W/4) mod W"]
        if t.reflect_azimuth:
            pix.insert(0, "u -> W-1-u")
        if t.flip_elevation:
            pix.append("v -> H-1-v")
        rows.append({
            "name": t.name,
            "quarter_turns": t.quarter_turns,
            "reflect_azimuth": t.reflect_azimuth,
            "flip_elevation": t.flip_elevation,
            "channel_op": channel_op_of(t).describe(),
            "pixel_op": "; ".join(pix),
        })
    return rows
