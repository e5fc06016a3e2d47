"""Direction representations and the equirectangular panorama mapping.

Axes: x points to the front, y to the left, z up. Azimuth grows
counter-clockwise seen from above (towards +y) and lives in (-180, 180].
In the panorama the left edge is azimuth +180 and the top edge is
elevation +90; pixel indices refer to pixel centers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SphericalDoa",
    "CartesianDoa",
    "PanoramaSpec",
    "PixelCoord",
    "wrap_azimuth",
    "spherical_to_cartesian",
    "cartesian_to_spherical",
    "angular_distance",
    "pixel_to_spherical",
    "spherical_to_pixel",
    "sph_to_cart_array",
    "cart_to_sph_array",
    "angular_distance_array",
]


def wrap_azimuth(azimuth_deg):
    """Wrap degrees into (-180, 180]. Works on floats and arrays."""
    wrapped = 180.0 - np.mod(180.0 - np.asarray(azimuth_deg, dtype=float), 360.0)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class SphericalDoa:
    azimuth_deg: float
    elevation_deg: float

    def __post_init__(self):
        el = float(self.elevation_deg)
        if not (-90.0 <= el <= 90.0) or math.isnan(el):
            raise ValueError(f"elevation {el} outside [-90, 90]")
        az = float(self.azimuth_deg)
        if not math.isfinite(az):
            raise ValueError(f"azimuth {az} is not finite")
        object.__setattr__(self, "azimuth_deg", wrap_azimuth(az))
        object.__setattr__(self, "elevation_deg", el)


@dataclass(frozen=True)
class CartesianDoa:
    """Unit direction vector; the constructor normalizes its input."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        v = np.array([self.x, self.y, self.z], dtype=float)
        norm = float(np.linalg.norm(v))
        if not np.all(np.isfinite(v)) or norm == 0.0:
            raise ValueError("a direction needs a finite, non-zero vector")
        v = v / norm
        object.__setattr__(self, "x", float(v[0]))
        object.__setattr__(self, "y", float(v[1]))
        object.__setattr__(self, "z", float(v[2]))

    @classmethod
    def from_array(cls, v) -> "CartesianDoa":
        return cls(*(float(c) for c in v))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class PanoramaSpec:
    width_px: int = 1920
    height_px: int = 960

    def __post_init__(self):
        if self.width_px < 2 or self.height_px < 2:
            raise ValueError("panorama must be at least 2x2 pixels")
        if self.width_px != 2 * self.height_px:
            raise ValueError(
                f"full-sphere panorama needs width = 2*height, got "
                f"{self.width_px}x{self.height_px}"
            )


@dataclass(frozen=True)
class PixelCoord:
    u: int
    v: int

    def check_bounds(self, spec: PanoramaSpec) -> None:
        if not (0 <= self.u < spec.width_px and 0 <= self.v < spec.height_px):
            raise IndexError(
                f"pixel ({self.u}, {self.v}) outside "
                f"{spec.width_px}x{spec.height_px} panorama"
            )


def sph_to_cart_array(azimuth_deg, elevation_deg) -> np.ndarray:
    """Vectorized conversion; returns an array of shape (..., 3)."""
    az = np.deg2rad(np.asarray(azimuth_deg, dtype=float))
    el = np.deg2rad(np.asarray(elevation_deg, dtype=float))
    cos_el = np.cos(el)
    return np.stack([cos_el * np.cos(az), cos_el * np.sin(az), np.sin(el)], axis=-1)


def cart_to_sph_array(xyz):
    """Vectorized inverse of :func:`sph_to_cart_array`.

    Returns ``(azimuth_deg, elevation_deg)``. Poles get azimuth 0.
    """
    xyz = np.asarray(xyz, dtype=float)
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    horizontal = np.hypot(x, y)
    el = np.rad2deg(np.arctan2(z, horizontal))
    az = np.rad2deg(np.arctan2(y, x))
    pole = (horizontal == 0.0) | (np.abs(el) == 90.0)
    az = np.where(pole, 0.0, az)
    az = 180.0 - np.mod(180.0 - az, 360.0)
    return az, el


def spherical_to_cartesian(d: SphericalDoa) -> CartesianDoa:
    return CartesianDoa.from_array(sph_to_cart_array(d.azimuth_deg, d.elevation_deg))


def cartesian_to_spherical(c: CartesianDoa) -> SphericalDoa:
    az, el = cart_to_sph_array(c.as_array())
    return SphericalDoa(float(az), float(el))


def angular_distance_array(a, b) -> np.ndarray:
    """Great-circle distance in degrees between (..., 3) vectors.

    Uses atan2(|a x b|, a . b): equal to the clamped arccos of the
    normalized dot product, but exact at 0 and 180 degrees and well
    conditioned for nearly parallel vectors.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dot = np.sum(a * b, axis=-1)
    return np.rad2deg(np.arctan2(cross, dot))


def angular_distance(a: CartesianDoa, b: CartesianDoa) -> float:
    return float(angular_distance_array(a.as_array(), b.as_array()))


def pixel_to_spherical(p: PixelCoord, spec: PanoramaSpec = PanoramaSpec()) -> SphericalDoa:
    p.check_bounds(spec)
    az = 180.0 - (p.u + 0.5) * 360.0 / spec.width_px
    el = 90.0 - (p.v + 0.5) * 180.0 / spec.height_px
    return SphericalDoa(az, el)


def spherical_to_pixel(d: SphericalDoa, spec: PanoramaSpec = PanoramaSpec()) -> PixelCoord:
    """Pixel whose area contains the direction (nearest pixel center)."""
    u = math.floor((180.0 - d.azimuth_deg) * spec.width_px / 360.0) % spec.width_px
    v = math.floor((90.0 - d.elevation_deg) * spec.height_px / 180.0)
    v = min(max(v, 0), spec.height_px - 1)
    return PixelCoord(int(u), int(v))
