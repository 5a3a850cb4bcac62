"""3D vectors and spherical angles for the channel pipeline.

Coordinates are right-handed with z up.  The zenith angle is measured from
the +z axis (0 = straight up, pi/2 = horizon) and the azimuth from the +x
axis counter-clockwise, wrapped to [0, 2*pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Vec3:
    """Immutable 3D vector with the handful of operations the model needs."""

    x: float
    y: float
    z: float

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, scalar: float) -> "Vec3":
        return Vec3(self.x * scalar, self.y * scalar, self.z * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def horizontal_norm(self) -> float:
        """Length of the projection onto the ground plane."""
        return math.hypot(self.x, self.y)

    def unit(self) -> "Vec3":
        n = self.norm()
        if n == 0.0:
            raise ValueError("zero vector has no direction")
        return Vec3(self.x / n, self.y / n, self.z / n)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @staticmethod
    def from_array(a) -> "Vec3":
        a = np.asarray(a, dtype=float)
        if a.shape != (3,):
            raise ValueError(f"expected 3 components, got shape {a.shape}")
        return Vec3(float(a[0]), float(a[1]), float(a[2]))


ZERO = Vec3(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SphericalAngles:
    """Azimuth/zenith pair in radians.

    Azimuth is wrapped into [0, 2*pi); zenith is clamped into [0, pi] so a
    value that drifts past a pole by rounding stays a valid direction.
    """

    azimuth: float
    zenith: float

    def __post_init__(self):
        az = self.azimuth % (2.0 * math.pi)
        zen = min(max(self.zenith, 0.0), math.pi)
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "zenith", zen)


def direction_vector(angles: SphericalAngles) -> Vec3:
    """Unit vector pointing along the given azimuth/zenith."""
    sin_zen = math.sin(angles.zenith)
    return Vec3(
        math.cos(angles.azimuth) * sin_zen,
        math.sin(angles.azimuth) * sin_zen,
        math.cos(angles.zenith),
    )


def angles_from_vector(v: Vec3) -> SphericalAngles:
    """Recover azimuth/zenith from any non-zero vector.

    Raises ValueError on the zero vector, which has no direction.
    """
    n = v.norm()
    if n == 0.0:
        raise ValueError("zero vector has no direction")
    zenith = math.acos(min(max(v.z / n, -1.0), 1.0))
    azimuth = math.atan2(v.y, v.x)
    return SphericalAngles(azimuth=azimuth, zenith=zenith)
