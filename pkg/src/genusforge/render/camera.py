"""Pinhole cameras looking at the origin and the spherical camera rig."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass
class Camera:
    """Perspective camera; screen x grows to the right, screen y downward.

    Camera-space basis rows are ``right``, ``up`` and ``forward`` (toward the
    look-at point); depth is measured along ``forward``.
    """

    position: np.ndarray
    fov: float
    width: int
    height: int
    look_at: np.ndarray = field(default_factory=lambda: np.zeros(3))
    up: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.look_at = np.asarray(self.look_at, dtype=np.float64)
        self.up = np.asarray(self.up, dtype=np.float64)
        if np.allclose(self.position, self.look_at):
            raise ValueError("camera position coincides with look-at point")

    @property
    def basis(self) -> np.ndarray:
        fwd = self.look_at - self.position
        fwd = fwd / np.linalg.norm(fwd)
        up = self.up / np.linalg.norm(self.up)
        if abs(fwd @ up) > 0.999:
            up = np.array([0.0, 1.0, 0.0]) if abs(fwd[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
        right = np.cross(fwd, up)
        right /= np.linalg.norm(right)
        true_up = np.cross(right, fwd)
        return np.stack([right, true_up, fwd])

    @property
    def focal(self) -> float:
        """Focal length in pixels."""
        return 0.5 * self.height / math.tan(0.5 * self.fov)

    def project(self, X):
        """World points -> (screen xy (n, 2), depth (n,), camera coords (n, 3))."""
        B = self.basis
        c = (np.asarray(X) - self.position) @ B.T
        z = c[:, 2]
        f = self.focal
        sxy = np.empty((len(c), 2))
        sxy[:, 0] = 0.5 * self.width + f * c[:, 0] / z
        sxy[:, 1] = 0.5 * self.height - f * c[:, 1] / z
        return sxy, z, c

    def to_dict(self):
        return {
            "position": [float(v) for v in self.position],
            "look_at": [float(v) for v in self.look_at],
            "up": [float(v) for v in self.up],
            "fov": float(self.fov),
            "width": int(self.width),
            "height": int(self.height),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            position=np.array(d["position"]),
            fov=float(d["fov"]),
            width=int(d["width"]),
            height=int(d["height"]),
            look_at=np.array(d.get("look_at", [0.0, 0.0, 0.0])),
            up=np.array(d.get("up", [0.0, 0.0, 1.0])),
        )


def fov_for_fraction(distance: float, radius: float = 1.0, fraction: float = 0.9) -> float:
    """Vertical fov in which a centred sphere's silhouette spans ``fraction`` of the half-height."""
    half = math.asin(radius / distance)
    return 2.0 * math.atan(math.tan(half) / fraction)


def sphere_lattice(count: int) -> np.ndarray:
    """Unit directions of the offset Fibonacci lattice; a single point sits on +z."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if count == 1:
        return np.array([[0.0, 0.0, 1.0]])
    i = np.arange(count)
    z = 1.0 - (2.0 * i + 1.0) / count
    r = np.sqrt(1.0 - z * z)
    phi = GOLDEN_ANGLE * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def make_camera_rig(count: int = 36, radius: float = 2.5, resolution: int = 128, fov=None) -> list:
    if fov is None:
        fov = fov_for_fraction(radius)
    return [Camera(position=radius * d, fov=fov, width=resolution, height=resolution) for d in sphere_lattice(count)]
