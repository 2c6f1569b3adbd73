"""Pinhole camera over the volume's world box (voxel index * spacing)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class CameraError(ValueError):
    """Raised for degenerate camera definitions."""


@dataclass(frozen=True)
class Camera:
    eye: tuple
    look_at: tuple
    up: tuple = (0.0, 0.0, 1.0)
    fov_y_deg: float = 40.0
    width: int = 256
    height: int = 256

    def __post_init__(self):
        eye = np.asarray(self.eye, dtype=np.float64)
        look_at = np.asarray(self.look_at, dtype=np.float64)
        up = np.asarray(self.up, dtype=np.float64)
        view = look_at - eye
        if np.linalg.norm(view) < 1e-12:
            raise CameraError("eye and look-at coincide")
        if np.linalg.norm(np.cross(view, up)) < 1e-9 * np.linalg.norm(view) * np.linalg.norm(up):
            raise CameraError("up vector is parallel to the view direction")
        if not 0.0 < self.fov_y_deg < 180.0:
            raise CameraError(f"invalid vertical fov {self.fov_y_deg}")
        if self.width < 1 or self.height < 1:
            raise CameraError("image size must be positive")
        object.__setattr__(self, "eye", tuple(float(v) for v in eye))
        object.__setattr__(self, "look_at", tuple(float(v) for v in look_at))
        object.__setattr__(self, "up", tuple(float(v) for v in up))

    def basis(self):
        eye = np.array(self.eye)
        forward = np.array(self.look_at) - eye
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, np.array(self.up, dtype=np.float64))
        right /= np.linalg.norm(right)
        true_up = np.cross(right, forward)
        return forward, right, true_up

    def ray_directions(self) -> np.ndarray:
        """(H, W, 3) unit directions through pixel centers; row 0 is the top."""
        forward, right, true_up = self.basis()
        tan_half = np.tan(np.radians(self.fov_y_deg) / 2.0)
        aspect = self.width / self.height
        ys = (0.5 - (np.arange(self.height) + 0.5) / self.height) * 2.0 * tan_half
        xs = ((np.arange(self.width) + 0.5) / self.width - 0.5) * 2.0 * tan_half * aspect
        dirs = (forward[None, None, :]
                + xs[None, :, None] * right[None, None, :]
                + ys[:, None, None] * true_up[None, None, :])
        dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
        return dirs


def orbit_camera(center, direction, radius, width=256, height=256,
                 fov_y_deg=40.0) -> Camera:
    """Camera at center + direction*radius looking back at the center."""
    direction = np.asarray(direction, dtype=np.float64)
    direction = direction / np.linalg.norm(direction)
    eye = np.asarray(center, dtype=np.float64) + direction * radius
    up = (0.0, 0.0, 1.0)
    if abs(direction[2]) > 0.999:
        up = (0.0, 1.0, 0.0)
    return Camera(tuple(eye), tuple(center), up, fov_y_deg, width, height)
