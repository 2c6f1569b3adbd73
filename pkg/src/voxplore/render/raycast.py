"""Front-to-back ray casting over (intensity, probability) volumes.

Rays march through the world box at a fixed step, fetch trilinear
intensity and per-class probabilities (renormalized to sum 1 after
interpolation), shade with the configured mode, apply step-corrected
opacity, and composite front-to-back with early termination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..forest import ProbabilityVolume
from ..volume import ScalarVolume, trilinear_batch
from .camera import Camera
from .shading import shade_probabilistic, shade_probability_intensity
from .tf import ClassTransferFunction, TransferFunctionSet

MODES = ("probabilistic", "probability_intensity")


@dataclass(frozen=True)
class RenderConfig:
    mode: str = "probability_intensity"
    step_size: float = 0.5                 # in voxel units
    early_termination: float = 0.99
    ref_step: float = 1.0                  # opacity-correction reference step
    default_tau: float = 0.5
    background: tuple = (0.0, 0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown render mode '{self.mode}'")
        if self.step_size <= 0 or self.ref_step <= 0:
            raise ValueError("step sizes must be positive")


def step_corrected_alpha(alpha: np.ndarray, step: float, ref_step: float) -> np.ndarray:
    """Resolution-independent opacity: 1 - (1 - a)^(step/ref)."""
    return 1.0 - np.power(1.0 - np.clip(alpha, 0.0, 1.0), step / ref_step)


def composite_front_to_back(samples) -> tuple:
    """Reference compositor for a single ray.

    samples is an iterable of (rgb, alpha) already step-corrected; returns
    accumulated (rgb, alpha).
    """
    acc_rgb = np.zeros(3, dtype=np.float64)
    acc_a = 0.0
    for rgb, alpha in samples:
        acc_rgb = acc_rgb + (1.0 - acc_a) * alpha * np.asarray(rgb, dtype=np.float64)
        acc_a = acc_a + (1.0 - acc_a) * alpha
    return acc_rgb, acc_a


def _ray_box_range(origins, dirs, box_max):
    """Entry/exit distances of rays against [0, box_max]; tnear clamped >= 0."""
    inv = np.where(np.abs(dirs) > 1e-12, 1.0 / np.where(dirs == 0, 1e-30, dirs), np.inf)
    t0 = (0.0 - origins) * inv
    t1 = (box_max[None, :] - origins) * inv
    tmin = np.minimum(t0, t1)
    tmax = np.maximum(t0, t1)
    # axes the ray is parallel to: inside -> full range, outside -> miss
    parallel = np.abs(dirs) <= 1e-12
    inside = (origins >= 0.0) & (origins <= box_max[None, :])
    tmin = np.where(parallel, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(parallel, np.where(inside, np.inf, -np.inf), tmax)
    tnear = np.maximum(tmin.max(axis=1), 0.0)
    tfar = tmax.min(axis=1)
    return tnear, tfar


def render(vol: ScalarVolume, prob: ProbabilityVolume, tfset: TransferFunctionSet,
           camera: Camera, config: RenderConfig = RenderConfig()) -> np.ndarray:
    """Render an RGBA float image in [0, 1], shape (height, width, 4)."""
    if prob is not None and tuple(prob.dims) != tuple(vol.dims):
        raise ValueError(f"probability dims {prob.dims} != volume dims {vol.dims}")
    spacing = np.array(vol.spacing)
    dims = np.array(vol.dims, dtype=np.float64)
    box_max = dims * spacing

    if prob is not None:
        fg_ids = prob.foreground_ids
        prob_grid = np.ascontiguousarray(prob.grid()[..., [
            i for i, c in enumerate(prob.class_ids) if c > 0]], dtype=np.float32)
    else:
        # implicit single class with probability 1 everywhere
        fg_ids = (1,)
        prob_grid = None
    tfs = tfset.aligned(fg_ids)
    taus = np.array([ctf.tau for ctf in tfs], dtype=np.float64)

    dirs = camera.ray_directions().reshape(-1, 3)
    n_rays = dirs.shape[0]
    origins = np.broadcast_to(np.array(camera.eye), (n_rays, 3))
    tnear, tfar = _ray_box_range(origins, dirs, box_max)

    step_world = config.step_size * float(spacing.min())
    acc_rgb = np.zeros((n_rays, 3), dtype=np.float64)
    acc_a = np.zeros(n_rays, dtype=np.float64)

    hit = tfar > tnear
    max_steps = int(np.ceil((tfar[hit] - tnear[hit]).max() / step_world)) if hit.any() else 0
    active = np.nonzero(hit)[0]
    t = tnear + 0.5 * step_world
    for _ in range(max_steps):
        active = active[(t[active] < tfar[active]) &
                        (acc_a[active] < config.early_termination)]
        if active.size == 0:
            break
        pos = origins[active] + dirs[active] * t[active][:, None]
        q = pos / spacing[None, :] - 0.5
        intensity = trilinear_batch(vol.data, q)
        if prob_grid is not None:
            p = trilinear_batch(prob_grid, q)
            total = p.sum(axis=1)
            nz = total > 0
            p[nz] /= total[nz, None]
        else:
            p = np.ones((len(active), 1), dtype=np.float64)
        if config.mode == "probabilistic":
            rgb, alpha = shade_probabilistic(p, tfs)
        else:
            rgb, alpha = shade_probability_intensity(p, intensity, taus, tfs)
        a_corr = step_corrected_alpha(alpha, config.step_size, config.ref_step)
        trans = 1.0 - acc_a[active]
        acc_rgb[active] += trans[:, None] * a_corr[:, None] * rgb
        acc_a[active] += trans * a_corr
        t[active] += step_world

    bg = np.asarray(config.background, dtype=np.float64)
    out = np.empty((n_rays, 4), dtype=np.float64)
    out[:, :3] = acc_rgb + (1.0 - acc_a)[:, None] * bg[None, :3]
    out[:, 3] = acc_a + (1.0 - acc_a) * bg[3]
    return out.reshape(camera.height, camera.width, 4)


def render_intensity(vol: ScalarVolume, tf: ClassTransferFunction, camera: Camera,
                     config: RenderConfig = None) -> np.ndarray:
    """Conventional intensity-TF rendering (used for viewpoint thumbnails)."""
    if config is None:
        config = RenderConfig(mode="probability_intensity")
    tfset = TransferFunctionSet({1: ClassTransferFunction(tf.color, tf.opacity, 0.0)})
    return render(vol, None, tfset, camera, config)
