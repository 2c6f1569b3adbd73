"""Synthetic phantom volumes with exact ground-truth labels.

Each generator is deterministic under its seed and returns the volume,
the label volume, and a descriptor recording how it was built.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .volume import LabelVolume, ScalarVolume

KINDS = ("nested-spheres-overlapping-intensity", "engraved-cube",
         "tube-tree", "tornado-field")


class PhantomError(ValueError):
    """Raised when the requested structure does not fit the dims."""


@dataclass(frozen=True)
class Phantom:
    vol: ScalarVolume
    labels: LabelVolume
    descriptor: dict

    def __post_init__(self):
        if self.vol.dims != self.labels.dims:
            raise PhantomError("volume and label dims differ")
        present = set(np.unique(self.labels.labels).tolist())
        for cid in range(1, self.labels.n_classes + 1):
            if cid not in present:
                raise PhantomError(f"foreground class {cid} is empty")


def _voxel_center_radii(dims, center):
    nx, ny, nz = dims
    xs = np.arange(nx) + 0.5 - center[0]
    ys = np.arange(ny) + 0.5 - center[1]
    zs = np.arange(nz) + 0.5 - center[2]
    return np.sqrt(xs[:, None, None] ** 2 + ys[None, :, None] ** 2
                   + zs[None, None, :] ** 2)


def _finish(intensity, labels, descriptor, rng, noise_sigma):
    if noise_sigma > 0:
        intensity = intensity + rng.normal(0.0, noise_sigma, intensity.shape)
    intensity = np.clip(intensity, 0.0, 1.0).astype(np.float32)
    return Phantom(ScalarVolume(intensity), LabelVolume(labels.astype(np.int32)),
                   descriptor)


def nested_spheres(dims, seed=0, radii=(0.16, 0.30, 0.44), overlap=0.6,
                   texture=1.0, texture_scale=1.0, noise_sigma=0.02) -> Phantom:
    """Concentric shells whose intensity ranges overlap across classes.

    Every shell has a constant base intensity plus a smooth random
    texture field whose amplitude grows toward the outer shells; with
    overlap > 0 the amplitudes are large enough that adjacent shells
    share wide intensity bands, so no 1-D intensity threshold separates
    them, while local mean and local deviation remain clean per-shell
    signatures.  overlap=0 with texture=0 reduces to constant disjoint
    shells recoverable by pure thresholding.
    """
    dims = tuple(int(d) for d in dims)
    scale = min(dims)
    r_vox = [f * scale for f in radii]
    if len(r_vox) != 3 or any(np.diff(r_vox) <= 0):
        raise PhantomError("radii must be 3 increasing fractions")
    if r_vox[-1] > scale / 2.0 - 1.0:
        raise PhantomError(f"dims {dims} too small for outer radius fraction "
                           f"{radii[-1]}")
    if r_vox[0] < 1.0:
        raise PhantomError(f"dims {dims} too small for inner radius fraction "
                           f"{radii[0]}")
    center = np.array(dims, dtype=np.float64) / 2.0
    r = _voxel_center_radii(dims, center)

    centers = (0.85, 0.57, 0.29)
    background = 0.06
    # texture amplitude per shell; `overlap` widens the shared intensity bands
    base_amp = (0.04, 0.09, 0.14)
    tex_amp = tuple(a * float(texture) * (0.5 + float(overlap)) for a in base_amp)

    rng = np.random.default_rng(seed)
    bounds = [0.0] + list(r_vox)
    labels = np.zeros(dims, dtype=np.int32)
    intensity = np.full(dims, background, dtype=np.float64)
    fields = []
    for k in range(3):
        if tex_amp[k] > 0.0:
            from scipy.ndimage import gaussian_filter
            field = gaussian_filter(rng.standard_normal(dims), texture_scale)
            field /= max(field.std(), 1e-12)
            fields.append(field)
        else:
            fields.append(None)
    for k in range(3):
        inner, outer = bounds[k], bounds[k + 1]
        mask = (r >= inner) & (r < outer)
        labels[mask] = k + 1
        intensity[mask] = centers[k]
        if fields[k] is not None:
            intensity[mask] += tex_amp[k] * fields[k][mask]
    descriptor = {"kind": "nested-spheres-overlapping-intensity", "dims": list(dims),
                  "seed": seed, "radii": list(radii), "overlap": overlap,
                  "texture": texture, "texture_scale": texture_scale,
                  "noise_sigma": noise_sigma,
                  "base_intensities": list(centers),
                  "texture_amplitudes": list(tex_amp),
                  "intensity_ranges": [[c - 2.5 * a, c + 2.5 * a]
                                       for c, a in zip(centers, tex_amp)],
                  "background_intensity": background}
    return _finish(intensity, labels, descriptor, rng, noise_sigma)


def _glyph_mask(w: int, h: int) -> np.ndarray:
    """Connected block glyph (an E shape) rasterized into (w, h)."""
    mask = np.zeros((w, h), dtype=bool)
    bar = max(1, h // 7)
    mask[: max(1, w // 4), :] = True                       # vertical spine
    for frac in (0.0, 0.5, 1.0):
        y0 = int(frac * (h - bar))
        mask[:, y0:y0 + bar] = True                        # horizontal bars
    return mask


def engraved_cube(dims, seed=0, noise_sigma=0.01) -> Phantom:
    """Solid cube with a raster-engraved glyph recessed into its top face."""
    dims = tuple(int(d) for d in dims)
    if min(dims) < 16:
        raise PhantomError(f"dims {dims} too small for an engraved cube")
    nx, ny, nz = dims
    lo = [int(0.15 * n) for n in dims]
    hi = [int(0.85 * n) for n in dims]
    labels = np.zeros(dims, dtype=np.int32)
    intensity = np.full(dims, 0.10, dtype=np.float64)
    labels[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = 1
    intensity[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = 0.72

    # glyph engraved downward from the top (+z) face
    depth = max(2, min(dims) // 16)
    gx0 = lo[0] + (hi[0] - lo[0]) // 4
    gx1 = hi[0] - (hi[0] - lo[0]) // 4
    gy0 = lo[1] + (hi[1] - lo[1]) // 4
    gy1 = hi[1] - (hi[1] - lo[1]) // 4
    glyph = _glyph_mask(gx1 - gx0, gy1 - gy0)
    gz = slice(hi[2] - depth, hi[2])
    region = labels[gx0:gx1, gy0:gy1, gz]
    region[glyph, :] = 2
    labels[gx0:gx1, gy0:gy1, gz] = region
    iregion = intensity[gx0:gx1, gy0:gy1, gz]
    iregion[glyph, :] = 0.35
    intensity[gx0:gx1, gy0:gy1, gz] = iregion

    rng = np.random.default_rng(seed)
    descriptor = {"kind": "engraved-cube", "dims": list(dims), "seed": seed,
                  "noise_sigma": noise_sigma, "glyph_depth": depth,
                  "glyph_face_axis": 2, "glyph_face_side": "high"}
    return _finish(intensity, labels, descriptor, rng, noise_sigma)


def tube_tree(dims, seed=0, noise_sigma=0.03) -> Phantom:
    """Thin branching tubes over a noisy background."""
    dims = tuple(int(d) for d in dims)
    if min(dims) < 24:
        raise PhantomError(f"dims {dims} too small for a tube tree")
    nx, ny, nz = dims
    rng = np.random.default_rng(seed)
    scale = min(dims) / 64.0
    segments = []

    def grow(start, direction, length, radius, depth):
        end = start + direction * length
        segments.append((start, end, radius))
        if depth == 0:
            return
        for _ in range(2):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            new_dir = direction + 0.75 * axis
            new_dir /= np.linalg.norm(new_dir)
            if new_dir[2] < 0.1:
                new_dir[2] = abs(new_dir[2]) + 0.1
                new_dir /= np.linalg.norm(new_dir)
            grow(end, new_dir, length * 0.7, max(1.0, radius * 0.75), depth - 1)

    root = np.array([nx / 2.0, ny / 2.0, nz * 0.08])
    grow(root, np.array([0.0, 0.0, 1.0]), nz * 0.35, max(1.5, 2.4 * scale), 3)

    labels = np.zeros(dims, dtype=np.int32)
    xs = np.arange(nx) + 0.5
    ys = np.arange(ny) + 0.5
    zs = np.arange(nz) + 0.5
    for start, end, radius in segments:
        n_steps = max(2, int(np.linalg.norm(end - start) * 2))
        for t in np.linspace(0.0, 1.0, n_steps):
            c = start + t * (end - start)
            x0 = np.clip([int(c[0] - radius - 1), int(c[0] + radius + 2)], 0, nx)
            y0 = np.clip([int(c[1] - radius - 1), int(c[1] + radius + 2)], 0, ny)
            z0 = np.clip([int(c[2] - radius - 1), int(c[2] + radius + 2)], 0, nz)
            sub = (xs[x0[0]:x0[1], None, None] - c[0]) ** 2 \
                + (ys[None, y0[0]:y0[1], None] - c[1]) ** 2 \
                + (zs[None, None, z0[0]:z0[1]] - c[2]) ** 2
            labels[x0[0]:x0[1], y0[0]:y0[1], z0[0]:z0[1]] |= (sub <= radius ** 2)

    intensity = np.where(labels > 0, 0.85, 0.18).astype(np.float64)
    descriptor = {"kind": "tube-tree", "dims": list(dims), "seed": seed,
                  "noise_sigma": noise_sigma, "n_segments": len(segments)}
    return _finish(intensity, labels, descriptor, rng, noise_sigma)


def tornado_field(dims, seed=0, noise_sigma=0.0) -> Phantom:
    """Smooth analytic swirling magnitude field with banded labels."""
    dims = tuple(int(d) for d in dims)
    if min(dims) < 8:
        raise PhantomError(f"dims {dims} too small for a tornado field")
    nx, ny, nz = dims
    xs = (np.arange(nx) + 0.5)[:, None, None]
    ys = (np.arange(ny) + 0.5)[None, :, None]
    zs = (np.arange(nz) + 0.5)[None, None, :]
    zt = zs / nz
    cx = nx / 2.0 + 0.12 * nx * np.sin(2.0 * np.pi * zt)
    cy = ny / 2.0 + 0.12 * ny * np.cos(2.0 * np.pi * zt)
    funnel_r = (0.06 + 0.20 * zt) * min(nx, ny)
    width = 0.10 * min(nx, ny)
    d = np.sqrt((xs - cx) ** 2 + (ys - cy) ** 2)
    magnitude = np.exp(-((d - funnel_r) / width) ** 2)
    intensity = (0.08 + 0.87 * magnitude).astype(np.float64)

    labels = np.zeros(dims, dtype=np.int32)
    labels[magnitude >= 0.25] = 1
    labels[magnitude >= 0.55] = 2
    labels[magnitude >= 0.85] = 3
    rng = np.random.default_rng(seed)
    descriptor = {"kind": "tornado-field", "dims": list(dims), "seed": seed,
                  "noise_sigma": noise_sigma}
    return _finish(intensity, labels, descriptor, rng, noise_sigma)


_GENERATORS = {
    "nested-spheres-overlapping-intensity": nested_spheres,
    "engraved-cube": engraved_cube,
    "tube-tree": tube_tree,
    "tornado-field": tornado_field,
}


def generate_phantom(kind: str, dims, seed: int = 0, **params) -> Phantom:
    if kind not in _GENERATORS:
        raise PhantomError(f"unknown phantom kind '{kind}' (known: {KINDS})")
    return _GENERATORS[kind](dims, seed=seed, **params)
