"""Scalar volume container, raw-file I/O, and derived per-voxel fields.

Volumes are stored as float32 arrays of shape (nx, ny, nz) with values
normalized to [0, 1].  On disk a volume is a raw little-endian payload in
x-fastest linear order plus a JSON sidecar carrying dims/dtype/spacing.
All containers are frozen after construction so they can be shared freely
across worker threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class VolumeError(ValueError):
    """Raised for malformed volume files or invalid volume data."""


_DTYPES = {"uint8": np.uint8, "uint16": np.uint16, "float32": np.float32}


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ScalarVolume:
    """3-D grid of scalars in [0, 1] with per-axis physical spacing."""

    data: np.ndarray                      # (nx, ny, nz) float32 in [0, 1]
    spacing: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 3:
            raise VolumeError(f"volume data must be 3-D, got shape {data.shape}")
        if min(data.shape) < 2:
            raise VolumeError(f"every axis needs >= 2 voxels, got dims {data.shape}")
        if not np.all(np.isfinite(data)):
            raise VolumeError("volume contains non-finite values")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise VolumeError("volume values must lie in [0, 1]")
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise VolumeError(f"invalid spacing {self.spacing}")
        object.__setattr__(self, "data", _freeze(data))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> tuple:
        return self.data.shape

    @property
    def n_voxels(self) -> int:
        return self.data.size

    def flat(self) -> np.ndarray:
        """Values in x-fastest linear order (the on-disk order)."""
        return self.data.ravel(order="F")


@dataclass(frozen=True)
class LabelVolume:
    """Per-voxel class ids: 0 = background, 1..N = ROI classes."""

    labels: np.ndarray                    # (nx, ny, nz) integer

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels)
        if labels.ndim != 3:
            raise VolumeError(f"label data must be 3-D, got shape {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            raise VolumeError("labels must be integers")
        if labels.min() < 0:
            raise VolumeError("labels must be non-negative")
        object.__setattr__(self, "labels", _freeze(labels))

    @property
    def dims(self) -> tuple:
        return self.labels.shape

    @property
    def n_classes(self) -> int:
        """Number of foreground classes N (background excluded)."""
        return int(self.labels.max())

    def class_ids(self) -> list:
        return [int(c) for c in np.unique(self.labels) if c > 0]


@dataclass(frozen=True)
class VoxelPatch:
    """n^3 clamp-to-edge samples centered on a voxel, x-fastest order."""

    side: int
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if self.side % 2 == 0 or self.side < 1:
            raise VolumeError(f"patch side must be odd and positive, got {self.side}")
        if values.shape != (self.side ** 3,):
            raise VolumeError(f"patch must hold side^3 values, got {values.shape}")
        object.__setattr__(self, "values", _freeze(values))


@dataclass(frozen=True)
class DerivedFields:
    """Per-voxel regression targets derived from a volume.

    gradient is the central-difference gradient divided by the global
    maximum gradient magnitude (zero volume-wide if that maximum is 0),
    so components lie in [-1, 1].  local_mean / local_std are computed
    over clamped window^3 neighborhoods with the population convention.
    """

    gradient: np.ndarray                  # (nx, ny, nz, 3) float32
    local_mean: np.ndarray                # (nx, ny, nz) float32
    local_std: np.ndarray                 # (nx, ny, nz) float32
    window: int = 5
    max_gradient_norm: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gradient", _freeze(np.ascontiguousarray(self.gradient, dtype=np.float32)))
        object.__setattr__(self, "local_mean", _freeze(np.ascontiguousarray(self.local_mean, dtype=np.float32)))
        object.__setattr__(self, "local_std", _freeze(np.ascontiguousarray(self.local_std, dtype=np.float32)))

    @property
    def gradient_magnitude(self) -> np.ndarray:
        """Magnitude of the normalized gradient, in [0, 1]."""
        return np.sqrt(np.sum(self.gradient.astype(np.float32) ** 2, axis=-1))


# ---------------------------------------------------------------------------
# File I/O: raw payload + JSON sidecar
# ---------------------------------------------------------------------------

def _sidecar_paths(path) -> tuple:
    """Resolve (meta_path, default_raw_path) from either file of the pair."""
    path = Path(path)
    if path.suffix == ".json":
        return path, path.with_suffix(".raw")
    return path.with_suffix(".json"), path


def _read_meta(meta_path: Path) -> dict:
    if not meta_path.exists():
        raise VolumeError(f"missing volume metadata file: {meta_path}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise VolumeError(f"unparseable volume metadata {meta_path}: {exc}") from exc
    for key in ("dims", "dtype"):
        if key not in meta:
            raise VolumeError(f"metadata {meta_path} missing key '{key}'")
    return meta


def _read_payload(meta: dict, meta_path: Path, raw_default: Path) -> np.ndarray:
    dims = tuple(int(d) for d in meta["dims"])
    if len(dims) != 3 or min(dims) < 1:
        raise VolumeError(f"invalid dims {meta['dims']}")
    dtype_name = meta["dtype"]
    if dtype_name not in _DTYPES:
        raise VolumeError(f"unsupported element type '{dtype_name}' "
                          f"(supported: {sorted(_DTYPES)})")
    endianness = meta.get("endianness", "little")
    if endianness not in ("little", "big"):
        raise VolumeError(f"unsupported endianness '{endianness}'")
    raw_path = meta_path.parent / meta.get("data", raw_default.name)
    if not raw_path.exists():
        raise VolumeError(f"missing volume payload file: {raw_path}")
    payload = raw_path.read_bytes()
    dtype = np.dtype(_DTYPES[dtype_name]).newbyteorder("<" if endianness == "little" else ">")
    expected = int(np.prod(dims)) * dtype.itemsize
    if len(payload) != expected:
        raise VolumeError(f"payload size mismatch: metadata implies {expected} bytes, "
                          f"file has {len(payload)}")
    arr = np.frombuffer(payload, dtype=dtype)
    # x-fastest linear order on disk
    return arr.reshape(dims, order="F")


def load_volume(path) -> ScalarVolume:
    """Load a raw+sidecar volume and min-max normalize it to [0, 1].

    A constant volume normalizes to all zeros.
    """
    meta_path, raw_default = _sidecar_paths(path)
    meta = _read_meta(meta_path)
    arr = _read_payload(meta, meta_path, raw_default).astype(np.float32)
    if not np.all(np.isfinite(arr)):
        raise VolumeError(f"volume {meta_path} contains non-finite values")
    lo, hi = float(arr.min()), float(arr.max())
    if hi > lo:
        arr = (arr - lo) / (hi - lo)
    else:
        arr = np.zeros_like(arr)
    spacing = tuple(float(s) for s in meta.get("spacing", (1.0, 1.0, 1.0)))
    return ScalarVolume(arr, spacing)


def save_volume(vol: ScalarVolume, path, dtype: str = "float32") -> Path:
    """Write a volume as raw little-endian payload + JSON sidecar.

    Returns the metadata path.  float32 round-trips losslessly; integer
    dtypes quantize to the full dtype range.
    """
    if dtype not in _DTYPES:
        raise VolumeError(f"unsupported element type '{dtype}'")
    meta_path, raw_path = _sidecar_paths(path)
    data = vol.flat()
    if dtype == "float32":
        payload = data.astype("<f4")
    else:
        scale = float(np.iinfo(_DTYPES[dtype]).max)
        payload = np.round(data * scale).astype(np.dtype(_DTYPES[dtype]).newbyteorder("<"))
    raw_path.parent.mkdir(parents=True, exist_ok=True)
    raw_path.write_bytes(payload.tobytes())
    meta = {
        "dims": list(vol.dims),
        "dtype": dtype,
        "spacing": list(vol.spacing),
        "endianness": "little",
        "data": raw_path.name,
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    return meta_path


def load_labels(path) -> LabelVolume:
    """Load a label volume (uint8 payload, same sidecar layout)."""
    meta_path, raw_default = _sidecar_paths(path)
    meta = _read_meta(meta_path)
    arr = _read_payload(meta, meta_path, raw_default)
    if not np.issubdtype(arr.dtype, np.integer):
        raise VolumeError("label payload must be an integer type")
    return LabelVolume(arr.astype(np.int32))


def save_labels(labels: LabelVolume, path) -> Path:
    if labels.labels.max() > 255:
        raise VolumeError("label export supports at most 255 classes")
    meta_path, raw_path = _sidecar_paths(path)
    raw_path.parent.mkdir(parents=True, exist_ok=True)
    raw_path.write_bytes(labels.labels.astype(np.uint8).ravel(order="F").tobytes())
    meta = {
        "dims": list(labels.dims),
        "dtype": "uint8",
        "spacing": [1.0, 1.0, 1.0],
        "endianness": "little",
        "data": raw_path.name,
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    return meta_path


# ---------------------------------------------------------------------------
# Patches and local statistics
# ---------------------------------------------------------------------------

def pad_edge(vol: ScalarVolume, half: int) -> np.ndarray:
    """Clamp-to-edge padded copy used for patch/window gathering."""
    return np.pad(vol.data, half, mode="edge")


def extract_patch(vol: ScalarVolume, idx, n: int = 5) -> VoxelPatch:
    """Gather the n^3 neighborhood of voxel idx, clamped at the borders."""
    if n % 2 == 0:
        raise VolumeError(f"patch side must be odd, got {n}")
    i, j, k = (int(v) for v in idx)
    nx, ny, nz = vol.dims
    if not (0 <= i < nx and 0 <= j < ny and 0 <= k < nz):
        raise VolumeError(f"voxel index {idx} out of bounds for dims {vol.dims}")
    half = n // 2
    xs = np.clip(np.arange(i - half, i + half + 1), 0, nx - 1)
    ys = np.clip(np.arange(j - half, j + half + 1), 0, ny - 1)
    zs = np.clip(np.arange(k - half, k + half + 1), 0, nz - 1)
    block = vol.data[np.ix_(xs, ys, zs)]
    # x-fastest ordering within the patch
    return VoxelPatch(n, block.transpose(2, 1, 0).reshape(-1))


class PatchSource:
    """Batch patch gatherer over a clamp-padded volume.

    Produces (B, n^3) float arrays in the same x-fastest order as
    extract_patch, without re-padding per call.
    """

    def __init__(self, vol: ScalarVolume, n: int = 5, dtype=np.float32):
        if n % 2 == 0:
            raise VolumeError(f"patch side must be odd, got {n}")
        self.n = n
        self.half = n // 2
        self.dims = vol.dims
        padded = pad_edge(vol, self.half).astype(dtype)
        self._view = np.lib.stride_tricks.sliding_window_view(padded, (n, n, n))

    def gather(self, ix, iy, iz) -> np.ndarray:
        block = self._view[ix, iy, iz]             # (B, n, n, n), window axes x,y,z
        b = block.shape[0]
        return block.transpose(0, 3, 2, 1).reshape(b, self.n ** 3)


def compute_derived_fields(vol: ScalarVolume, n: int = 5) -> DerivedFields:
    """Gradient plus windowed mean/std targets.

    Arithmetic is fixed (slice-wise float32 ops in x, y, z order; window
    accumulation in x-fastest offset order) so results are bit-identical
    to a per-voxel reference loop using the same expressions.
    """
    if n % 2 == 0:
        raise VolumeError(f"window side must be odd, got {n}")
    data = vol.data
    grad = np.empty(data.shape + (3,), dtype=np.float32)
    for axis in range(3):
        s = np.float32(vol.spacing[axis])
        g = np.empty_like(data)
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        mid = [slice(None)] * 3
        lo[axis], hi[axis], mid[axis] = slice(0, -2), slice(2, None), slice(1, -1)
        g[tuple(mid)] = (data[tuple(hi)] - data[tuple(lo)]) / (np.float32(2.0) * s)
        first, second = [slice(None)] * 3, [slice(None)] * 3
        first[axis], second[axis] = slice(0, 1), slice(1, 2)
        g[tuple(first)] = (data[tuple(second)] - data[tuple(first)]) / s
        last, last2 = [slice(None)] * 3, [slice(None)] * 3
        last[axis], last2[axis] = slice(-1, None), slice(-2, -1)
        g[tuple(last)] = (data[tuple(last)] - data[tuple(last2)]) / s
        grad[..., axis] = g

    norm = np.sqrt(grad[..., 0] ** 2 + grad[..., 1] ** 2 + grad[..., 2] ** 2)
    max_norm = float(norm.max()) if norm.size else 0.0
    if max_norm > 0.0:
        grad = grad / np.float32(max_norm)

    half = n // 2
    padded = pad_edge(vol, half)
    nx, ny, nz = data.shape
    inv = np.float32(1.0 / float(n ** 3))
    acc = np.zeros_like(data)
    # accumulate in x-fastest offset order to pin summation order
    for dz in range(n):
        for dy in range(n):
            for dx in range(n):
                acc = acc + padded[dx:dx + nx, dy:dy + ny, dz:dz + nz]
    mean = acc * inv
    acc2 = np.zeros_like(data)
    for dz in range(n):
        for dy in range(n):
            for dx in range(n):
                d = padded[dx:dx + nx, dy:dy + ny, dz:dz + nz] - mean
                acc2 = acc2 + d * d
    std = np.sqrt(acc2 * inv)
    return DerivedFields(grad, mean, std, window=n, max_gradient_norm=max_norm)


# ---------------------------------------------------------------------------
# Trilinear sampling
# ---------------------------------------------------------------------------

def trilinear_batch(data: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Trilinear interpolation of (M, 3) voxel-space points, clamped.

    Points live in grid-point coordinates: p = (i, j, k) lands exactly on
    voxel (i, j, k).  data may carry a trailing channel axis, in which
    case the result is (M, channels).
    """
    nx, ny, nz = data.shape[:3]
    p = np.empty_like(pts, dtype=np.float64)
    p[:, 0] = np.clip(pts[:, 0], 0.0, nx - 1)
    p[:, 1] = np.clip(pts[:, 1], 0.0, ny - 1)
    p[:, 2] = np.clip(pts[:, 2], 0.0, nz - 1)
    i0 = np.minimum(np.floor(p).astype(np.int64), np.array([nx - 2, ny - 2, nz - 2]))
    i0 = np.maximum(i0, 0)
    f = p - i0
    x0, y0, z0 = i0[:, 0], i0[:, 1], i0[:, 2]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
    if data.ndim == 4:
        fx, fy, fz = fx[:, None], fy[:, None], fz[:, None]
    c000 = data[x0, y0, z0]
    c100 = data[x0 + 1, y0, z0]
    c010 = data[x0, y0 + 1, z0]
    c110 = data[x0 + 1, y0 + 1, z0]
    c001 = data[x0, y0, z0 + 1]
    c101 = data[x0 + 1, y0, z0 + 1]
    c011 = data[x0, y0 + 1, z0 + 1]
    c111 = data[x0 + 1, y0 + 1, z0 + 1]
    c00 = c000 * (1 - fx) + c100 * fx
    c10 = c010 * (1 - fx) + c110 * fx
    c01 = c001 * (1 - fx) + c101 * fx
    c11 = c011 * (1 - fx) + c111 * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    return c0 * (1 - fz) + c1 * fz


def sample_trilinear(vol: ScalarVolume, p) -> float:
    """Trilinear sample at a continuous voxel-space position (clamped)."""
    pts = np.asarray(p, dtype=np.float64).reshape(1, 3)
    return float(trilinear_batch(vol.data, pts)[0])


def normalized_coords(dims) -> np.ndarray:
    """Voxel-center coordinates in [0, 1]^3, x-fastest flat order, (N, 3)."""
    nx, ny, nz = dims
    xs = (np.arange(nx, dtype=np.float64) + 0.5) / nx
    ys = (np.arange(ny, dtype=np.float64) + 0.5) / ny
    zs = (np.arange(nz, dtype=np.float64) + 0.5) / nz
    gz, gy, gx = np.meshgrid(zs, ys, xs, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    return pts


def flat_index(dims, ix, iy, iz):
    """x-fastest linear index of voxel (ix, iy, iz)."""
    nx, ny, _ = dims
    return ix + nx * (iy + ny * iz)
