"""Per-voxel feature extraction and the feature-cache file format."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..volume import PatchSource, ScalarVolume, normalized_coords
from .config import ModelConfig, TrainConfig
from .model import InrModel, forward

_MAGIC = b"VXFV"
_VERSION = 1


class FeatureCacheError(ValueError):
    """Raised for malformed or tampered feature-cache files."""


@dataclass(frozen=True)
class FeatureVolume:
    """Final-hidden-layer activations for every voxel.

    features is (n_voxels, width) in x-fastest voxel order; source_hash
    binds the features to the originating volume and configuration, and
    volume_hash to the volume bytes alone (for staleness checks by
    consumers that do not know the training configuration).
    """

    dims: tuple
    features: np.ndarray
    source_hash: str
    volume_hash: str = ""

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features)
        if feats.ndim != 2 or feats.shape[0] != int(np.prod(self.dims)):
            raise ValueError(f"feature shape {feats.shape} does not cover dims {self.dims}")
        if not np.all(np.isfinite(feats)):
            raise ValueError("non-finite feature values")
        feats.flags.writeable = False
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def width(self) -> int:
        return self.features.shape[1]


def volume_content_hash(vol: ScalarVolume) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(vol.data).tobytes())
    h.update(json.dumps(vol.spacing).encode())
    return h.hexdigest()


def feature_source_hash(vol: ScalarVolume, model_cfg: ModelConfig,
                        train_cfg: TrainConfig) -> str:
    """Digest binding a feature volume to its volume and configuration."""
    h = hashlib.sha256()
    h.update(volume_content_hash(vol).encode())
    h.update(json.dumps(model_cfg.to_dict(), sort_keys=True).encode())
    h.update(json.dumps(train_cfg.to_dict(), sort_keys=True).encode())
    return h.hexdigest()


def extract_features(model: InrModel, vol: ScalarVolume,
                     source_hash: str = "", chunk: int = 65536) -> FeatureVolume:
    """Evaluate the network at every voxel and keep the hidden activations."""
    cfg = model.config
    n = vol.n_voxels
    nx, ny, _ = vol.dims
    coords = normalized_coords(vol.dims).astype(model.dtype)
    patches = (PatchSource(vol, cfg.patch_side, dtype=model.dtype)
               if cfg.fusion != "none" else None)
    empty = np.zeros((0, 0), dtype=model.dtype)
    out = np.empty((n, cfg.hidden_width), dtype=np.float32)
    idx = np.arange(n)
    for start in range(0, n, chunk):
        sel = idx[start:start + chunk]
        if patches is not None:
            ix = sel % nx
            iy = (sel // nx) % ny
            iz = sel // (nx * ny)
            batch_patches = patches.gather(ix, iy, iz)
        else:
            batch_patches = empty
        _, hidden, _ = forward(model, coords[sel], batch_patches)
        out[start:start + chunk] = hidden
    return FeatureVolume(vol.dims, out, source_hash, volume_content_hash(vol))


def save_features(fv: FeatureVolume, path, half: bool = False) -> Path:
    """Write a feature cache: JSON header + raw little-endian payload.

    half=True stores float16 on disk (flagged in the header).
    """
    path = Path(path)
    payload = fv.features.astype("<f2" if half else "<f4").tobytes()
    header = {
        "dims": list(fv.dims),
        "width": fv.width,
        "dtype": "float16" if half else "float32",
        "source_hash": fv.source_hash,
        "volume_hash": fv.volume_hash,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    head = json.dumps(header).encode()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(head)))
        fh.write(head)
        fh.write(payload)
    return path


def load_features(path) -> FeatureVolume:
    """Load a feature cache, verifying the stored payload digest."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != _MAGIC:
        raise FeatureCacheError(f"{path}: bad magic bytes")
    version, head_len = struct.unpack("<II", blob[4:12])
    if version != _VERSION:
        raise FeatureCacheError(f"{path}: unsupported version {version}")
    try:
        header = json.loads(blob[12:12 + head_len])
    except json.JSONDecodeError as exc:
        raise FeatureCacheError(f"{path}: corrupt header") from exc
    payload = blob[12 + head_len:]
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise FeatureCacheError(f"{path}: payload digest mismatch")
    dtype = "<f2" if header["dtype"] == "float16" else "<f4"
    feats = np.frombuffer(payload, dtype=dtype)
    dims = tuple(header["dims"])
    width = header["width"]
    expected = int(np.prod(dims)) * width
    if feats.size != expected:
        raise FeatureCacheError(f"{path}: payload holds {feats.size} values, "
                                f"expected {expected}")
    feats = feats.astype(np.float32).reshape(-1, width)
    return FeatureVolume(dims, feats, header["source_hash"],
                         header.get("volume_hash", ""))
