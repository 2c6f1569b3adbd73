"""Versioned binary checkpoints with bitwise round-trip."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .model import InrModel, param_names, param_shapes

_MAGIC = b"VXPC"
_VERSION = 1


class CheckpointError(ValueError):
    """Raised for unreadable, truncated, or inconsistent checkpoints."""


def save_checkpoint(model: InrModel, path, train_cfg=None) -> Path:
    path = Path(path)
    cfg = model.config
    header = {
        "model": cfg.to_dict(),
        "dtype": str(np.dtype(model.dtype).name),
        "params": param_names(cfg),
    }
    if train_cfg is not None:
        header["train"] = train_cfg.to_dict()
    head = json.dumps(header, sort_keys=True).encode()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(head)))
        fh.write(head)
        for name in header["params"]:
            fh.write(np.ascontiguousarray(model.params[name]).astype(
                np.dtype(model.dtype).newbyteorder("<"), copy=False).tobytes())
    return path


def read_checkpoint_meta(path) -> dict:
    """Header only (model config, dtype, optional train config)."""
    blob = Path(path).read_bytes()
    if len(blob) < 12 or blob[:4] != _MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes")
    _, head_len = struct.unpack("<II", blob[4:12])
    try:
        return json.loads(blob[12:12 + head_len])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt config block") from exc


def load_checkpoint(path) -> InrModel:
    """Load and validate a checkpoint; no partial model escapes on error."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 12 or blob[:4] != _MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes")
    version, head_len = struct.unpack("<II", blob[4:12])
    if version != _VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    if len(blob) < 12 + head_len:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob[12:12 + head_len])
        cfg = ModelConfig.from_dict(header["model"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: corrupt config block: {exc}") from exc
    dtype = np.dtype(header["dtype"]).newbyteorder("<")
    names = header["params"]
    if names != param_names(cfg):
        raise CheckpointError(f"{path}: parameter list does not match config")
    shapes = param_shapes(cfg)
    expected = sum(int(np.prod(shapes[n])) for n in names) * dtype.itemsize
    payload = blob[12 + head_len:]
    if len(payload) != expected:
        raise CheckpointError(f"{path}: payload is {len(payload)} bytes, config "
                              f"implies {expected} (truncated or tampered)")
    params = {}
    offset = 0
    for name in names:
        shape = shapes[name]
        count = int(np.prod(shape))
        chunk = payload[offset:offset + count * dtype.itemsize]
        params[name] = np.frombuffer(chunk, dtype=dtype).astype(
            dtype.newbyteorder("=")).reshape(shape)
        offset += count * dtype.itemsize
    return InrModel(cfg, params).validate()
