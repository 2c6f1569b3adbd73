"""Float RGBA <-> 8-bit PNG helpers."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def to_pil(img: np.ndarray) -> Image.Image:
    arr = to_uint8(img)
    if arr.ndim == 2:
        return Image.fromarray(arr, mode="L")
    mode = {3: "RGB", 4: "RGBA"}[arr.shape[2]]
    return Image.fromarray(arr, mode=mode)


def save_png(img: np.ndarray, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    to_pil(img).save(path, format="PNG")
    return path


def encode_png(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    to_pil(img).save(buf, format="PNG")
    return buf.getvalue()
