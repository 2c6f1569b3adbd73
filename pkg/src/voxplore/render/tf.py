"""Piecewise-linear transfer functions and their JSON documents.

Every ROI class carries a (color, opacity) TF pair plus a confidence
threshold tau used by the probability-intensity shading mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .palette import class_color


class TfError(ValueError):
    """Raised for malformed transfer-function control points/documents."""


@dataclass(frozen=True)
class TransferFunction1D:
    """Control points at strictly increasing x in [0, 1]; linear between,
    clamped to the end values outside."""

    x: np.ndarray
    values: np.ndarray                     # (K, channels) in [0, 1]

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64).reshape(-1)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if len(x) < 2:
            raise TfError("a transfer function needs at least 2 control points")
        if len(x) != len(values):
            raise TfError("x and values length mismatch")
        if np.any(np.diff(x) <= 0):
            raise TfError("control point x must be strictly increasing")
        if x.min() < 0 or x.max() > 1 or values.min() < 0 or values.max() > 1:
            raise TfError("control points must lie in [0, 1]")
        x.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", values)

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        out = np.empty(t.shape + (self.channels,), dtype=np.float64)
        for c in range(self.channels):
            out[..., c] = np.interp(t, self.x, self.values[:, c])
        return out


@dataclass(frozen=True)
class ClassTransferFunction:
    color: TransferFunction1D              # 3 channels
    opacity: TransferFunction1D            # 1 channel
    tau: float = 0.5

    def __post_init__(self):
        if self.color.channels != 3:
            raise TfError("color TF must have 3 channels")
        if self.opacity.channels != 1:
            raise TfError("opacity TF must have 1 channel")
        if not 0.0 <= self.tau <= 1.0:
            raise TfError("tau must lie in [0, 1]")


@dataclass
class TransferFunctionSet:
    """Per-ROI-class TF pairs keyed by class id (foreground ids >= 1)."""

    per_class: dict = field(default_factory=dict)

    def class_ids(self) -> list:
        return sorted(self.per_class)

    def aligned(self, class_ids) -> list:
        missing = [c for c in class_ids if c not in self.per_class]
        if missing:
            raise TfError(f"no transfer function for classes {missing}")
        return [self.per_class[c] for c in class_ids]

    def taus(self, class_ids) -> np.ndarray:
        return np.array([self.per_class[c].tau for c in self.aligned_ids(class_ids)])

    def aligned_ids(self, class_ids) -> list:
        self.aligned(class_ids)
        return list(class_ids)

    def to_document(self) -> dict:
        doc = {}
        for cid, ctf in self.per_class.items():
            doc[str(cid)] = {
                "color": [{"x": float(x), "r": float(r), "g": float(g), "b": float(b)}
                          for x, (r, g, b) in zip(ctf.color.x, ctf.color.values)],
                "opacity": [{"x": float(x), "a": float(a)}
                            for x, (a,) in zip(ctf.opacity.x, ctf.opacity.values)],
                "tau": float(ctf.tau),
            }
        return doc

    @staticmethod
    def from_document(doc: dict) -> "TransferFunctionSet":
        per_class = {}
        try:
            items = doc.items()
        except AttributeError as exc:
            raise TfError("TF document must be a mapping class id -> TF pair") from exc
        for key, entry in items:
            try:
                cid = int(key)
                color_pts = entry["color"]
                opac_pts = entry["opacity"]
                color = TransferFunction1D(
                    [p["x"] for p in color_pts],
                    [[p["r"], p["g"], p["b"]] for p in color_pts])
                opacity = TransferFunction1D(
                    [p["x"] for p in opac_pts],
                    [[p["a"]] for p in opac_pts])
                tau = float(entry.get("tau", 0.5))
            except (KeyError, TypeError, ValueError) as exc:
                raise TfError(f"malformed TF entry for class {key}: {exc}") from exc
            per_class[cid] = ClassTransferFunction(color, opacity, tau)
        return TransferFunctionSet(per_class)


def grayscale_tf(max_opacity: float = 0.6, tau: float = 0.0) -> ClassTransferFunction:
    """Plain intensity ramp: black->white color, linear opacity."""
    color = TransferFunction1D([0.0, 1.0], [[0, 0, 0], [1, 1, 1]])
    opacity = TransferFunction1D([0.0, 1.0], [[0.0], [max_opacity]])
    return ClassTransferFunction(color, opacity, tau)


def default_class_tfs(class_ids, tau: float = 0.5,
                      max_opacity: float = 0.9) -> TransferFunctionSet:
    """Constant class color with an opacity ramp, one pair per class."""
    per_class = {}
    for cid in class_ids:
        rgb = class_color(int(cid)).tolist()
        color = TransferFunction1D([0.0, 1.0], [rgb, rgb])
        opacity = TransferFunction1D([0.0, 1.0], [[0.0], [max_opacity]])
        per_class[int(cid)] = ClassTransferFunction(color, opacity, tau)
    return TransferFunctionSet(per_class)
