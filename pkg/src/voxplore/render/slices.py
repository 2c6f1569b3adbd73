"""Grayscale slice images with class-colored overlays for the UI.

Slice orientation: for slicing axis k the two remaining volume axes in
ascending order become (columns, rows); pixel [row, col] shows the voxel
whose lower remaining axis equals col and higher remaining axis equals
row, with row 0 at the top of the image.
"""

from __future__ import annotations

import numpy as np

from ..forest import ProbabilityVolume, ScribbleSet
from ..volume import LabelVolume, ScalarVolume
from .palette import class_color

OVERLAYS = ("none", "scribbles", "probability", "label")


def _slice_plane(arr: np.ndarray, axis: int, index: int) -> np.ndarray:
    """(rows, cols) plane with cols = lower remaining axis."""
    plane = np.take(arr, index, axis=axis)
    # remaining axes are in ascending order; make the higher one the rows
    return np.swapaxes(plane, 0, 1)


def render_slice(vol: ScalarVolume, axis: int, index: int, overlay: str = "none",
                 scribbles: ScribbleSet = None, prob: ProbabilityVolume = None,
                 labels: LabelVolume = None, overlay_alpha: float = 1.0) -> np.ndarray:
    """RGBA float image of one slice, optionally blended with an overlay."""
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1, or 2, got {axis}")
    if not 0 <= index < vol.dims[axis]:
        raise ValueError(f"index {index} out of range for axis {axis} "
                         f"with {vol.dims[axis]} slices")
    if overlay not in OVERLAYS:
        raise ValueError(f"unknown overlay '{overlay}'")

    gray = _slice_plane(vol.data, axis, index).astype(np.float64)
    h, w = gray.shape
    img = np.empty((h, w, 4), dtype=np.float64)
    img[..., 0] = gray
    img[..., 1] = gray
    img[..., 2] = gray
    img[..., 3] = 1.0

    if overlay == "none":
        return img

    color = np.zeros((h, w, 3), dtype=np.float64)
    amount = np.zeros((h, w), dtype=np.float64)

    if overlay == "scribbles":
        if scribbles is not None and len(scribbles):
            on_slice = scribbles.voxels[:, axis] == index
            rem = [a for a in range(3) if a != axis]
            cols = scribbles.voxels[on_slice, rem[0]]
            rows = scribbles.voxels[on_slice, rem[1]]
            for r, c, cls in zip(rows, cols, scribbles.classes[on_slice]):
                color[r, c] = class_color(int(cls))
                amount[r, c] = 1.0
    elif overlay == "probability":
        if prob is None:
            raise ValueError("probability overlay requires a probability volume")
        grid = prob.grid()
        fg_cols = [i for i, c in enumerate(prob.class_ids) if c > 0]
        fg_ids = [c for c in prob.class_ids if c > 0]
        plane = _slice_plane(grid, axis, index)[..., fg_cols]   # (h, w, N)
        total = plane.sum(axis=-1)
        for i, cid in enumerate(fg_ids):
            color += plane[..., i, None] * class_color(cid)[None, None, :]
        nz = total > 0
        color[nz] /= total[nz, None]
        amount = np.clip(total, 0.0, 1.0)
    elif overlay == "label":
        if labels is None:
            raise ValueError("label overlay requires a label volume")
        plane = _slice_plane(labels.labels, axis, index)
        fg = plane > 0
        for cid in np.unique(plane[fg]):
            mask = plane == cid
            color[mask] = class_color(int(cid))
        amount[fg] = 1.0

    a = amount * overlay_alpha
    img[..., :3] = (1.0 - a[..., None]) * img[..., :3] + a[..., None] * color
    return img
