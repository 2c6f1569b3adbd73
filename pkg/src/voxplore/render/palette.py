"""Deterministic class palette shared by slice overlays and default TFs."""

import numpy as np

# class id 0 (background scribbles) gets a neutral gray; ids cycle beyond 10
CLASS_PALETTE = np.array([
    [0.45, 0.45, 0.45],
    [0.894, 0.102, 0.110],
    [0.216, 0.494, 0.722],
    [0.302, 0.686, 0.290],
    [0.596, 0.306, 0.639],
    [1.000, 0.498, 0.000],
    [0.969, 0.867, 0.212],
    [0.651, 0.337, 0.157],
    [0.969, 0.506, 0.749],
    [0.600, 0.600, 0.600],
], dtype=np.float32)


def class_color(class_id: int) -> np.ndarray:
    if class_id == 0:
        return CLASS_PALETTE[0]
    return CLASS_PALETTE[1 + (class_id - 1) % (len(CLASS_PALETTE) - 1)]
