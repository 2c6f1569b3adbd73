"""Per-sample optical property assignment for the two renderer modes.

Probabilistic mode: color and opacity are probability-weighted sums of
each class TF evaluated at that class's probability.  Probability-
intensity mode: TFs are evaluated at the voxel intensity instead, summed
over classes whose probability passes tau, and normalized by the total
passing weight; when nothing passes the sample is fully transparent.
"""

from __future__ import annotations

import numpy as np


def shade_probabilistic(probs: np.ndarray, tfs) -> tuple:
    """probs (M, N) foreground probabilities; tfs aligned class TF pairs.

    Returns (rgb (M, 3), alpha (M,)).
    """
    m, n = probs.shape
    if n != len(tfs):
        raise ValueError(f"{n} probability classes vs {len(tfs)} transfer functions")
    rgb = np.zeros((m, 3), dtype=np.float64)
    alpha = np.zeros(m, dtype=np.float64)
    for c, ctf in enumerate(tfs):
        p = probs[:, c]
        rgb += ctf.color(p) * p[:, None]
        alpha += ctf.opacity(p)[:, 0] * p
    return rgb, np.clip(alpha, 0.0, 1.0)


def shade_probability_intensity(probs: np.ndarray, intensity: np.ndarray,
                                taus: np.ndarray, tfs) -> tuple:
    """Thresholded, weight-normalized shading at the voxel intensity."""
    m, n = probs.shape
    if n != len(tfs):
        raise ValueError(f"{n} probability classes vs {len(tfs)} transfer functions")
    passing = probs >= np.asarray(taus)[None, :]
    w = np.where(passing, probs, 0.0)
    total = w.sum(axis=1)
    rgb = np.zeros((m, 3), dtype=np.float64)
    alpha = np.zeros(m, dtype=np.float64)
    for c, ctf in enumerate(tfs):
        wc = w[:, c]
        rgb += ctf.color(intensity) * wc[:, None]
        alpha += ctf.opacity(intensity)[:, 0] * wc
    nonzero = total > 0.0
    rgb[nonzero] /= total[nonzero, None]
    alpha[nonzero] /= total[nonzero]
    rgb[~nonzero] = 0.0
    alpha[~nonzero] = 0.0
    return rgb, np.clip(alpha, 0.0, 1.0)
