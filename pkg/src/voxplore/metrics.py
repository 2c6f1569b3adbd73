"""Classification metrics over label volumes."""

from __future__ import annotations

import numpy as np

from .volume import LabelVolume


def f1_scores(pred, gt: LabelVolume) -> dict:
    """Per-foreground-class F1 with mean and std over classes.

    pred is a flat (x-fastest) or (nx, ny, nz) integer label array with 0
    meaning background; background-rule voxels therefore count as
    negatives for every foreground class.  Undefined F1 (no predictions
    and no ground truth) reports 0.
    """
    pred = np.asarray(pred)
    gt_flat = gt.labels.ravel(order="F")
    pred_flat = pred.ravel(order="F") if pred.ndim == 3 else pred.ravel()
    if pred_flat.shape != gt_flat.shape:
        raise ValueError(f"prediction covers {pred_flat.shape[0]} voxels, "
                         f"ground truth has {gt_flat.shape[0]}")
    per_class = {}
    for cid in range(1, gt.n_classes + 1):
        p = pred_flat == cid
        g = gt_flat == cid
        tp = int(np.count_nonzero(p & g))
        fp = int(np.count_nonzero(p & ~g))
        fn = int(np.count_nonzero(~p & g))
        denom = 2 * tp + fp + fn
        per_class[cid] = 2.0 * tp / denom if denom > 0 else 0.0
    values = np.array(list(per_class.values()), dtype=np.float64)
    return {
        "per_class": per_class,
        "mean": float(values.mean()) if values.size else 0.0,
        "std": float(values.std()) if values.size else 0.0,
    }


def psnr(reference: np.ndarray, reconstruction: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for signals in [0, 1]."""
    mse = float(np.mean((np.asarray(reference, dtype=np.float64)
                         - np.asarray(reconstruction, dtype=np.float64)) ** 2))
    if mse == 0.0:
        return float("inf")
    return -10.0 * np.log10(mse)
