"""Multi-task training loop: seeded full-shuffle epochs with Adam.

Each step runs the network on (normalized coordinate, local patch)
batches, measures per-task mean squared errors against the derived
fields, backpropagates through every parameter group (hash tables
receive scattered corner gradients), and applies an Adam update.
"""

from __future__ import annotations

import numpy as np

from ..volume import DerivedFields, PatchSource, ScalarVolume, normalized_coords
from .config import ModelConfig, TrainConfig
from .model import InrModel, backward, forward, init_model


class TrainingDiverged(RuntimeError):
    """Raised when the loss turns non-finite during training."""


def loss_total(pred: np.ndarray, target: np.ndarray,
               lambda_grad: float, lambda_stat: float):
    """Weighted multi-task loss and its per-term breakdown.

    Column layout is [intensity, gradient..., local mean, local std]; the
    gradient block is averaged over its components.  Every term is a mean
    squared error over the batch.
    """
    if pred.shape != target.shape:
        raise ValueError(f"batch shape mismatch: {pred.shape} vs {target.shape}")
    if pred.shape[0] == 0:
        raise ValueError("empty batch")
    diff = pred - target
    sq = diff * diff
    l_inten = float(sq[:, 0].mean())
    l_grad = float(sq[:, 1:-2].mean())
    l_mu = float(sq[:, -2].mean())
    l_sigma = float(sq[:, -1].mean())
    total = l_inten + lambda_grad * l_grad + lambda_stat * (l_mu + l_sigma)
    return total, {"total": total, "intensity": l_inten, "gradient": l_grad,
                   "mean": l_mu, "std": l_sigma}


def _loss_backward(pred: np.ndarray, target: np.ndarray,
                   lambda_grad: float, lambda_stat: float) -> np.ndarray:
    """dL/dpred for loss_total."""
    b = pred.shape[0]
    n_grad = pred.shape[1] - 3
    d = (2.0 / b) * (pred - target)
    d[:, 1:-2] *= lambda_grad / n_grad
    d[:, -2] *= lambda_stat
    d[:, -1] *= lambda_stat
    return d


def build_targets(vol: ScalarVolume, fields: DerivedFields,
                  cfg: ModelConfig, dtype) -> np.ndarray:
    """(N, head_width) regression targets in x-fastest voxel order."""
    cols = [vol.flat()]
    if cfg.gradient_target == "vector":
        cols += [fields.gradient[..., c].ravel(order="F") for c in range(3)]
    else:
        cols += [fields.gradient_magnitude.ravel(order="F")]
    cols += [fields.local_mean.ravel(order="F"), fields.local_std.ravel(order="F")]
    return np.stack(cols, axis=1).astype(dtype)


def adam_init(model: InrModel):
    zeros = {k: np.zeros_like(v) for k, v in model.params.items()}
    return zeros, {k: np.zeros_like(v) for k, v in model.params.items()}


def adam_step(params: dict, grads: dict, m: dict, v: dict, t: int,
              cfg: TrainConfig, order=None):
    """In-place Adam update; t is the 1-based step counter."""
    b1, b2 = cfg.beta1, cfg.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for name in (order or sorted(params)):
        g = grads[name]
        mn, vn = m[name], v[name]
        mn *= b1
        mn += (1.0 - b1) * g
        vn *= b2
        vn += (1.0 - b2) * np.square(g)
        update = np.sqrt(vn / bc2)
        update += cfg.eps
        np.divide(mn, update, out=update)
        update *= cfg.learning_rate / bc1
        params[name] -= update.astype(params[name].dtype, copy=False)


def train(vol: ScalarVolume, fields: DerivedFields, model_cfg: ModelConfig,
          train_cfg: TrainConfig, progress_cb=None):
    """Train a model on a volume; returns (model, per-epoch loss history).

    fields must have been derived with the model's patch side.  Identical
    seed, configs, and volume reproduce bit-identical parameters.
    """
    if fields.window != model_cfg.patch_side:
        raise ValueError(f"derived-field window {fields.window} != model patch "
                         f"side {model_cfg.patch_side}")
    dtype = np.float32 if train_cfg.dtype == "float32" else np.float64
    rng = np.random.default_rng(train_cfg.seed)
    model = init_model(model_cfg, rng, dtype=dtype)

    n = vol.n_voxels
    nx, ny, _ = vol.dims
    coords = normalized_coords(vol.dims).astype(dtype)
    targets = build_targets(vol, fields, model_cfg, dtype)
    patches = (PatchSource(vol, model_cfg.patch_side, dtype=dtype)
               if model_cfg.fusion != "none" else None)
    empty = np.zeros((0, 0), dtype=dtype)

    m, v = adam_init(model)
    order = list(model.params)
    t = 0
    history = []
    for epoch in range(train_cfg.epochs):
        perm = rng.permutation(n)
        sums = {"total": 0.0, "intensity": 0.0, "gradient": 0.0,
                "mean": 0.0, "std": 0.0}
        for start in range(0, n, train_cfg.batch_size):
            idx = perm[start:start + train_cfg.batch_size]
            if patches is not None:
                ix = idx % nx
                iy = (idx // nx) % ny
                iz = idx // (nx * ny)
                batch_patches = patches.gather(ix, iy, iz)
            else:
                batch_patches = empty
            pred, _, cache = forward(model, coords[idx], batch_patches,
                                     want_cache=True)
            total, parts = loss_total(pred, targets[idx],
                                      train_cfg.lambda_grad, train_cfg.lambda_stat)
            if not np.isfinite(total):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, step {start // train_cfg.batch_size}")
            d_pred = _loss_backward(pred, targets[idx],
                                    train_cfg.lambda_grad, train_cfg.lambda_stat)
            grads = backward(model, cache, d_pred)
            t += 1
            adam_step(model.params, grads, m, v, t, train_cfg, order=order)
            w = idx.shape[0]
            for key in sums:
                sums[key] += parts[key] * w
        history.append({k: s / n for k, s in sums.items()})
        if progress_cb is not None:
            progress_cb(epoch + 1, train_cfg.epochs, history[-1])
    return model, history
