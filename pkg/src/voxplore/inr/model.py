"""Network parameters, initialization, and forward/backward passes.

The network has two pathways: a hash-grid positional encoding and a
structural encoder over the n^3 patch around each voxel.  With
fusion="film" the structural output is mapped by a zero-initialized
dense layer to per-channel (scale, shift) that modulate the positional
features as pos * (scale + 1) + shift, so the fusion starts as an exact
identity; a projection of the modulated features is added to the input
of the third hidden layer.  The heads regress intensity, gradient, local
mean, and local std; the fourth hidden layer's activations are the
per-voxel feature representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ModelConfig
from . import hashgrid


def _relu(x):
    return np.maximum(x, 0.0)


def film_modulate(f_pos: np.ndarray, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Elementwise scale/shift with identity at zero: pos * (gamma+1) + beta."""
    if f_pos.shape != gamma.shape or f_pos.shape != beta.shape:
        raise ValueError(f"width mismatch: {f_pos.shape} vs {gamma.shape} vs {beta.shape}")
    return f_pos * (gamma + 1.0) + beta


def param_names(cfg: ModelConfig) -> list:
    """Parameter ordering used by init, Adam updates, and checkpoints."""
    names = ["tables"]
    if cfg.fusion in ("film", "concat"):
        names += ["enc_w1", "enc_b1", "enc_w2", "enc_b2"]
    if cfg.fusion == "film":
        names += ["film_w", "film_b", "skip_w", "skip_b"]
    names += ["mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2",
              "mlp_w3", "mlp_b3", "mlp_w4", "mlp_b4",
              "head_w", "head_b"]
    return names


def param_shapes(cfg: ModelConfig) -> dict:
    g = cfg.grid
    d_pos = g.output_dim
    sw, hw = cfg.struct_width, cfg.hidden_width
    patch = cfg.patch_side ** 3
    shapes = {"tables": (g.levels, g.table_size, g.features_per_level)}
    if cfg.fusion in ("film", "concat"):
        shapes.update({"enc_w1": (patch, sw), "enc_b1": (sw,),
                       "enc_w2": (sw, sw), "enc_b2": (sw,)})
    if cfg.fusion == "film":
        shapes.update({"film_w": (sw, 2 * d_pos), "film_b": (2 * d_pos,),
                       "skip_w": (d_pos, hw), "skip_b": (hw,)})
    shapes.update({
        "mlp_w1": (cfg.mlp_input_dim, hw), "mlp_b1": (hw,),
        "mlp_w2": (hw, hw), "mlp_b2": (hw,),
        "mlp_w3": (hw, hw), "mlp_b3": (hw,),
        "mlp_w4": (hw, hw), "mlp_b4": (hw,),
        "head_w": (hw, cfg.head_width), "head_b": (cfg.head_width,),
    })
    return shapes


@dataclass
class InrModel:
    config: ModelConfig
    params: dict = field(repr=False)

    @property
    def dtype(self):
        return self.params["tables"].dtype

    def validate(self):
        shapes = param_shapes(self.config)
        if set(self.params) != set(shapes):
            raise ValueError(f"parameter set mismatch: {sorted(self.params)} "
                             f"vs {sorted(shapes)}")
        for name, shape in shapes.items():
            if self.params[name].shape != shape:
                raise ValueError(f"shape mismatch for {name}: "
                                 f"{self.params[name].shape} != {shape}")
            if not np.all(np.isfinite(self.params[name])):
                raise ValueError(f"non-finite values in parameter {name}")
        return self

    def copy(self) -> "InrModel":
        return InrModel(self.config, {k: v.copy() for k, v in self.params.items()})


def init_model(cfg: ModelConfig, rng: np.random.Generator, dtype=np.float32) -> InrModel:
    """Seeded initialization.

    Hash tables uniform in [-1e-4, 1e-4]; dense layers uniform with the
    fan-in bound sqrt(6/fan_in); biases zero; the modulation layer is
    zero-initialized so fusion starts as an identity.
    """
    shapes = param_shapes(cfg)
    params = {}
    for name in param_names(cfg):
        shape = shapes[name]
        if name == "tables":
            params[name] = rng.uniform(-1e-4, 1e-4, size=shape).astype(dtype)
        elif name in ("film_w", "film_b"):
            params[name] = np.zeros(shape, dtype=dtype)
        elif name.endswith("_b"):
            params[name] = np.zeros(shape, dtype=dtype)
        else:
            bound = np.sqrt(6.0 / shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return InrModel(cfg, params)


def encode_position(model: InrModel, pts: np.ndarray) -> np.ndarray:
    """Hash-grid encoding of (B, 3) unit-cube points."""
    out, _ = hashgrid.encode_batch(model.params["tables"], model.config.grid,
                                   np.asarray(pts, dtype=model.dtype))
    return out


def forward(model: InrModel, pts: np.ndarray, patches: np.ndarray,
            want_cache: bool = False):
    """Run the network on a batch.

    Returns (predictions (B, head_width), hidden (B, hidden_width), cache).
    patches must be (B, patch_side^3) in x-fastest order.
    """
    cfg = model.config
    p = model.params
    dtype = model.dtype
    pts = np.asarray(pts, dtype=dtype)
    x = np.asarray(patches, dtype=dtype)
    if cfg.fusion != "none" and x.shape[1] != cfg.patch_side ** 3:
        raise ValueError(f"patch width {x.shape[1]} != side^3 "
                         f"{cfg.patch_side ** 3}")

    f_pos, grid_cache = hashgrid.encode_batch(p["tables"], cfg.grid, pts,
                                              want_cache=want_cache)
    cache = {"grid": grid_cache, "f_pos": f_pos, "patches": x}

    if cfg.fusion in ("film", "concat"):
        z1 = x @ p["enc_w1"] + p["enc_b1"]
        h1 = _relu(z1)
        z2 = h1 @ p["enc_w2"] + p["enc_b2"]
        h2 = _relu(z2)
        cache.update(enc_z1=z1, enc_h1=h1, enc_z2=z2, enc_h2=h2)

    if cfg.fusion == "film":
        gb = cache["enc_h2"] @ p["film_w"] + p["film_b"]
        d = cfg.grid.output_dim
        gamma, beta = gb[:, :d], gb[:, d:]
        f_mod = film_modulate(f_pos, gamma, beta)
        skip = f_mod @ p["skip_w"] + p["skip_b"]
        mlp_in = f_mod
        cache.update(gamma=gamma, f_mod=f_mod, skip=skip)
    elif cfg.fusion == "concat":
        mlp_in = np.concatenate([f_pos, cache["enc_h2"]], axis=1)
        skip = None
    else:
        mlp_in = f_pos
        skip = None
    cache["mlp_in"] = mlp_in

    za = mlp_in @ p["mlp_w1"] + p["mlp_b1"]
    ha = _relu(za)
    zb = ha @ p["mlp_w2"] + p["mlp_b2"]
    hb = _relu(zb)
    hb_in = hb + skip if skip is not None else hb
    zc = hb_in @ p["mlp_w3"] + p["mlp_b3"]
    hc = _relu(zc)
    zd = hc @ p["mlp_w4"] + p["mlp_b4"]
    hd = _relu(zd)
    preds = hd @ p["head_w"] + p["head_b"]
    cache.update(za=za, ha=ha, zb=zb, hb=hb, hb_in=hb_in, zc=zc, hc=hc,
                 zd=zd, hd=hd)
    return preds, hd, (cache if want_cache else None)


def backward(model: InrModel, cache: dict, d_preds: np.ndarray) -> dict:
    """Gradients of a scalar loss w.r.t. every parameter.

    d_preds is dLoss/dpredictions for the cached batch.
    """
    cfg = model.config
    p = model.params
    dtype = model.dtype
    grads = {}

    hd = cache["hd"]
    grads["head_w"] = hd.T @ d_preds
    grads["head_b"] = d_preds.sum(axis=0)
    d_hd = d_preds @ p["head_w"].T

    d_zd = d_hd * (cache["zd"] > 0)
    grads["mlp_w4"] = cache["hc"].T @ d_zd
    grads["mlp_b4"] = d_zd.sum(axis=0)
    d_hc = d_zd @ p["mlp_w4"].T

    d_zc = d_hc * (cache["zc"] > 0)
    grads["mlp_w3"] = cache["hb_in"].T @ d_zc
    grads["mlp_b3"] = d_zc.sum(axis=0)
    d_hb_in = d_zc @ p["mlp_w3"].T

    d_hb = d_hb_in
    d_zb = d_hb * (cache["zb"] > 0)
    grads["mlp_w2"] = cache["ha"].T @ d_zb
    grads["mlp_b2"] = d_zb.sum(axis=0)
    d_ha = d_zb @ p["mlp_w2"].T

    d_za = d_ha * (cache["za"] > 0)
    grads["mlp_w1"] = cache["mlp_in"].T @ d_za
    grads["mlp_b1"] = d_za.sum(axis=0)
    d_mlp_in = d_za @ p["mlp_w1"].T

    if cfg.fusion == "film":
        d_skip = d_hb_in                                    # skip adds into layer-3 input
        grads["skip_w"] = cache["f_mod"].T @ d_skip
        grads["skip_b"] = d_skip.sum(axis=0)
        d_f_mod = d_mlp_in + d_skip @ p["skip_w"].T
        gamma = cache["gamma"]
        f_pos = cache["f_pos"]
        d_f_pos = d_f_mod * (gamma + 1.0)
        d_gamma = d_f_mod * f_pos
        d_beta = d_f_mod
        d_gb = np.concatenate([d_gamma, d_beta], axis=1)
        grads["film_w"] = cache["enc_h2"].T @ d_gb
        grads["film_b"] = d_gb.sum(axis=0)
        d_enc_h2 = d_gb @ p["film_w"].T
    elif cfg.fusion == "concat":
        d_pos_dim = cfg.grid.output_dim
        d_f_pos = d_mlp_in[:, :d_pos_dim]
        d_enc_h2 = d_mlp_in[:, d_pos_dim:]
    else:
        d_f_pos = d_mlp_in
        d_enc_h2 = None

    if d_enc_h2 is not None:
        d_enc_z2 = d_enc_h2 * (cache["enc_z2"] > 0)
        grads["enc_w2"] = cache["enc_h1"].T @ d_enc_z2
        grads["enc_b2"] = d_enc_z2.sum(axis=0)
        d_enc_h1 = d_enc_z2 @ p["enc_w2"].T
        d_enc_z1 = d_enc_h1 * (cache["enc_z1"] > 0)
        grads["enc_w1"] = cache["patches"].T @ d_enc_z1
        grads["enc_b1"] = d_enc_z1.sum(axis=0)

    grads["tables"] = hashgrid.encode_backward(cache["grid"], cfg.grid,
                                               d_f_pos, dtype)
    return {k: v.astype(dtype, copy=False) for k, v in grads.items()}
