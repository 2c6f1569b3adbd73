"""Multiresolution hash-grid positional encoding.

Each level scales the query into its grid, gathers the 8 surrounding
corner rows (dense indexing while the level's grid fits in the table,
spatial hashing otherwise), and blends them trilinearly; level outputs
are concatenated.
"""

from __future__ import annotations

import numpy as np

from .config import HashGridConfig

# spatial-hash primes (x, y, z)
_PRIMES = (np.uint64(1), np.uint64(2654435761), np.uint64(805459861))

# corner offset bit patterns, x-fastest: corner j = (j & 1, (j >> 1) & 1, j >> 2)
_OFFSETS = np.array([[x, y, z] for z in (0, 1) for y in (0, 1) for x in (0, 1)],
                    dtype=np.int64)


def level_is_dense(resolution: int, table_size: int) -> bool:
    return (resolution + 1) ** 3 <= table_size


def corner_rows(corners: np.ndarray, resolution: int, table_size: int) -> np.ndarray:
    """Table row per corner coordinate, (..., 3) int64 -> (...) int64."""
    cx, cy, cz = corners[..., 0], corners[..., 1], corners[..., 2]
    if level_is_dense(resolution, table_size):
        n = resolution + 1
        return cx + n * (cy + n * cz)
    ux = cx.astype(np.uint64) * _PRIMES[0]
    uy = cy.astype(np.uint64) * _PRIMES[1]
    uz = cz.astype(np.uint64) * _PRIMES[2]
    return ((ux ^ uy ^ uz) & np.uint64(table_size - 1)).astype(np.int64)


_BITS = tuple(_OFFSETS[:, axis] for axis in range(3))


def _level_geometry(pts: np.ndarray, resolution: int):
    """Base corner, fractional offset, and the 8 corner coordinates."""
    scaled = pts * resolution
    base = scaled.astype(np.int64)         # floor: unit-cube points are >= 0
    np.clip(base, 0, resolution - 1, out=base)
    frac = scaled - base
    corners = base[:, None, :] + _OFFSETS[None, :, :]        # (B, 8, 3)
    return frac, corners


def _corner_weights(frac: np.ndarray) -> np.ndarray:
    """Trilinear blend weights per corner, (B, 8)."""
    b = frac.shape[0]
    pair = np.empty((3, b, 2), dtype=frac.dtype)
    pair[:, :, 1] = frac.T
    pair[:, :, 0] = 1.0 - frac.T
    w = pair[0][:, _BITS[0]]
    w = w * pair[1][:, _BITS[1]]
    w *= pair[2][:, _BITS[2]]
    return w


def encode_batch(tables: np.ndarray, cfg: HashGridConfig, pts: np.ndarray,
                 want_cache: bool = False):
    """Encode (B, 3) unit-cube points into (B, levels*F) features.

    tables has shape (levels, table_size, F).  The cache carries corner
    rows and weights for the backward scatter.
    """
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (B, 3) points, got {pts.shape}")
    if pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
        raise ValueError("positions must lie in the unit cube")
    b = pts.shape[0]
    nf = cfg.features_per_level
    dtype = tables.dtype
    out = np.empty((b, cfg.output_dim), dtype=dtype)
    rows_cache, weights_cache = [], []
    for lvl, res in enumerate(cfg.resolutions()):
        frac, corners = _level_geometry(pts, res)
        rows = corner_rows(corners, res, cfg.table_size)      # (B, 8)
        weights = _corner_weights(frac).astype(dtype)         # (B, 8)
        gathered = tables[lvl][rows]                          # (B, 8, F)
        out[:, lvl * nf:(lvl + 1) * nf] = np.einsum("bc,bcf->bf", weights, gathered)
        if want_cache:
            rows_cache.append(rows)
            weights_cache.append(weights)
    cache = {"rows": rows_cache, "weights": weights_cache} if want_cache else None
    return out, cache


def encode_backward(cache: dict, cfg: HashGridConfig, d_out: np.ndarray,
                    dtype) -> np.ndarray:
    """Scatter output gradients back into per-level table gradients.

    Only corner rows touched by the batch receive gradient; bincount keeps
    the accumulation order fixed for determinism.
    """
    nf = cfg.features_per_level
    grads = np.zeros((cfg.levels, cfg.table_size, nf), dtype=dtype)
    for lvl in range(cfg.levels):
        rows = cache["rows"][lvl].reshape(-1)                  # (B*8,)
        weights = cache["weights"][lvl]                        # (B, 8)
        d_level = d_out[:, lvl * nf:(lvl + 1) * nf]            # (B, F)
        contrib = weights[:, :, None] * d_level[:, None, :]    # (B, 8, F)
        flat = contrib.reshape(-1, nf)
        for f in range(nf):
            grads[lvl, :, f] = np.bincount(rows, weights=flat[:, f],
                                           minlength=cfg.table_size).astype(dtype)
    return grads
