"""Scribble simulation with nested supervision budgets.

Budget levels S1..S4 scale point counts from fixed ratios of the voxel
count (derived from a 756 / 1,912 / 9,434 / 29,529 point ladder over a
1,558,802-voxel reference volume).  Levels are generated cumulatively
from one seeded stream, so S1 is a subset of S2 and so on; S1 draws only
from the middle axial slice and higher levels add slices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forest import ScribbleSet
from .phantoms import Phantom

_REFERENCE_VOXELS = 1_558_802
BUDGET_RATIOS = {
    "S1": 756 / _REFERENCE_VOXELS,
    "S2": 1_912 / _REFERENCE_VOXELS,
    "S3": 9_434 / _REFERENCE_VOXELS,
    "S4": 29_529 / _REFERENCE_VOXELS,
}
SLICE_COUNTS = {"S1": 1, "S2": 3, "S3": 9, "S4": 18}
LEVELS = ("S1", "S2", "S3", "S4")


class BudgetError(ValueError):
    """Raised when a budget cannot be met on the designated slices."""


@dataclass(frozen=True)
class ScribbleBudget:
    level: str
    n_points: int
    slice_indices: tuple                   # axial (z) slice set


def _nested_slice_order(nz: int, count: int) -> list:
    """Deterministic recursive-midpoint ordering: prefixes are nested."""
    lo, hi = max(0, nz // 8), min(nz - 1, nz - 1 - nz // 8)
    order = []
    intervals = [(lo, hi)]
    while intervals and len(order) < count:
        next_intervals = []
        for a, b in intervals:
            mid = (a + b) // 2
            if mid not in order:
                order.append(mid)
            if mid - a > 1:
                next_intervals.append((a, mid))
            if b - mid > 1:
                next_intervals.append((mid, b))
        intervals = next_intervals
    if len(order) < count:
        raise BudgetError(f"cannot designate {count} distinct slices in {nz}")
    return order[:count]


def budget_for(level: str, dims) -> ScribbleBudget:
    if level not in BUDGET_RATIOS:
        raise BudgetError(f"unknown budget level '{level}'")
    n_vox = int(np.prod(dims))
    n_points = max(1, round(BUDGET_RATIOS[level] * n_vox))
    slices = _nested_slice_order(dims[2], SLICE_COUNTS[level])
    return ScribbleBudget(level, n_points, tuple(slices))


_NEIGHBORS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def _stroke_region(mask: np.ndarray, max_len: int) -> np.ndarray:
    """Pixels a stroke may visit: the region eroded away from its border.

    A user scribbles comfortably inside a structure, away from the
    ambiguous rim; tiny regions fall back to the full mask.
    """
    from scipy.ndimage import distance_transform_edt
    interior = distance_transform_edt(mask) > 2.0
    return interior if interior.sum() >= max(8, max_len) else mask


def _stroke_start(region: np.ndarray, used: np.ndarray,
                  rng: np.random.Generator):
    """Farthest-point start within the stroke region for even coverage."""
    from scipy.ndimage import distance_transform_edt
    available = region & ~used
    if not available.any():
        return None
    marked = region & used
    if not marked.any():
        xs, ys = np.nonzero(available)
        pick = rng.integers(0, len(xs))
        return int(xs[pick]), int(ys[pick])
    dist = distance_transform_edt(~marked)
    dist[~available] = -1.0
    flat = int(np.argmax(dist))
    return flat // region.shape[1], flat % region.shape[1]


def _walk_stroke(mask: np.ndarray, used: np.ndarray, rng: np.random.Generator,
                 max_len: int) -> list:
    """Near-straight contiguous run across the region, like a drawn stroke.

    Each stroke picks a random heading and advances through 4-connected
    pixels preferring the neighbor best aligned with it, so strokes
    traverse a structure instead of dithering in place.
    """
    region = _stroke_region(mask, max_len)
    start = _stroke_start(region, used, rng)
    if start is None:
        if region is not mask:
            region = mask
            start = _stroke_start(region, used, rng)
        if start is None:
            return []
    x, y = start
    heading = rng.uniform(0.0, 2.0 * np.pi)
    hx, hy = np.cos(heading), np.sin(heading)
    stroke = [(x, y)]
    used[x, y] = True
    w, h = mask.shape
    for _ in range(max_len - 1):
        options = [(x + dx, y + dy, dx * hx + dy * hy) for dx, dy in _NEIGHBORS
                   if 0 <= x + dx < w and 0 <= y + dy < h
                   and region[x + dx, y + dy] and not used[x + dx, y + dy]]
        if not options:
            break
        x, y, _ = max(options, key=lambda o: o[2])
        stroke.append((x, y))
        used[x, y] = True
    return stroke


def simulate_scribble_levels(phantom: Phantom, seed: int = 0,
                             levels=LEVELS, stroke_len: int = 6) -> dict:
    """Generate all requested budget levels as nested scribble sets."""
    labels = phantom.labels.labels
    dims = phantom.labels.dims
    class_ids = [0] + phantom.labels.class_ids()
    rng = np.random.default_rng(seed)

    used = {}                              # z -> used-pixel mask
    voxels, classes, stroke_ids, strokes = [], [], [], {}
    results = {}
    next_stroke = 0

    bad = [l for l in levels if l not in LEVELS]
    if bad:
        raise BudgetError(f"unknown budget levels {bad}")
    max_idx = max(LEVELS.index(l) for l in levels)
    for level in LEVELS[:max_idx + 1]:
        budget = budget_for(level, dims)
        present = set()
        for z in budget.slice_indices:
            if z not in used:
                used[z] = np.zeros(labels.shape[:2], dtype=bool)
            present |= set(np.unique(labels[:, :, z]).tolist())
        missing = [c for c in class_ids if c > 0 and c not in present]
        if missing:
            raise BudgetError(f"classes {missing} absent from the designated "
                              f"slices of level {level}")

        target = budget.n_points
        counts = {c: 0 for c in class_ids}
        for c in classes:
            counts[c] += 1

        def add_stroke(cid, z, max_len) -> int:
            nonlocal next_stroke
            mask = labels[:, :, z] == cid
            stroke = _walk_stroke(mask, used[z], rng, max_len)
            if not stroke:
                return 0
            sid = next_stroke
            next_stroke += 1
            strokes[sid] = {"axis": 2, "index": int(z)}
            for (x, y) in stroke:
                voxels.append([x, y, z])
                classes.append(cid)
                stroke_ids.append(sid)
            counts[cid] += len(stroke)
            return len(stroke)

        # even per-class quotas keep every class represented at any budget
        base, extra = divmod(target, len(class_ids))
        quota = {c: base + (1 if i < extra else 0)
                 for i, c in enumerate(class_ids)}
        for cid in class_ids:
            slice_cursor = 0
            while counts[cid] < quota[cid]:
                need = quota[cid] - counts[cid]
                progressed = 0
                for _ in range(len(budget.slice_indices)):
                    z = budget.slice_indices[slice_cursor % len(budget.slice_indices)]
                    slice_cursor += 1
                    progressed = add_stroke(cid, z, min(stroke_len, need))
                    if progressed:
                        break
                if not progressed:
                    break                    # class exhausted on these slices
        # redistribute any shortfall to classes that still have room
        while len(classes) < target:
            added = 0
            for cid in class_ids:
                for z in budget.slice_indices:
                    need = target - len(classes)
                    if need <= 0:
                        break
                    added += add_stroke(cid, z, min(stroke_len, need))
                if len(classes) >= target:
                    break
            if added == 0:
                if len(classes) < round(0.95 * target):
                    raise BudgetError(
                        f"budget {target} for level {level} exceeds available "
                        f"voxels on its {len(budget.slice_indices)} slice(s)")
                break
        if level in levels:
            results[level] = ScribbleSet(
                np.array(voxels, dtype=np.int64).reshape(-1, 3),
                np.array(classes, dtype=np.int64),
                np.array(stroke_ids, dtype=np.int64), dict(strokes))
    return results


def simulate_scribbles(phantom: Phantom, level: str = "S1",
                       seed: int = 0, stroke_len: int = 6) -> ScribbleSet:
    """Single-level view of the nested generator."""
    if level not in LEVELS:
        raise BudgetError(f"unknown budget level '{level}'")
    wanted = LEVELS[:LEVELS.index(level) + 1]
    return simulate_scribble_levels(phantom, seed=seed, levels=wanted,
                                    stroke_len=stroke_len)[level]
