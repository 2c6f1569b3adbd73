"""Experiment runners: scribble-sensitivity sweeps and architecture ablation.

Every cell of the grids is deterministic under its seed; features are
trained once per seed and reused across budget levels.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .forest import ScribbleRandomForest, ProbabilityVolume, apply_background_rule
from .inr import InrFeatures
from .metrics import f1_scores
from .phantoms import Phantom
from .scribblesim import simulate_scribble_levels
from .volume import compute_derived_fields, normalized_coords

# architecture ladder: positional-only intensity regression up to the
# full modulated multi-task model, plus an explicit local-feature baseline
ABLATION_CONFIGS = {
    "base": {"fusion": "none", "lambda_grad": 0.0, "lambda_stat": 0.0},
    "structural": {"fusion": "concat", "lambda_grad": 0.0, "lambda_stat": 0.0},
    "film": {"fusion": "film", "lambda_grad": 0.0, "lambda_stat": 0.0},
    "full": {"fusion": "film", "lambda_grad": 1.0, "lambda_stat": 0.5},
}
LOCAL_BASELINE = "local-baseline"


def local_baseline_features(phantom: Phantom, window: int = 5) -> np.ndarray:
    """5-D explicit features: intensity, gradient magnitude, coordinates."""
    vol = phantom.vol
    fields = compute_derived_fields(vol, window)
    coords = normalized_coords(vol.dims).astype(np.float32)
    return np.column_stack([
        vol.flat(),
        fields.gradient_magnitude.ravel(order="F"),
        coords,
    ]).astype(np.float32)


def classify_features(features: np.ndarray, scribbles, dims, forest_kwargs=None,
                      tau: float = 0.5):
    """Forest fit + full-volume prediction + background rule."""
    forest_kwargs = dict(forest_kwargs or {})
    flat = scribbles.flat_indices(dims)
    forest = ScribbleRandomForest(**forest_kwargs)
    forest.fit(features[flat], scribbles.classes)
    probs = forest.predict_proba(features)
    pv = ProbabilityVolume(dims, tuple(int(c) for c in forest.classes_), probs)
    return apply_background_rule(pv, tau), pv, forest


def evaluate_budget_levels(phantom: Phantom, features: np.ndarray, seed: int,
                           levels, forest_kwargs=None, tau: float = 0.5) -> dict:
    """F1 per budget level for one feature set (nested scribbles)."""
    level_sets = simulate_scribble_levels(phantom, seed=seed, levels=tuple(levels))
    out = {}
    for level in levels:
        scribbles = level_sets[level]
        pred, _, _ = classify_features(features, scribbles, phantom.vol.dims,
                                       forest_kwargs, tau)
        scores = f1_scores(pred, phantom.labels)
        out[level] = {"n_points": len(scribbles), **scores}
    return out


def run_scribble_sensitivity(phantom: Phantom, seeds=(0, 1, 2),
                             levels=("S1", "S2", "S3", "S4"),
                             inr_kwargs=None, forest_kwargs=None,
                             tau: float = 0.5) -> list:
    """Budget sweep rows: one per (seed, level), features shared per seed."""
    rows = []
    for seed in seeds:
        est = InrFeatures(seed=seed, **dict(inr_kwargs or {}))
        fv = est.fit(phantom.vol).transform()
        per_level = evaluate_budget_levels(phantom, fv.features, seed, levels,
                                           forest_kwargs, tau)
        for level in levels:
            scores = per_level[level]
            rows.append({"seed": seed, "level": level,
                         "n_points": scores["n_points"],
                         "f1_mean": scores["mean"], "f1_std": scores["std"],
                         **{f"f1_class_{c}": v
                            for c, v in scores["per_class"].items()}})
    return rows


def run_ablation(phantom: Phantom, level: str = "S1", seeds=(0, 1, 2),
                 configs=None, inr_kwargs=None, forest_kwargs=None,
                 tau: float = 0.5, include_baseline: bool = True) -> list:
    """Architecture ladder rows: one per (config, seed) at a fixed budget."""
    config_names = list(configs or ABLATION_CONFIGS)
    rows = []
    for seed in seeds:
        scribbles = simulate_scribble_levels(phantom, seed=seed,
                                             levels=(level,))[level]
        feature_sets = {}
        for name in config_names:
            overrides = ABLATION_CONFIGS[name]
            est = InrFeatures(seed=seed, **{**dict(inr_kwargs or {}), **overrides})
            feature_sets[name] = est.fit(phantom.vol).transform().features
        if include_baseline:
            feature_sets[LOCAL_BASELINE] = local_baseline_features(phantom)
        for name, features in feature_sets.items():
            pred, _, _ = classify_features(features, scribbles, phantom.vol.dims,
                                           forest_kwargs, tau)
            scores = f1_scores(pred, phantom.labels)
            rows.append({"seed": seed, "config": name,
                         "f1_mean": scores["mean"], "f1_std": scores["std"],
                         **{f"f1_class_{c}": v
                            for c, v in scores["per_class"].items()}})
    return rows


def summarize(rows: list, group_key: str) -> dict:
    """Mean f1_mean per group value over seeds."""
    groups = {}
    for row in rows:
        groups.setdefault(row[group_key], []).append(row["f1_mean"])
    return {k: float(np.mean(v)) for k, v in groups.items()}


def write_csv(rows: list, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    keys = []
    for row in rows:
        for key in row:
            if key not in keys:
                keys.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        writer.writerows(rows)
    return path
