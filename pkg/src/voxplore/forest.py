"""Scribble ingestion and a from-scratch random forest classifier.

Trees are grown on the full labeled set (no bootstrap); diversity comes
from seeded random feature subsets at each node.  Splits maximize Gini
impurity decrease over midpoint thresholds between consecutive sorted
unique values; leaves store class frequencies and the forest prediction
is their mean over trees.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .volume import flat_index


class ScribbleError(ValueError):
    """Raised for unusable scribble sets (empty, single class, out of bounds)."""


class ForestFormatError(ValueError):
    """Raised for malformed forest export files."""


# ---------------------------------------------------------------------------
# Scribbles
# ---------------------------------------------------------------------------

@dataclass
class ScribbleSet:
    """Sparse voxel labels painted on slices.

    Duplicate voxels are collapsed with last-write-wins; a duplicate that
    changed the class is counted in conflict_count.  strokes maps stroke
    id -> {"axis": int, "index": int} provenance for UI echo.
    """

    voxels: np.ndarray                    # (M, 3) int
    classes: np.ndarray                   # (M,) int, 0 = background
    stroke_ids: np.ndarray = None         # (M,) int
    strokes: dict = field(default_factory=dict)
    conflict_count: int = 0

    def __post_init__(self):
        voxels = np.asarray(self.voxels, dtype=np.int64).reshape(-1, 3)
        classes = np.asarray(self.classes, dtype=np.int64).reshape(-1)
        if voxels.shape[0] != classes.shape[0]:
            raise ScribbleError("voxels and classes length mismatch")
        if self.stroke_ids is None:
            stroke_ids = np.zeros(len(classes), dtype=np.int64)
        else:
            stroke_ids = np.asarray(self.stroke_ids, dtype=np.int64).reshape(-1)
        if classes.size and classes.min() < 0:
            raise ScribbleError("class ids must be >= 0")
        # last write wins on duplicate voxels
        if len(voxels):
            key = (voxels[:, 0] << 42) + (voxels[:, 1] << 21) + voxels[:, 2]
            _, last_idx = np.unique(key[::-1], return_index=True)
            keep = np.sort(len(key) - 1 - last_idx)
            first_cls = {}
            conflicts = 0
            for k, c in zip(key.tolist(), classes.tolist()):
                prev = first_cls.get(k)
                if prev is not None and prev != c:
                    conflicts += 1
                first_cls[k] = c
            self.conflict_count = conflicts
            voxels, classes, stroke_ids = voxels[keep], classes[keep], stroke_ids[keep]
        self.voxels = voxels
        self.classes = classes
        self.stroke_ids = stroke_ids

    def __len__(self):
        return len(self.classes)

    def class_counts(self) -> dict:
        ids, counts = np.unique(self.classes, return_counts=True)
        return {int(i): int(c) for i, c in zip(ids, counts)}

    def validate_bounds(self, dims):
        if len(self) == 0:
            return self
        for axis in range(3):
            if self.voxels[:, axis].min() < 0 or self.voxels[:, axis].max() >= dims[axis]:
                raise ScribbleError(f"scribble voxel out of bounds on axis {axis} "
                                    f"for dims {tuple(dims)}")
        return self

    def flat_indices(self, dims) -> np.ndarray:
        return flat_index(dims, self.voxels[:, 0], self.voxels[:, 1], self.voxels[:, 2])

    def to_document(self) -> list:
        doc = []
        for (i, j, k), c, s in zip(self.voxels.tolist(), self.classes.tolist(),
                                   self.stroke_ids.tolist()):
            entry = {"voxel": [i, j, k], "class": c, "stroke": s}
            if s in self.strokes:
                entry["slice"] = dict(self.strokes[s])
            doc.append(entry)
        return doc

    @staticmethod
    def from_document(doc, dims=None) -> "ScribbleSet":
        voxels, classes, stroke_ids, strokes = [], [], [], {}
        for n, entry in enumerate(doc):
            try:
                voxel = [int(v) for v in entry["voxel"]]
                if len(voxel) != 3:
                    raise ValueError(f"voxel must have 3 components, got {voxel}")
                voxels.append(voxel)
                classes.append(int(entry["class"]))
                sid = int(entry.get("stroke", 0))
                stroke_ids.append(sid)
                if "slice" in entry:
                    strokes[sid] = {"axis": int(entry["slice"]["axis"]),
                                    "index": int(entry["slice"]["index"])}
            except (KeyError, TypeError, ValueError) as exc:
                raise ScribbleError(f"malformed scribble entry {n}: {exc}") from exc
        ss = ScribbleSet(np.array(voxels, dtype=np.int64).reshape(-1, 3),
                         np.array(classes, dtype=np.int64),
                         np.array(stroke_ids, dtype=np.int64), strokes)
        if dims is not None:
            ss.validate_bounds(dims)
        return ss


# ---------------------------------------------------------------------------
# Forest configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ForestConfig:
    """Defaults follow the robust-classification setup: many trees, a
    minimum split of 8, sqrt feature subsets, and no bootstrapping."""

    trees: int = 1000
    min_samples_split: int = 8
    max_features: str = "sqrt"            # "sqrt" or an int
    seed: int = 0

    def __post_init__(self):
        if self.trees < 1:
            raise ValueError("trees must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")

    def n_candidates(self, n_features: int) -> int:
        if self.max_features == "sqrt":
            return max(1, int(np.sqrt(n_features)))
        return max(1, min(int(self.max_features), n_features))


# ---------------------------------------------------------------------------
# Tree building
# ---------------------------------------------------------------------------

def _gini(counts: np.ndarray, total: int) -> float:
    p = counts / total
    return float(1.0 - np.dot(p, p))


def _best_split_for_feature(values: np.ndarray, y: np.ndarray, n_classes: int,
                            parent_gini: float):
    """(decrease, threshold) of the best midpoint split, or None.

    Thresholds are float64 midpoints so they fall strictly between the
    neighboring float32 feature values and both sides stay non-empty.
    """
    order = np.argsort(values, kind="stable")
    vs = values[order].astype(np.float64)
    if vs[0] == vs[-1]:
        return None
    ys = y[order]
    m = len(ys)
    onehot = np.zeros((m, n_classes), dtype=np.float64)
    onehot[np.arange(m), ys] = 1.0
    cum = np.cumsum(onehot, axis=0)
    cut = np.nonzero(vs[:-1] < vs[1:])[0]
    nl = (cut + 1).astype(np.float64)
    nr = m - nl
    cl = cum[cut]
    cr = cum[-1] - cl
    gl = 1.0 - np.sum((cl / nl[:, None]) ** 2, axis=1)
    gr = 1.0 - np.sum((cr / nr[:, None]) ** 2, axis=1)
    decrease = parent_gini - (nl * gl + nr * gr) / m
    j = int(np.argmax(decrease))           # first max -> smallest threshold
    return float(decrease[j]), float((vs[cut[j]] + vs[cut[j] + 1]) / 2.0)


@dataclass
class _Tree:
    feature: np.ndarray                    # (n_nodes,) int32, -1 for leaves
    threshold: np.ndarray                  # (n_nodes,) float64
    left: np.ndarray                       # (n_nodes,) int32
    right: np.ndarray                      # (n_nodes,) int32
    probs: np.ndarray                      # (n_nodes, C) float32


def _build_tree(x: np.ndarray, y: np.ndarray, n_classes: int,
                cfg: ForestConfig, rng: np.random.Generator) -> _Tree:
    n_features = x.shape[1]
    mtry = cfg.n_candidates(n_features)
    feature, threshold, left, right, probs = [], [], [], [], []

    # preorder DFS with explicit stack (left subtree first)
    stack = [(np.arange(len(y)), -1, False)]
    while stack:
        idx, parent, is_right = stack.pop()
        nid = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = nid
        counts = np.bincount(y[idx], minlength=n_classes).astype(np.float64)
        total = len(idx)
        node_probs = counts / total
        parent_gini = _gini(counts, total)
        best = None
        if total >= cfg.min_samples_split and parent_gini > 0.0:
            cand = np.sort(rng.choice(n_features, size=mtry, replace=False))
            for f in cand:
                res = _best_split_for_feature(x[idx, f], y[idx], n_classes,
                                              parent_gini)
                if res is not None and res[0] > 0.0 and (best is None or res[0] > best[0]):
                    best = (res[0], int(f), res[1])
        if best is None:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            probs.append(node_probs)
            continue
        _, f, thr = best
        go_left = x[idx, f].astype(np.float64) < thr
        if go_left.all() or not go_left.any():   # degenerate split: leaf
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            probs.append(node_probs)
            continue
        feature.append(f)
        threshold.append(thr)
        left.append(-1)
        right.append(-1)
        probs.append(node_probs)
        stack.append((idx[~go_left], nid, True))
        stack.append((idx[go_left], nid, False))
    return _Tree(np.array(feature, dtype=np.int32),
                 np.array(threshold, dtype=np.float64),
                 np.array(left, dtype=np.int32),
                 np.array(right, dtype=np.int32),
                 np.array(probs, dtype=np.float32))


def _tree_leaf_probs(tree: _Tree, x: np.ndarray) -> np.ndarray:
    """Leaf class-frequency row per sample, vectorized level walk."""
    node = np.zeros(len(x), dtype=np.int32)
    while True:
        f = tree.feature[node]
        active = np.nonzero(f >= 0)[0]
        if active.size == 0:
            break
        nodes_a = node[active]
        vals = x[active, f[active]].astype(np.float64)
        go_right = vals >= tree.threshold[nodes_a]
        node[active] = np.where(go_right, tree.right[nodes_a], tree.left[nodes_a])
    return tree.probs[node]


# ---------------------------------------------------------------------------
# Forest estimator
# ---------------------------------------------------------------------------

class ScribbleRandomForest(BaseEstimator):
    """Random forest over per-voxel feature vectors.

    fit expects X of shape (n_samples, n_features) and integer class ids
    including background 0; predict_proba returns per-class probabilities
    ordered by classes_.
    """

    def __init__(self, trees=1000, min_samples_split=8, max_features="sqrt",
                 seed=0):
        self.trees = trees
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.seed = seed

    def _config(self) -> ForestConfig:
        return ForestConfig(trees=self.trees,
                            min_samples_split=self.min_samples_split,
                            max_features=self.max_features, seed=self.seed)

    def fit(self, x, y):
        cfg = self._config()
        x = np.ascontiguousarray(x, dtype=np.float32)
        y = np.asarray(y, dtype=np.int64)
        if x.ndim != 2 or len(x) != len(y):
            raise ScribbleError(f"bad training shapes {x.shape} / {y.shape}")
        if len(y) == 0:
            raise ScribbleError("empty scribbles: nothing to fit")
        classes = np.unique(y)
        if len(classes) < 2:
            raise ScribbleError("scribbles must cover at least 2 distinct classes")
        self.classes_ = classes
        self.n_features_in_ = x.shape[1]
        lut = np.zeros(int(classes.max()) + 1, dtype=np.int64)
        lut[classes] = np.arange(len(classes))
        y_enc = lut[y]
        self.trees_ = [
            _build_tree(x, y_enc, len(classes), cfg,
                        np.random.default_rng(cfg.seed + t))
            for t in range(cfg.trees)
        ]
        return self

    def predict_proba(self, x, chunk: int = 1 << 17) -> np.ndarray:
        if not hasattr(self, "trees_"):
            raise RuntimeError("forest is not fitted")
        x = np.ascontiguousarray(x, dtype=np.float32)
        if x.shape[1] != self.n_features_in_:
            raise ScribbleError(f"feature width {x.shape[1]} != training width "
                                f"{self.n_features_in_}")
        out = np.zeros((len(x), len(self.classes_)), dtype=np.float64)
        for start in range(0, len(x), chunk):
            block = x[start:start + chunk]
            acc = np.zeros((len(block), len(self.classes_)), dtype=np.float64)
            for tree in self.trees_:
                acc += _tree_leaf_probs(tree, block)
            out[start:start + chunk] = acc / len(self.trees_)
        return out.astype(np.float32)

    def predict(self, x) -> np.ndarray:
        proba = self.predict_proba(x)
        return self.classes_[np.argmax(proba, axis=1)]


# ---------------------------------------------------------------------------
# Probability volumes and the background rule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbabilityVolume:
    """Per-voxel class probabilities over all scribbled classes."""

    dims: tuple
    class_ids: tuple                       # ascending, typically (0, 1, ..., N)
    probs: np.ndarray                      # (n_voxels, C) float32, rows sum to 1

    def __post_init__(self):
        probs = np.ascontiguousarray(self.probs, dtype=np.float32)
        if probs.ndim != 2 or probs.shape[0] != int(np.prod(self.dims)):
            raise ValueError(f"probability shape {probs.shape} does not cover dims")
        if probs.shape[1] != len(self.class_ids):
            raise ValueError("class axis does not match class_ids")
        if probs.size:
            if probs.min() < -1e-6 or probs.max() > 1.0 + 1e-6:
                raise ValueError("probabilities out of [0, 1]")
            sums = probs.sum(axis=1)
            if np.abs(sums - 1.0).max() > 1e-5:
                raise ValueError("per-voxel probabilities must sum to 1")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "class_ids", tuple(int(c) for c in self.class_ids))

    @property
    def foreground_ids(self) -> tuple:
        return tuple(c for c in self.class_ids if c > 0)

    def foreground_probs(self) -> np.ndarray:
        cols = [i for i, c in enumerate(self.class_ids) if c > 0]
        return self.probs[:, cols]

    def grid(self) -> np.ndarray:
        """(nx, ny, nz, C) view of the probabilities."""
        nx, ny, nz = self.dims
        return np.moveaxis(self.probs.reshape(nz, ny, nx, -1), (0, 1, 2), (2, 1, 0))


def apply_background_rule(pv: ProbabilityVolume, tau: float = 0.5) -> np.ndarray:
    """Predicted label per voxel: argmax over foreground classes when that
    maximum reaches tau, otherwise background.  Ties go to the lowest id."""
    fg = pv.foreground_probs()
    fg_ids = np.array(pv.foreground_ids, dtype=np.int64)
    if fg.shape[1] == 0:
        return np.zeros(fg.shape[0], dtype=np.int64)
    best = np.argmax(fg, axis=1)           # first max -> lowest class id
    labels = fg_ids[best]
    labels[fg[np.arange(len(fg)), best] < tau] = 0
    return labels


# ---------------------------------------------------------------------------
# Probability-volume files (JSON header + raw payload, like feature caches)
# ---------------------------------------------------------------------------

_PROB_MAGIC = b"VXPV"
_PROB_VERSION = 1


def save_probability_volume(pv: ProbabilityVolume, path):
    payload = pv.probs.astype("<f4").tobytes()
    header = json.dumps({"dims": list(pv.dims),
                         "class_ids": list(pv.class_ids)}).encode()
    with open(path, "wb") as fh:
        fh.write(_PROB_MAGIC)
        fh.write(struct.pack("<II", _PROB_VERSION, len(header)))
        fh.write(header)
        fh.write(payload)
    return path


def load_probability_volume(path) -> ProbabilityVolume:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _PROB_MAGIC:
        raise ForestFormatError(f"{path}: bad magic bytes")
    version, head_len = struct.unpack("<II", blob[4:12])
    if version != _PROB_VERSION:
        raise ForestFormatError(f"{path}: unsupported version {version}")
    header = json.loads(blob[12:12 + head_len])
    dims = tuple(header["dims"])
    class_ids = tuple(header["class_ids"])
    expected = int(np.prod(dims)) * len(class_ids) * 4
    payload = blob[12 + head_len:]
    if len(payload) != expected:
        raise ForestFormatError(f"{path}: truncated payload")
    probs = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    return ProbabilityVolume(dims, class_ids, probs.reshape(-1, len(class_ids)))


# ---------------------------------------------------------------------------
# Forest export (versioned binary; node arrays are already preorder)
# ---------------------------------------------------------------------------

_FOREST_MAGIC = b"VXRF"
_FOREST_VERSION = 1


def save_forest(forest: ScribbleRandomForest, path):
    if not hasattr(forest, "trees_"):
        raise RuntimeError("forest is not fitted")
    header = {
        "config": {"trees": forest.trees,
                   "min_samples_split": forest.min_samples_split,
                   "max_features": forest.max_features, "seed": forest.seed},
        "classes": [int(c) for c in forest.classes_],
        "n_features": int(forest.n_features_in_),
        "node_counts": [len(t.feature) for t in forest.trees_],
    }
    head = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_FOREST_MAGIC)
        fh.write(struct.pack("<II", _FOREST_VERSION, len(head)))
        fh.write(head)
        for tree in forest.trees_:
            fh.write(tree.feature.astype("<i4").tobytes())
            fh.write(tree.threshold.astype("<f8").tobytes())
            fh.write(tree.left.astype("<i4").tobytes())
            fh.write(tree.right.astype("<i4").tobytes())
            fh.write(tree.probs.astype("<f4").tobytes())
    return path


def load_forest(path) -> ScribbleRandomForest:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _FOREST_MAGIC:
        raise ForestFormatError(f"{path}: bad magic bytes")
    version, head_len = struct.unpack("<II", blob[4:12])
    if version != _FOREST_VERSION:
        raise ForestFormatError(f"{path}: unsupported version {version}")
    try:
        header = json.loads(blob[12:12 + head_len])
    except json.JSONDecodeError as exc:
        raise ForestFormatError(f"{path}: corrupt header") from exc
    classes = np.array(header["classes"], dtype=np.int64)
    n_classes = len(classes)
    counts = header["node_counts"]
    expected = sum(n * (3 * 4 + 8 + 4 * n_classes) for n in counts)
    payload = blob[12 + head_len:]
    if len(payload) != expected:
        raise ForestFormatError(f"{path}: payload is {len(payload)} bytes, "
                                f"header implies {expected}")
    forest = ScribbleRandomForest(**header["config"])
    forest.classes_ = classes
    forest.n_features_in_ = int(header["n_features"])
    trees = []
    offset = 0

    def take(count, dtype):
        nonlocal offset
        width = np.dtype(dtype).itemsize * count
        arr = np.frombuffer(payload[offset:offset + width], dtype=dtype)
        offset += width
        return arr

    for n in counts:
        feature = take(n, "<i4").astype(np.int32)
        threshold = take(n, "<f8").astype(np.float64)
        left = take(n, "<i4").astype(np.int32)
        right = take(n, "<i4").astype(np.int32)
        probs = take(n * n_classes, "<f4").astype(np.float32).reshape(n, n_classes)
        trees.append(_Tree(feature, threshold, left, right, probs))
    forest.trees_ = trees
    return forest
