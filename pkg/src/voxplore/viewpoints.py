"""Unsupervised viewpoint recommendation.

Feature vectors are clustered with seeded k-means; each cluster gets a
world centroid and a gradient-weighted representative normal.  Candidate
viewpoints sampled on a Fibonacci sphere are scored by the entropy of
the visible-cluster size distribution, and a greedy pass selects a
compact complementary set until the coverage target is met.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .inr.features import FeatureVolume
from .volume import DerivedFields, ScalarVolume


# ---------------------------------------------------------------------------
# K-means
# ---------------------------------------------------------------------------

def _pairwise_sq(x: np.ndarray, c: np.ndarray, chunk: int = 1 << 15) -> np.ndarray:
    """||x - c||^2 for (N, d) x (K, d), chunked over N."""
    out = np.empty((len(x), len(c)), dtype=np.float64)
    c64 = c.astype(np.float64)
    c_sq = (c64 * c64).sum(axis=1)
    for start in range(0, len(x), chunk):
        xb = x[start:start + chunk].astype(np.float64)
        out[start:start + chunk] = ((xb * xb).sum(axis=1)[:, None]
                                    - 2.0 * xb @ c64.T + c_sq[None, :])
    return np.maximum(out, 0.0)


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centroids = np.empty((k, x.shape[1]), dtype=np.float64)
    centroids[0] = x[rng.integers(0, n)]
    d2 = _pairwise_sq(x, centroids[:1]).ravel()
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(0, n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centroids[i] = x[idx]
        d2 = np.minimum(d2, _pairwise_sq(x, centroids[i:i + 1]).ravel())
    return centroids


def kmeans_fit(features: np.ndarray, k: int, seed: int = 0, max_iters: int = 100,
               subsample: int = 2_000_000):
    """Seeded k-means++ plus Lloyd iterations to an assignment fixpoint.

    Lloyd runs on a uniform-stride subsample when the input exceeds
    `subsample` rows; the final assignment pass always covers every row.
    Empty clusters are reseeded to the point farthest from its centroid.
    Returns (centroids (k, d), assignments (N,), n_iters).
    """
    x = np.ascontiguousarray(features, dtype=np.float32)
    if len(x) < k:
        raise ValueError(f"need at least k={k} samples, got {len(x)}")
    if len(np.unique(x, axis=0)) < k:
        raise ValueError(f"fewer than k={k} distinct feature vectors")
    rng = np.random.default_rng(seed)
    stride = max(1, int(np.ceil(len(x) / subsample)))
    fit_x = x[::stride]
    centroids = _kmeans_pp_init(fit_x, k, rng)
    assign = None
    iters = 0
    for iters in range(1, max_iters + 1):
        d2 = _pairwise_sq(fit_x, centroids)
        new_assign = d2.argmin(axis=1)
        closest = d2[np.arange(len(fit_x)), new_assign]
        for c in range(k):
            members = new_assign == c
            if members.any():
                centroids[c] = fit_x[members].astype(np.float64).mean(axis=0)
            else:
                far = int(np.argmax(closest))
                centroids[c] = fit_x[far]
                new_assign[far] = c
                closest[far] = 0.0
        if assign is not None and np.array_equal(assign, new_assign):
            assign = new_assign
            break
        assign = new_assign
    if stride > 1:
        assign = _pairwise_sq(x, centroids).argmin(axis=1)
    return centroids, assign.astype(np.int64), iters


def kmeans_objective(features: np.ndarray, centroids: np.ndarray,
                     assign: np.ndarray) -> float:
    diff = features.astype(np.float64) - centroids[assign]
    return float((diff * diff).sum())


# ---------------------------------------------------------------------------
# Cluster geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClusterModel:
    centroids_feature: np.ndarray          # (K, d)
    assignments: np.ndarray                # (N,)
    centroids_world: np.ndarray            # (K, 3)
    normals: np.ndarray                    # (K, 3) unit, or zero when degenerate
    sizes: np.ndarray                      # (K,) member counts
    degenerate: np.ndarray                 # (K,) bool

    @property
    def k(self) -> int:
        return len(self.sizes)


def build_cluster_model(fv: FeatureVolume, vol: ScalarVolume,
                        fields: DerivedFields, k: int = 50, seed: int = 0,
                        max_iters: int = 100) -> ClusterModel:
    """Cluster features and derive per-cluster world geometry."""
    centroids, assign, _ = kmeans_fit(fv.features, k, seed, max_iters)
    nx, ny, nz = fv.dims
    spacing = np.array(vol.spacing)
    idx = np.arange(int(np.prod(fv.dims)))
    pos = np.stack([(idx % nx + 0.5) * spacing[0],
                    ((idx // nx) % ny + 0.5) * spacing[1],
                    (idx // (nx * ny) + 0.5) * spacing[2]], axis=1)
    grad = np.stack([fields.gradient[..., c].ravel(order="F") for c in range(3)],
                    axis=1).astype(np.float64)
    sizes = np.bincount(assign, minlength=k)
    world = np.zeros((k, 3))
    normals = np.zeros((k, 3))
    degenerate = np.zeros(k, dtype=bool)
    for c in range(3):
        world[:, c] = np.bincount(assign, weights=pos[:, c], minlength=k)
        normals[:, c] = np.bincount(assign, weights=grad[:, c], minlength=k)
    nonzero = sizes > 0
    world[nonzero] /= sizes[nonzero, None]
    norm = np.linalg.norm(normals, axis=1)
    degenerate = norm < 1e-9
    normals[~degenerate] /= norm[~degenerate, None]
    normals[degenerate] = 0.0
    return ClusterModel(centroids, assign, world, normals, sizes, degenerate)


# ---------------------------------------------------------------------------
# Viewpoint candidates
# ---------------------------------------------------------------------------

def fibonacci_sphere(m: int) -> np.ndarray:
    """(M, 3) near-uniform unit directions on the sphere."""
    if m < 1:
        raise ValueError("need at least one viewpoint")
    i = np.arange(m, dtype=np.float64)
    z = 1.0 - (2.0 * i + 1.0) / m
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


@dataclass(frozen=True)
class ViewpointSet:
    directions: np.ndarray                 # (M, 3) unit
    center: np.ndarray                     # (3,) world
    radius: float

    def eyes(self) -> np.ndarray:
        return self.center[None, :] + self.directions * self.radius

    @property
    def m(self) -> int:
        return len(self.directions)


def sample_viewpoints(vol: ScalarVolume, m: int = 1800,
                      radius_scale: float = 1.5) -> ViewpointSet:
    """Fibonacci-lattice candidates around the volume center."""
    dims = np.array(vol.dims, dtype=np.float64)
    spacing = np.array(vol.spacing)
    extent = dims * spacing
    center = extent / 2.0
    radius = radius_scale * float(np.linalg.norm(extent))
    return ViewpointSet(fibonacci_sphere(m), center, radius)


def visibility_matrix(clusters: ClusterModel, views: ViewpointSet,
                      cos_threshold: float = 0.0) -> np.ndarray:
    """(M, K) booleans: cluster k faces viewpoint m.

    Visible iff dot(unit(eye - centroid), normal) > cos_threshold;
    degenerate-normal clusters are visible from everywhere.
    """
    eyes = views.eyes()                                    # (M, 3)
    to_eye = eyes[:, None, :] - clusters.centroids_world[None, :, :]
    norms = np.linalg.norm(to_eye, axis=2)
    norms = np.where(norms < 1e-12, 1.0, norms)
    to_eye = to_eye / norms[:, :, None]
    dots = np.einsum("mkc,kc->mk", to_eye, clusters.normals)
    vis = dots > cos_threshold
    vis[:, clusters.degenerate] = True
    return vis


def entropy_scores(vis: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """Shannon entropy of the visible-cluster size distribution per view."""
    sizes = np.asarray(sizes, dtype=np.float64)
    if np.any(sizes <= 0):
        raise ValueError("cluster sizes must be positive")
    w = vis * sizes[None, :]
    total = w.sum(axis=1)
    scores = np.zeros(len(vis), dtype=np.float64)
    multi = vis.sum(axis=1) > 1
    if np.any(multi):
        p = w[multi] / total[multi, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(p > 0, p * np.log(p), 0.0)
        scores[multi] = -plogp.sum(axis=1)
    return scores


@dataclass(frozen=True)
class ViewpointReport:
    views: ViewpointSet
    entropy: np.ndarray                    # (M,) full-visibility entropy
    visibility: np.ndarray                 # (M, K) bool
    selected: list                         # viewpoint indices in greedy order
    coverage: list                         # fraction of clusters covered per step
    k: int
    m: int

    def to_document(self) -> dict:
        return {
            "K": self.k,
            "M": self.m,
            "viewpoints": [{"dir": [float(v) for v in d], "entropy": float(e)}
                           for d, e in zip(self.views.directions, self.entropy)],
            "selected": [{"index": int(i), "coverage": float(c)}
                         for i, c in zip(self.selected, self.coverage)],
        }


def greedy_select(vis: np.ndarray, sizes: np.ndarray, coverage_target: float = 0.95,
                  max_views: int = 8):
    """Iteratively pick the most informative viewpoint over uncovered clusters.

    Score is the entropy of uncovered visible clusters, with the count of
    newly covered clusters breaking score ties and remaining ties going to
    the lowest viewpoint index.  Stops at the coverage target, max_views,
    or when no viewpoint sees an uncovered cluster.
    Returns (selected indices, per-step coverage fractions).
    """
    m, k = vis.shape
    covered = np.zeros(k, dtype=bool)
    selected, coverages = [], []
    for _ in range(max_views):
        remaining = ~covered
        new_counts = (vis & remaining[None, :]).sum(axis=1)
        if new_counts.max() == 0:
            break
        scores = entropy_scores(vis & remaining[None, :], sizes)
        best_score = scores.max()
        tied = np.nonzero(scores == best_score)[0]
        pick = int(tied[np.argmax(new_counts[tied])])
        selected.append(pick)
        covered |= vis[pick]
        coverages.append(float(covered.sum()) / k)
        if coverages[-1] >= coverage_target:
            break
    return selected, coverages


def recommend_viewpoints(fv: FeatureVolume, vol: ScalarVolume,
                         fields: DerivedFields, k: int = 50, m: int = 1800,
                         seed: int = 0, coverage_target: float = 0.95,
                         max_views: int = 8) -> tuple:
    """Full pipeline; returns (report, cluster model)."""
    clusters = build_cluster_model(fv, vol, fields, k=k, seed=seed)
    views = sample_viewpoints(vol, m)
    vis = visibility_matrix(clusters, views)
    sizes = np.maximum(clusters.sizes, 1)  # guard empty clusters post-reseed
    scores = entropy_scores(vis, sizes)
    selected, coverage = greedy_select(vis, sizes, coverage_target, max_views)
    report = ViewpointReport(views, scores, vis, selected, coverage,
                             k=clusters.k, m=views.m)
    return report, clusters
