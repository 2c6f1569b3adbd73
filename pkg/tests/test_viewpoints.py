import itertools

import numpy as np
import pytest

from voxplore.viewpoints import (ClusterModel, ViewpointSet, build_cluster_model,
                                 entropy_scores, fibonacci_sphere, greedy_select,
                                 kmeans_fit, kmeans_objective, sample_viewpoints,
                                 visibility_matrix)


class TestKMeans:
    def test_k1_centroid_is_global_mean(self, rng):
        x = rng.random((50, 6)).astype(np.float32)
        centroids, assign, _ = kmeans_fit(x, 1, seed=0)
        np.testing.assert_allclose(centroids[0], x.astype(np.float64).mean(axis=0),
                                   rtol=1e-6)
        assert np.all(assign == 0)

    def test_two_separated_blobs(self, rng):
        a = rng.normal(0.0, 0.05, (40, 8))
        b = rng.normal(5.0, 0.05, (60, 8))
        x = np.vstack([a, b]).astype(np.float32)
        _, assign, _ = kmeans_fit(x, 2, seed=1)
        assert len(np.unique(assign[:40])) == 1
        assert len(np.unique(assign[40:])) == 1
        assert assign[0] != assign[40]

    def test_objective_non_increasing_over_iterations(self, rng):
        x = rng.random((200, 4)).astype(np.float32)
        prev = None
        for iters in range(1, 8):
            centroids, assign, _ = kmeans_fit(x, 5, seed=3, max_iters=iters)
            obj = kmeans_objective(x, centroids, assign)
            if prev is not None:
                assert obj <= prev + 1e-6
            prev = obj

    def test_deterministic(self, rng):
        x = rng.random((100, 8)).astype(np.float32)
        c1, a1, _ = kmeans_fit(x, 4, seed=9)
        c2, a2, _ = kmeans_fit(x, 4, seed=9)
        assert np.array_equal(c1, c2) and np.array_equal(a1, a2)

    def test_too_few_distinct_vectors_rejected(self):
        x = np.zeros((10, 3), dtype=np.float32)
        with pytest.raises(ValueError, match="distinct"):
            kmeans_fit(x, 2, seed=0)

    def test_every_sample_assigned(self, rng):
        x = rng.random((64, 5)).astype(np.float32)
        _, assign, _ = kmeans_fit(x, 6, seed=2)
        assert assign.shape == (64,)
        assert set(np.unique(assign)) <= set(range(6))


class TestFibonacciSphere:
    def test_unit_length(self):
        pts = fibonacci_sphere(1800)
        np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-12)

    def test_near_uniform_hemisphere_balance(self):
        pts = fibonacci_sphere(1800)
        assert abs((pts[:, 2] > 0).sum() - 900) <= 1


def manual_clusters(centroids, normals, sizes, degenerate=None):
    k = len(sizes)
    if degenerate is None:
        degenerate = np.zeros(k, dtype=bool)
    return ClusterModel(np.zeros((k, 2)), np.zeros(1, dtype=np.int64),
                        np.asarray(centroids, dtype=np.float64),
                        np.asarray(normals, dtype=np.float64),
                        np.asarray(sizes), np.asarray(degenerate))


class TestVisibility:
    def test_normal_toward_viewpoint_visible(self):
        clusters = manual_clusters([[0, 0, 0]], [[1, 0, 0]], [5])
        views = ViewpointSet(np.array([[1.0, 0, 0]]), np.zeros(3), 10.0)
        assert visibility_matrix(clusters, views)[0, 0]

    def test_normal_away_not_visible(self):
        clusters = manual_clusters([[0, 0, 0]], [[-1, 0, 0]], [5])
        views = ViewpointSet(np.array([[1.0, 0, 0]]), np.zeros(3), 10.0)
        assert not visibility_matrix(clusters, views)[0, 0]

    def test_degenerate_normal_visible_everywhere(self):
        clusters = manual_clusters([[0, 0, 0]], [[0, 0, 0]], [5],
                                   degenerate=[True])
        views = ViewpointSet(fibonacci_sphere(16), np.zeros(3), 5.0)
        assert visibility_matrix(clusters, views).all()

    def test_matches_scalar_oracle(self, rng):
        k, m = 7, 9
        clusters = manual_clusters(rng.normal(size=(k, 3)),
                                   rng.normal(size=(k, 3)), np.ones(k))
        normals = clusters.normals / np.linalg.norm(clusters.normals, axis=1,
                                                    keepdims=True)
        clusters = manual_clusters(clusters.centroids_world, normals, np.ones(k))
        views = ViewpointSet(fibonacci_sphere(m), rng.normal(size=3), 8.0)
        vis = visibility_matrix(clusters, views)
        eyes = views.eyes()
        for i in range(m):
            for j in range(k):
                d = eyes[i] - clusters.centroids_world[j]
                d = d / np.linalg.norm(d)
                assert vis[i, j] == (float(d @ clusters.normals[j]) > 0.0)

    def test_rotation_invariance(self, rng):
        k = 6
        centroids = rng.normal(size=(k, 3))
        normals = rng.normal(size=(k, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        dirs = fibonacci_sphere(32)
        center = np.zeros(3)
        base = visibility_matrix(manual_clusters(centroids, normals, np.ones(k)),
                                 ViewpointSet(dirs, center, 6.0))
        theta = 0.7
        rot = np.array([[np.cos(theta), -np.sin(theta), 0],
                        [np.sin(theta), np.cos(theta), 0], [0, 0, 1.0]])
        rotated = visibility_matrix(
            manual_clusters(centroids @ rot.T, normals @ rot.T, np.ones(k)),
            ViewpointSet(dirs @ rot.T, center, 6.0))
        assert np.array_equal(base, rotated)


class TestEntropy:
    def test_single_visible_cluster_zero(self):
        vis = np.array([[True, False, False]])
        assert entropy_scores(vis, np.array([5, 3, 2]))[0] == 0.0

    def test_two_equal_clusters_ln2(self):
        vis = np.array([[True, True]])
        assert entropy_scores(vis, np.array([7, 7]))[0] == pytest.approx(
            np.log(2), abs=1e-12)

    def test_crafted_matrix_manual_table(self):
        vis = np.array([[True, True, False, False],
                        [True, True, True, True],
                        [False, False, False, True]])
        sizes = np.array([1, 3, 2, 2])
        scores = entropy_scores(vis, sizes)
        h0 = -(0.25 * np.log(0.25) + 0.75 * np.log(0.75))
        p = np.array([1, 3, 2, 2]) / 8
        h1 = float(-(p * np.log(p)).sum())
        assert scores[0] == pytest.approx(h0, abs=1e-12)
        assert scores[1] == pytest.approx(h1, abs=1e-12)
        assert scores[2] == 0.0

    def test_equal_sizes_maximize_entropy(self, rng):
        vis = np.ones((1, 6), dtype=bool)
        base = entropy_scores(vis, np.full(6, 10))[0]
        for _ in range(20):
            sizes = rng.integers(1, 30, 6)
            if len(np.unique(sizes)) == 1:
                continue
            assert entropy_scores(vis, sizes)[0] < base

    def test_nonpositive_sizes_rejected(self):
        with pytest.raises(ValueError):
            entropy_scores(np.ones((1, 2), dtype=bool), np.array([1, 0]))


def brute_force_best_coverage(vis, k):
    best = 0
    for combo in itertools.combinations(range(vis.shape[0]), k):
        covered = np.zeros(vis.shape[1], dtype=bool)
        for i in combo:
            covered |= vis[i]
        best = max(best, covered.sum())
    return best


class TestGreedySelect:
    def test_single_viewpoint_covers_all(self):
        vis = np.array([[True, True, True], [True, False, False]])
        selected, coverage = greedy_select(vis, np.ones(3))
        assert selected == [0]
        assert coverage == [1.0]

    def test_disjoint_two_viewpoint_cover(self):
        vis = np.array([[True, True, True, False],
                        [False, False, False, True]])
        selected, coverage = greedy_select(vis, np.ones(4), coverage_target=1.0)
        assert selected == [0, 1]
        assert coverage == [0.75, 1.0]

    def test_coverage_non_decreasing(self, rng):
        for seed in range(5):
            r = np.random.default_rng(seed)
            vis = r.random((12, 9)) < 0.4
            selected, coverage = greedy_select(vis, np.ones(9),
                                               coverage_target=1.0, max_views=12)
            assert all(b >= a for a, b in zip(coverage, coverage[1:]))
            assert len(set(selected)) == len(selected)

    def test_greedy_meets_submodular_bound(self):
        # equal sizes make the entropy score equivalent to counting, so the
        # classic (1 - 1/e) maximum-coverage guarantee applies at every k
        bound = 1.0 - 1.0 / np.e
        for seed in range(12):
            rng = np.random.default_rng(seed)
            vis = rng.random((10, 8)) < 0.35
            if not vis.any():
                continue
            sizes = np.ones(8)
            selected, _ = greedy_select(vis, sizes, coverage_target=1.01,
                                        max_views=10)
            covered = np.zeros(8, dtype=bool)
            for step, pick in enumerate(selected, start=1):
                covered |= vis[pick]
                optimal = brute_force_best_coverage(vis, min(step, vis.shape[0]))
                assert covered.sum() >= bound * optimal - 1e-9

    def test_deterministic(self, rng):
        vis = rng.random((20, 10)) < 0.3
        sizes = rng.integers(1, 50, 10)
        a = greedy_select(vis, sizes)
        b = greedy_select(vis, sizes)
        assert a == b

    def test_nothing_visible_empty_selection(self):
        vis = np.zeros((4, 3), dtype=bool)
        selected, coverage = greedy_select(vis, np.ones(3))
        assert selected == [] and coverage == []


class TestClusterGeometry:
    def test_cluster_model_from_volume(self, rng):
        from voxplore.inr.features import FeatureVolume
        from voxplore.volume import ScalarVolume, compute_derived_fields
        vol = ScalarVolume(rng.random((8, 8, 8)).astype(np.float32))
        fields = compute_derived_fields(vol, 3)
        feats = FeatureVolume(vol.dims, rng.random((512, 16)).astype(np.float32), "h")
        clusters = build_cluster_model(feats, vol, fields, k=5, seed=0)
        assert clusters.k == 5
        assert clusters.sizes.sum() == 512
        lengths = np.linalg.norm(clusters.normals, axis=1)
        ok = ~clusters.degenerate
        np.testing.assert_allclose(lengths[ok], 1.0, atol=1e-9)
        # centroids inside the world box
        assert clusters.centroids_world.min() >= 0.0
        assert clusters.centroids_world.max() <= 8.0

    def test_viewpoint_set_radius(self):
        from voxplore.volume import ScalarVolume
        vol = ScalarVolume(np.random.default_rng(0).random((8, 8, 8))
                           .astype(np.float32))
        views = sample_viewpoints(vol, m=64)
        assert views.m == 64
        np.testing.assert_allclose(np.linalg.norm(views.directions, axis=1), 1.0,
                                   atol=1e-12)
        assert views.radius == pytest.approx(1.5 * np.sqrt(3 * 8 ** 2))
