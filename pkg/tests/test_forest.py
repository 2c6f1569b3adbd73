import numpy as np
import pytest

from voxplore.forest import (ForestFormatError, ProbabilityVolume,
                             ScribbleError, ScribbleRandomForest, ScribbleSet,
                             apply_background_rule, load_forest, save_forest)


def separable_data(rng, n=40, features=8):
    """Two classes split exactly by feature 0 at 0.5."""
    x = rng.random((n, features)).astype(np.float32)
    y = (x[:, 0] >= 0.5).astype(np.int64) + 1
    # guarantee both classes appear
    x[0, 0], y[0] = 0.1, 1
    x[1, 0], y[1] = 0.9, 2
    return x, y


class TestScribbleSet:
    def test_document_roundtrip(self):
        ss = ScribbleSet(np.array([[1, 2, 3], [4, 5, 6]]), np.array([1, 2]),
                         np.array([0, 1]),
                         {0: {"axis": 2, "index": 3}, 1: {"axis": 2, "index": 6}})
        doc = ss.to_document()
        back = ScribbleSet.from_document(doc, dims=(8, 8, 8))
        assert np.array_equal(back.voxels, ss.voxels)
        assert np.array_equal(back.classes, ss.classes)
        assert back.strokes == ss.strokes

    def test_last_write_wins_and_flagged(self):
        ss = ScribbleSet(np.array([[1, 1, 1], [2, 2, 2], [1, 1, 1]]),
                         np.array([1, 2, 3]))
        assert len(ss) == 2
        assert ss.conflict_count == 1
        row = np.nonzero((ss.voxels == [1, 1, 1]).all(axis=1))[0][0]
        assert ss.classes[row] == 3

    def test_out_of_bounds_rejected(self):
        ss = ScribbleSet(np.array([[9, 0, 0]]), np.array([1]))
        with pytest.raises(ScribbleError, match="bounds"):
            ss.validate_bounds((8, 8, 8))

    def test_malformed_document_rejected(self):
        with pytest.raises(ScribbleError, match="entry"):
            ScribbleSet.from_document([{"voxel": [1, 2], "class": 1}])


class TestForestFit:
    def test_single_class_rejected(self, rng):
        x = rng.random((10, 4)).astype(np.float32)
        with pytest.raises(ScribbleError, match="2 distinct"):
            ScribbleRandomForest(trees=3).fit(x, np.ones(10, dtype=int))

    def test_empty_rejected(self):
        with pytest.raises(ScribbleError, match="empty"):
            ScribbleRandomForest(trees=3).fit(np.zeros((0, 4)), np.zeros(0, int))

    def test_separable_data_perfect_training_accuracy(self, rng):
        x, y = separable_data(rng)
        forest = ScribbleRandomForest(trees=25, seed=1).fit(x, y)
        assert np.array_equal(forest.predict(x), y)
        # with splits allowed down to purity, every leaf is pure on the
        # training points, so the forest is certain there
        pure = ScribbleRandomForest(trees=25, seed=1, min_samples_split=2).fit(x, y)
        proba = pure.predict_proba(x)
        assert np.all(proba[np.arange(len(y)), pure.classes_.searchsorted(y)] == 1.0)

    def test_fixed_seed_reproducible(self, rng):
        x = rng.random((60, 8)).astype(np.float32)
        y = rng.integers(0, 3, 60)
        probe = rng.random((100, 8)).astype(np.float32)
        p1 = ScribbleRandomForest(trees=15, seed=5).fit(x, y).predict_proba(probe)
        p2 = ScribbleRandomForest(trees=15, seed=5).fit(x, y).predict_proba(probe)
        assert np.array_equal(p1, p2)

    def test_permutation_invariance(self, rng):
        x = rng.random((50, 6)).astype(np.float32)
        y = rng.integers(0, 3, 50)
        probe = rng.random((64, 6)).astype(np.float32)
        base = ScribbleRandomForest(trees=10, seed=2).fit(x, y).predict_proba(probe)
        perm = rng.permutation(50)
        shuffled = ScribbleRandomForest(trees=10, seed=2).fit(x[perm], y[perm]) \
            .predict_proba(probe)
        np.testing.assert_allclose(base, shuffled, atol=1e-6)

    def test_duplicate_sample_never_hurts_its_own_class(self, rng):
        for seed in range(5):
            r = np.random.default_rng(seed)
            x = r.random((30, 5)).astype(np.float32)
            y = r.integers(1, 4, 30)
            pick = int(r.integers(0, 30))
            f = ScribbleRandomForest(trees=30, seed=7).fit(x, y)
            col = int(np.searchsorted(f.classes_, y[pick]))
            before = f.predict_proba(x[pick:pick + 1])[0, col]
            x2 = np.vstack([x, x[pick:pick + 1]])
            y2 = np.append(y, y[pick])
            f2 = ScribbleRandomForest(trees=30, seed=7).fit(x2, y2)
            after = f2.predict_proba(x[pick:pick + 1])[0, col]
            assert after >= before - 1e-6


class TestPredictProba:
    def test_probabilities_sum_to_one(self, rng):
        x = rng.random((80, 8)).astype(np.float32)
        y = rng.integers(0, 4, 80)
        forest = ScribbleRandomForest(trees=12, seed=0).fit(x, y)
        proba = forest.predict_proba(rng.random((500, 8)).astype(np.float32))
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-6)

    def test_single_stump_leaf_frequencies(self):
        # 3-vs-1 mixture in the right leaf is reproduced exactly
        x = np.array([[0.1], [0.2], [0.8], [0.85], [0.9], [0.95]],
                     dtype=np.float32)
        y = np.array([1, 1, 2, 2, 2, 1])
        forest = ScribbleRandomForest(trees=1, min_samples_split=6, seed=0,
                                      max_features=1).fit(x, y)
        proba = forest.predict_proba(np.array([[0.0], [1.0]], dtype=np.float32))
        np.testing.assert_allclose(proba[0], [1.0, 0.0], atol=1e-6)
        np.testing.assert_allclose(proba[1], [0.25, 0.75], atol=1e-6)

    def test_width_mismatch_rejected(self, rng):
        x, y = separable_data(rng)
        forest = ScribbleRandomForest(trees=3).fit(x, y)
        with pytest.raises(ScribbleError, match="width"):
            forest.predict_proba(rng.random((4, 5)).astype(np.float32))

    def test_export_roundtrip(self, rng, tmp_path):
        x = rng.random((40, 6)).astype(np.float32)
        y = rng.integers(0, 3, 40)
        forest = ScribbleRandomForest(trees=8, seed=3).fit(x, y)
        probe = rng.random((64, 6)).astype(np.float32)
        save_forest(forest, tmp_path / "f.vxrf")
        back = load_forest(tmp_path / "f.vxrf")
        assert np.array_equal(back.predict_proba(probe), forest.predict_proba(probe))
        assert np.array_equal(back.classes_, forest.classes_)

    def test_export_bad_magic(self, tmp_path):
        (tmp_path / "junk.vxrf").write_bytes(b"garbage")
        with pytest.raises(ForestFormatError, match="magic"):
            load_forest(tmp_path / "junk.vxrf")


class TestBackgroundRule:
    def make_pv(self, rows):
        probs = np.asarray(rows, dtype=np.float32)
        dims = (probs.shape[0], 2, 2)
        full = np.repeat(probs, 4, axis=0)
        return ProbabilityVolume(dims, tuple(range(probs.shape[1])), full)

    def test_confident_foreground(self):
        pv = self.make_pv([[0.1, 0.9]])
        assert np.all(apply_background_rule(pv, 0.5) == 1)

    def test_low_confidence_goes_background(self):
        # max foreground below tau -> background
        pv = self.make_pv([[0.2, 0.4, 0.4]])
        assert np.all(apply_background_rule(pv, 0.5) == 0)

    def test_tie_breaks_to_lowest_class(self):
        pv = self.make_pv([[0.0, 0.5, 0.5]])
        assert np.all(apply_background_rule(pv, 0.5) == 1)

    def test_matches_scalar_oracle(self, rng):
        raw = rng.random((50, 4)).astype(np.float64)
        raw /= raw.sum(axis=1, keepdims=True)
        pv = ProbabilityVolume((50, 1, 1), (0, 1, 2, 3), raw.astype(np.float32))
        labels = apply_background_rule(pv, 0.5)
        probs = pv.probs
        for i in range(50):
            fg = probs[i, 1:]
            best = int(np.argmax(fg)) + 1
            expected = best if fg[best - 1] >= 0.5 else 0
            assert labels[i] == expected

    def test_idempotent_probabilities_unchanged(self, rng):
        raw = rng.random((10, 3)).astype(np.float64)
        raw /= raw.sum(axis=1, keepdims=True)
        pv = ProbabilityVolume((10, 1, 1), (0, 1, 2), raw.astype(np.float32))
        a = apply_background_rule(pv, 0.5)
        b = apply_background_rule(pv, 0.5)
        assert np.array_equal(a, b)
