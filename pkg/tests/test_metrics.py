import numpy as np
import pytest

from voxplore.metrics import f1_scores, psnr
from voxplore.volume import LabelVolume


def lv(arr):
    return LabelVolume(np.asarray(arr, dtype=np.int32))


class TestF1:
    def test_perfect_prediction(self, rng):
        labels = rng.integers(0, 4, (6, 6, 6))
        gt = lv(labels)
        scores = f1_scores(labels.ravel(order="F"), gt)
        assert scores["mean"] == 1.0
        assert scores["std"] == 0.0
        assert all(v == 1.0 for v in scores["per_class"].values())

    def test_all_background_prediction(self, rng):
        gt = lv(rng.integers(0, 3, (5, 5, 5)))
        scores = f1_scores(np.zeros(125, dtype=int), gt)
        assert scores["mean"] == 0.0
        assert all(v == 0.0 for v in scores["per_class"].values())

    def test_crafted_ten_voxel_confusion(self):
        # class 1: tp=2 fp=1 fn=1 -> p=2/3 r=2/3 f1=2/3
        # class 2: tp=1 fp=2 fn=1 -> p=1/3 r=1/2 f1=2/5
        gt_arr = np.array([1, 1, 1, 2, 2, 0, 0, 0, 0, 0]).reshape(10, 1, 1)
        pred = np.array([1, 1, 2, 2, 1, 2, 0, 0, 0, 0])
        scores = f1_scores(pred, lv(gt_arr))
        assert scores["per_class"][1] == pytest.approx(2 / 3)
        assert scores["per_class"][2] == pytest.approx(2 / 5)
        expected = np.array([2 / 3, 2 / 5])
        assert scores["mean"] == pytest.approx(expected.mean())
        assert scores["std"] == pytest.approx(expected.std())

    def test_background_predictions_count_as_negatives(self):
        # suppressed voxels become false negatives for their GT class
        gt_arr = np.array([1, 1, 1, 1]).reshape(4, 1, 1)
        pred = np.array([1, 1, 0, 0])
        scores = f1_scores(pred, lv(gt_arr))
        assert scores["per_class"][1] == pytest.approx(2 * 2 / (2 * 2 + 0 + 2))

    def test_permutation_invariance(self, rng):
        gt_arr = rng.integers(0, 3, (4, 4, 4))
        pred = rng.integers(0, 3, 64)
        base = f1_scores(pred, lv(gt_arr))
        perm = rng.permutation(64)
        gt_flat = gt_arr.ravel(order="F")[perm]
        permuted = f1_scores(pred[perm], lv(gt_flat.reshape(4, 4, 4, order="F")))
        assert base["per_class"] == permuted["per_class"]

    def test_relabeling_symmetry(self, rng):
        # swapping labels 1 and 2 in both prediction and GT swaps the scores
        gt_arr = rng.integers(0, 3, (4, 4, 4))
        pred = rng.integers(0, 3, 64)
        base = f1_scores(pred, lv(gt_arr))
        swap = {0: 0, 1: 2, 2: 1}
        gt_sw = np.vectorize(swap.get)(gt_arr)
        pred_sw = np.vectorize(swap.get)(pred)
        swapped = f1_scores(pred_sw, lv(gt_sw))
        assert swapped["per_class"][1] == pytest.approx(base["per_class"][2])
        assert swapped["per_class"][2] == pytest.approx(base["per_class"][1])

    def test_dims_mismatch_rejected(self, rng):
        with pytest.raises(ValueError, match="voxels"):
            f1_scores(np.zeros(10, dtype=int), lv(rng.integers(0, 2, (3, 3, 3))))


class TestPsnr:
    def test_identical_is_infinite(self):
        x = np.random.default_rng(0).random((4, 4))
        assert psnr(x, x) == np.inf

    def test_known_mse(self):
        a = np.zeros(100)
        b = np.full(100, 0.1)
        assert psnr(a, b) == pytest.approx(20.0)
