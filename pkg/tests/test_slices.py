import numpy as np
import pytest

from voxplore.forest import ProbabilityVolume, ScribbleSet
from voxplore.render import render_slice, class_color
from voxplore.render.image import encode_png, to_uint8
from voxplore.volume import LabelVolume, ScalarVolume


@pytest.fixture
def vol(rng):
    return ScalarVolume(rng.random((6, 5, 4)).astype(np.float32))


class TestRenderSlice:
    def test_plain_grayscale(self, vol):
        img = render_slice(vol, axis=2, index=1)
        assert img.shape == (5, 6, 4)        # rows = y, cols = x for a z slice
        for r in range(5):
            for c in range(6):
                expected = vol.data[c, r, 1]
                np.testing.assert_allclose(img[r, c, :3], expected, atol=1e-12)
                assert img[r, c, 3] == 1.0

    def test_axis0_orientation(self, vol):
        img = render_slice(vol, axis=0, index=2)
        assert img.shape == (4, 5, 4)        # rows = z, cols = y
        assert img[3, 1, 0] == pytest.approx(float(vol.data[2, 1, 3]))

    def test_scribble_overlay_exact_positions(self, vol):
        ss = ScribbleSet(np.array([[2, 3, 1], [4, 0, 1], [1, 1, 2]]),
                         np.array([1, 2, 1]))
        img = render_slice(vol, axis=2, index=1, overlay="scribbles", scribbles=ss)
        np.testing.assert_allclose(img[3, 2, :3], class_color(1), atol=1e-12)
        np.testing.assert_allclose(img[0, 4, :3], class_color(2), atol=1e-12)
        # voxel on another slice is untouched
        assert img[1, 1, 0] == pytest.approx(float(vol.data[1, 1, 1]))

    def test_one_hot_probability_overlay_exact_palette(self, vol):
        n = vol.n_voxels
        probs = np.zeros((n, 3), dtype=np.float32)
        probs[:, 0] = 1.0
        flat = 2 + 6 * (3 + 5 * 1)           # voxel (2, 3, 1)
        probs[flat] = [0.0, 0.0, 1.0]        # one-hot class 2
        pv = ProbabilityVolume(vol.dims, (0, 1, 2), probs)
        img = render_slice(vol, axis=2, index=1, overlay="probability", prob=pv,
                           overlay_alpha=1.0)
        np.testing.assert_allclose(img[3, 2, :3], class_color(2), atol=1e-6)

    def test_random_probability_overlay_matches_blend_oracle(self, vol, rng):
        n = vol.n_voxels
        raw = rng.random((n, 3)).astype(np.float64)
        raw /= raw.sum(axis=1, keepdims=True)
        pv = ProbabilityVolume(vol.dims, (0, 1, 2), raw.astype(np.float32))
        alpha = 0.5
        img = render_slice(vol, axis=2, index=2, overlay="probability", prob=pv,
                           overlay_alpha=alpha)
        probs = pv.probs
        for r in range(5):
            for c in range(6):
                flat = c + 6 * (r + 5 * 2)
                p1, p2 = probs[flat, 1], probs[flat, 2]
                total = p1 + p2
                if total > 0:
                    color = (p1 * class_color(1) + p2 * class_color(2)) / total
                else:
                    color = np.zeros(3)
                a = alpha * min(total, 1.0)
                base = vol.data[c, r, 2]
                expected = (1 - a) * base + a * color
                np.testing.assert_allclose(img[r, c, :3], expected, atol=1e-6)

    def test_label_overlay(self, vol):
        labels = np.zeros(vol.dims, dtype=np.int32)
        labels[1, 2, 3] = 2
        img = render_slice(vol, axis=2, index=3, overlay="label",
                           labels=LabelVolume(labels), overlay_alpha=1.0)
        np.testing.assert_allclose(img[2, 1, :3], class_color(2), atol=1e-12)

    def test_index_out_of_range(self, vol):
        with pytest.raises(ValueError, match="index"):
            render_slice(vol, axis=2, index=9)

    def test_bad_axis(self, vol):
        with pytest.raises(ValueError, match="axis"):
            render_slice(vol, axis=3, index=0)


class TestImageEncoding:
    def test_uint8_rounding(self):
        img = np.array([[[0.0, 0.5, 1.0, 1.0]]])
        out = to_uint8(img)
        assert out.tolist() == [[[0, 128, 255, 255]]]

    def test_png_deterministic(self, rng):
        img = rng.random((8, 8, 4))
        assert encode_png(img) == encode_png(img)
