import numpy as np
import pytest

from voxplore.inr import HashGridConfig, ModelConfig, init_model
from voxplore.inr.model import backward, film_modulate, forward, param_shapes
from voxplore.inr.train import loss_total

from conftest import tiny_model_config


class TestFilmModulate:
    def test_zero_scale_shift_is_identity(self):
        f = np.random.default_rng(0).normal(size=(4, 8))
        out = film_modulate(f, np.zeros_like(f), np.zeros_like(f))
        assert np.array_equal(out, f)

    def test_single_value_arithmetic(self):
        out = film_modulate(np.array([[0.5]]), np.array([[1.0]]), np.array([[0.25]]))
        assert out[0, 0] == pytest.approx(1.25)

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(1)
        f, g, b = (rng.normal(size=(3, 7)) for _ in range(3))
        out = film_modulate(f, g, b)
        for i in range(3):
            for j in range(7):
                assert out[i, j] == pytest.approx(f[i, j] * (g[i, j] + 1) + b[i, j])

    def test_width_mismatch_rejected(self):
        with pytest.raises(ValueError):
            film_modulate(np.zeros((2, 3)), np.zeros((2, 4)), np.zeros((2, 3)))


class TestForward:
    def test_all_zero_parameters_give_zero_predictions(self):
        cfg = tiny_model_config()
        model = init_model(cfg, np.random.default_rng(0))
        for name in model.params:
            model.params[name] = np.zeros_like(model.params[name])
        rng = np.random.default_rng(1)
        preds, hidden, _ = forward(model, rng.random((5, 3)),
                                   rng.random((5, 125)).astype(np.float32))
        assert np.all(preds == 0.0)
        assert np.all(hidden == 0.0)

    def test_head_width_and_hidden_width(self):
        cfg = tiny_model_config()
        model = init_model(cfg, np.random.default_rng(0))
        assert param_shapes(cfg)["head_w"] == (64, 6)
        preds, hidden, _ = forward(model, np.random.random((3, 3)),
                                   np.random.random((3, 125)))
        assert preds.shape == (3, 6)
        assert hidden.shape == (3, 64)

    def test_zeroed_film_ignores_patches(self):
        # identity modulation means patch content cannot reach the output
        cfg = tiny_model_config()
        model = init_model(cfg, np.random.default_rng(2))
        model.params["film_w"][:] = 0.0
        model.params["film_b"][:] = 0.0
        rng = np.random.default_rng(3)
        pts = rng.random((10, 3))
        p1, h1, _ = forward(model, pts, rng.random((10, 125)))
        p2, h2, _ = forward(model, pts, rng.random((10, 125)))
        assert np.array_equal(p1, p2)
        assert np.array_equal(h1, h2)

    def test_zeroed_film_equals_network_without_fusion(self):
        # with identity modulation, the main path sees the raw positional
        # encoding plus its skip projection
        cfg = tiny_model_config()
        model = init_model(cfg, np.random.default_rng(4), dtype=np.float64)
        model.params["film_w"][:] = 0.0
        model.params["film_b"][:] = 0.0
        rng = np.random.default_rng(5)
        pts = rng.random((6, 3))
        preds, hidden, _ = forward(model, pts, rng.random((6, 125)))

        from voxplore.inr.hashgrid import encode_batch
        p = model.params
        f_pos, _ = encode_batch(p["tables"], cfg.grid, pts)
        relu = lambda x: np.maximum(x, 0.0)
        skip = f_pos @ p["skip_w"] + p["skip_b"]
        h1 = relu(f_pos @ p["mlp_w1"] + p["mlp_b1"])
        h2 = relu(h1 @ p["mlp_w2"] + p["mlp_b2"])
        h3 = relu((h2 + skip) @ p["mlp_w3"] + p["mlp_b3"])
        h4 = relu(h3 @ p["mlp_w4"] + p["mlp_b4"])
        expected = h4 @ p["head_w"] + p["head_b"]
        np.testing.assert_allclose(preds, expected, rtol=1e-12)
        np.testing.assert_allclose(hidden, h4, rtol=1e-12)

    def test_matches_straight_line_scalar_reimplementation(self):
        cfg = ModelConfig(grid=HashGridConfig(levels=2, features_per_level=1,
                                              table_size=64, base_resolution=3,
                                              per_level_scale=2.0))
        model = init_model(cfg, np.random.default_rng(6), dtype=np.float64)
        model.params["film_w"] = np.random.default_rng(7).normal(
            size=model.params["film_w"].shape) * 0.2
        rng = np.random.default_rng(8)
        pts = rng.random((4, 3))
        patches = rng.random((4, 125))
        preds, _, _ = forward(model, pts, patches)

        from test_hashgrid import oracle_encode
        p = model.params
        for b in range(4):
            f_pos = oracle_encode(p["tables"], cfg.grid, pts[b])
            h = patches[b]
            h = np.maximum(h @ p["enc_w1"] + p["enc_b1"], 0)
            h = np.maximum(h @ p["enc_w2"] + p["enc_b2"], 0)
            gb = h @ p["film_w"] + p["film_b"]
            d = cfg.grid.output_dim
            f_mod = f_pos * (gb[:d] + 1) + gb[d:]
            skip = f_mod @ p["skip_w"] + p["skip_b"]
            m = np.maximum(f_mod @ p["mlp_w1"] + p["mlp_b1"], 0)
            m = np.maximum(m @ p["mlp_w2"] + p["mlp_b2"], 0)
            m = np.maximum((m + skip) @ p["mlp_w3"] + p["mlp_b3"], 0)
            m = np.maximum(m @ p["mlp_w4"] + p["mlp_b4"], 0)
            expected = m @ p["head_w"] + p["head_b"]
            rel = np.abs(preds[b] - expected) / np.maximum(np.abs(expected), 1e-6)
            assert rel.max() < 1e-6

    def test_fusion_variants_shapes(self):
        for fusion in ("none", "concat", "film"):
            cfg = ModelConfig(grid=HashGridConfig(levels=2, features_per_level=2,
                                                  table_size=128), fusion=fusion)
            model = init_model(cfg, np.random.default_rng(0))
            patches = (np.random.random((3, 125)) if fusion != "none"
                       else np.zeros((0, 0)))
            preds, hidden, _ = forward(model, np.random.random((3, 3)), patches)
            assert preds.shape == (3, 6)
            assert hidden.shape == (3, 64)

    def test_magnitude_target_head_width(self):
        cfg = ModelConfig(grid=HashGridConfig(levels=2, features_per_level=2,
                                              table_size=128),
                          gradient_target="magnitude")
        model = init_model(cfg, np.random.default_rng(0))
        preds, _, _ = forward(model, np.random.random((3, 3)),
                              np.random.random((3, 125)))
        assert preds.shape == (3, 4)


class TestLossTotal:
    def test_zero_when_prediction_equals_target(self):
        x = np.random.default_rng(0).normal(size=(4, 6))
        total, parts = loss_total(x, x.copy(), 1.0, 0.5)
        assert total == 0.0
        assert all(v == 0.0 for v in parts.values())

    def test_degenerate_weights_reduce_to_intensity(self):
        rng = np.random.default_rng(1)
        pred, target = rng.normal(size=(5, 6)), rng.normal(size=(5, 6))
        total, parts = loss_total(pred, target, 0.0, 0.0)
        assert total == pytest.approx(parts["intensity"])

    def test_hand_built_two_sample_batch(self):
        # manual expansion with lambda_grad = 1, lambda_stat = 0.5
        pred = np.array([[0.5, 0.1, 0.2, 0.3, 0.4, 0.6],
                         [0.0, 0.0, 0.0, 0.0, 0.0, 0.0]])
        target = np.array([[0.4, 0.0, 0.0, 0.0, 0.2, 0.2],
                           [0.2, 0.1, 0.1, 0.1, 0.1, 0.1]])
        l_inten = ((0.5 - 0.4) ** 2 + (0.0 - 0.2) ** 2) / 2
        l_grad = ((0.1 ** 2 + 0.2 ** 2 + 0.3 ** 2)
                  + (0.1 ** 2 + 0.1 ** 2 + 0.1 ** 2)) / 6
        l_mu = ((0.4 - 0.2) ** 2 + 0.1 ** 2) / 2
        l_sigma = ((0.6 - 0.2) ** 2 + 0.1 ** 2) / 2
        total, parts = loss_total(pred, target, 1.0, 0.5)
        assert parts["intensity"] == pytest.approx(l_inten)
        assert parts["gradient"] == pytest.approx(l_grad)
        assert parts["mean"] == pytest.approx(l_mu)
        assert parts["std"] == pytest.approx(l_sigma)
        assert total == pytest.approx(l_inten + l_grad + 0.5 * (l_mu + l_sigma))

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            loss_total(np.zeros((0, 6)), np.zeros((0, 6)), 1.0, 0.5)


class TestGradientSpotCheck:
    def test_small_config_gradients_match_finite_differences(self):
        # fast spot check; the acceptance suite runs the full-size version
        from conftest import finite_difference_check, nudge_biases_off_kinks
        from voxplore.volume import (ScalarVolume, compute_derived_fields,
                                     PatchSource, normalized_coords)
        from voxplore.inr.train import build_targets

        rng = np.random.default_rng(3)
        vol = ScalarVolume(rng.random((4, 4, 4)).astype(np.float32))
        fields = compute_derived_fields(vol, 3)
        cfg = ModelConfig(grid=HashGridConfig(levels=1, features_per_level=2,
                                              table_size=64, base_resolution=3),
                          patch_side=3)
        model = init_model(cfg, np.random.default_rng(5), dtype=np.float64)
        model.params["film_w"] = np.random.default_rng(6).uniform(
            -0.3, 0.3, model.params["film_w"].shape)
        coords = normalized_coords(vol.dims)
        idx = np.arange(64)
        patches = PatchSource(vol, 3, dtype=np.float64).gather(
            idx % 4, (idx // 4) % 4, idx // 16)
        targets = build_targets(vol, fields, cfg, np.float64)
        nudge_biases_off_kinks(model, coords, patches)
        worst = finite_difference_check(model, coords, patches, targets,
                                        1.0, 0.5, max_per_group=40)
        assert max(worst.values()) < 1e-3, worst
