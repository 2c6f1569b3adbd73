import numpy as np
import pytest

from voxplore.volume import ScalarVolume


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_volume(rng):
    return ScalarVolume(rng.random((8, 8, 8)).astype(np.float32))


def tiny_model_config(levels=2, features=2, table=256):
    from voxplore.inr import HashGridConfig, ModelConfig
    return ModelConfig(grid=HashGridConfig(levels=levels, features_per_level=features,
                                           table_size=table))


# ReLU layers in forward order: (pre-activation cache key, bias parameter)
RELU_LAYERS = [("enc_z1", "enc_b1"), ("enc_z2", "enc_b2"), ("za", "mlp_b1"),
               ("zb", "mlp_b2"), ("zc", "mlp_b3"), ("zd", "mlp_b4")]


def nudge_biases_off_kinks(model, coords, patches, margin=0.02):
    """Shift ReLU biases so no pre-activation sits within `margin` of zero.

    Finite differences on a piecewise-linear network are only meaningful
    at smooth points; this prepares such a point without changing the
    network's random character.
    """
    from voxplore.inr.model import forward
    layers = [(z, b) for z, b in RELU_LAYERS if b in model.params]
    for zname, bname in layers:
        _, _, cache = forward(model, coords, patches, want_cache=True)
        z = cache[zname]
        bias = model.params[bname]
        for j in range(z.shape[1]):
            col = z[:, j]

            def clear(delta):
                return not np.any(np.abs(col + delta) < margin)

            if clear(0.0):
                continue
            candidates = sorted(np.concatenate([margin - col, -margin - col]),
                                key=abs)
            for delta in candidates:
                shifted = delta + np.sign(delta) * 1e-9
                if clear(shifted):
                    bias[j] += shifted
                    break
    _, _, cache = forward(model, coords, patches, want_cache=True)
    worst = min(np.abs(cache[z]).min() for z, _ in layers)
    assert worst >= margin * 0.99, f"kink clearance failed: {worst}"
    return model


def finite_difference_check(model, coords, patches, targets, lambda_grad,
                            lambda_stat, h=1e-3, rel_tol=1e-3, max_per_group=None):
    """Compare analytic gradients with central differences per group.

    Returns {param name: worst relative error}.
    """
    from voxplore.inr.model import backward, forward
    from voxplore.inr.train import _loss_backward, loss_total

    def loss_at():
        pred, _, _ = forward(model, coords, patches)
        return loss_total(pred, targets, lambda_grad, lambda_stat)[0]

    pred, _, cache = forward(model, coords, patches, want_cache=True)
    grads = backward(model, cache, _loss_backward(pred, targets,
                                                  lambda_grad, lambda_stat))
    worst = {}
    for name, arr in model.params.items():
        grad = grads[name]
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        idx = np.arange(flat.size)
        if max_per_group is not None and flat.size > max_per_group:
            idx = np.random.default_rng(0).choice(flat.size, max_per_group,
                                                  replace=False)
        wmax = 0.0
        for i in idx:
            old = flat[i]
            flat[i] = old + h
            lp = loss_at()
            flat[i] = old - h
            lm = loss_at()
            flat[i] = old
            fd = (lp - lm) / (2.0 * h)
            rel = abs(gflat[i] - fd) / max(abs(gflat[i]), abs(fd), 1e-8)
            wmax = max(wmax, rel)
        worst[name] = wmax
    return worst
