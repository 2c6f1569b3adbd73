import numpy as np
import pytest

from voxplore.cache import FeatureCache
from voxplore.inr import InrFeatures
from voxplore.volume import ScalarVolume

EST_KWARGS = {"levels": 2, "features_per_level": 2, "table_size": 256,
              "epochs": 1, "batch_size": 64}


@pytest.fixture
def volume(rng):
    return ScalarVolume(rng.random((6, 6, 6)).astype(np.float32))


class TestFeatureCache:
    def test_miss_then_hit(self, tmp_path, volume):
        cache = FeatureCache(tmp_path)
        f1, m1, hit1 = cache.get_or_train(volume, InrFeatures(**EST_KWARGS))
        assert hit1 is False
        f2, m2, hit2 = cache.get_or_train(volume, InrFeatures(**EST_KWARGS))
        assert hit2 is True
        assert np.array_equal(f1.features, f2.features)
        for name in m1.params:
            assert np.array_equal(m1.params[name], m2.params[name])

    def test_config_change_misses(self, tmp_path, volume):
        cache = FeatureCache(tmp_path)
        cache.get_or_train(volume, InrFeatures(**EST_KWARGS))
        _, _, hit = cache.get_or_train(
            volume, InrFeatures(**dict(EST_KWARGS, lambda_grad=0.5)))
        assert hit is False

    def test_volume_change_misses(self, tmp_path, volume, rng):
        cache = FeatureCache(tmp_path)
        cache.get_or_train(volume, InrFeatures(**EST_KWARGS))
        other = ScalarVolume(rng.random((6, 6, 6)).astype(np.float32))
        _, _, hit = cache.get_or_train(other, InrFeatures(**EST_KWARGS))
        assert hit is False

    def test_tampered_payload_treated_as_miss(self, tmp_path, volume):
        cache = FeatureCache(tmp_path)
        est = InrFeatures(**EST_KWARGS)
        cache.get_or_train(volume, est)
        digest = cache.key(volume, InrFeatures(**EST_KWARGS))
        feat_file = cache.entry_dir(digest) / "features.vxfv"
        blob = bytearray(feat_file.read_bytes())
        blob[-5] ^= 0xFF
        feat_file.write_bytes(bytes(blob))
        assert cache.lookup(digest) is None
        _, _, hit = cache.get_or_train(volume, InrFeatures(**EST_KWARGS))
        assert hit is False
        # entry was rebuilt and is healthy again
        assert cache.lookup(digest) is not None

    def test_entry_layout(self, tmp_path, volume):
        cache = FeatureCache(tmp_path)
        est = InrFeatures(**EST_KWARGS)
        cache.get_or_train(volume, est)
        digest = cache.key(volume, InrFeatures(**EST_KWARGS))
        entry = cache.entry_dir(digest)
        assert (entry / "checkpoint.vxpc").exists()
        assert (entry / "features.vxfv").exists()
        assert (entry / "meta.json").exists()
