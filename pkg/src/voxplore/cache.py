"""Content-addressed feature cache.

The cache key digests the exact volume bytes plus the model and training
configuration (seed included), so any change re-trains.  Each entry
holds the checkpoint, the extracted features, and a small meta document.
A corrupted entry is treated as a miss and rebuilt.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

from .inr import (InrFeatures, extract_features, feature_source_hash,
                  load_checkpoint, load_features, save_checkpoint,
                  save_features)
from .inr.checkpoint import CheckpointError
from .inr.features import FeatureCacheError
from .volume import ScalarVolume

log = logging.getLogger(__name__)


class StaleFeaturesError(RuntimeError):
    """Raised when cached features do not match the requested inputs."""


class FeatureCache:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def entry_dir(self, digest: str) -> Path:
        return self.root / digest

    @staticmethod
    def key(vol: ScalarVolume, estimator: InrFeatures) -> str:
        return feature_source_hash(vol, estimator.model_config(),
                                   estimator.train_config())

    def lookup(self, digest: str):
        """(features, model) on a hit, None on a miss or corrupt entry."""
        entry = self.entry_dir(digest)
        feat_path = entry / "features.vxfv"
        ckpt_path = entry / "checkpoint.vxpc"
        if not feat_path.exists() or not ckpt_path.exists():
            return None
        try:
            features = load_features(feat_path)
            model = load_checkpoint(ckpt_path)
        except (FeatureCacheError, CheckpointError) as exc:
            log.warning("corrupt cache entry %s (%s); treating as miss",
                        digest[:12], exc)
            return None
        if features.source_hash != digest:
            log.warning("cache entry %s carries foreign source hash; "
                        "treating as miss", digest[:12])
            return None
        return features, model

    def store(self, digest: str, model, features, train_cfg=None,
              extra_meta=None) -> Path:
        entry = self.entry_dir(digest)
        entry.mkdir(parents=True, exist_ok=True)
        save_checkpoint(model, entry / "checkpoint.vxpc", train_cfg)
        save_features(features, entry / "features.vxfv")
        meta = {"source_hash": digest, "dims": list(features.dims),
                "width": features.width}
        meta.update(extra_meta or {})
        (entry / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
        return entry

    def get_or_train(self, vol: ScalarVolume, estimator: InrFeatures,
                     progress_cb=None):
        """Returns (features, model, hit)."""
        digest = self.key(vol, estimator)
        cached = self.lookup(digest)
        if cached is not None:
            return cached[0], cached[1], True
        estimator.fit(vol, progress_cb=progress_cb)
        features = estimator.transform()
        self.store(digest, estimator.model_, features, estimator.train_config(),
                   {"epochs": estimator.epochs, "seed": estimator.seed,
                    "final_loss": estimator.history_[-1] if estimator.history_ else None})
        return features, estimator.model_, False
