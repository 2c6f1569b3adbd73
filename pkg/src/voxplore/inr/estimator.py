"""Scikit-learn style estimator facade over the feature INR."""

from __future__ import annotations

import hashlib

import numpy as np
from sklearn.base import BaseEstimator

from ..volume import ScalarVolume, compute_derived_fields
from .config import HashGridConfig, ModelConfig, TrainConfig
from .features import extract_features, feature_source_hash
from .train import train


class InrFeatures(BaseEstimator):
    """Learns a per-voxel feature representation from a scalar volume.

    fit(volume) trains the network; transform() returns the 64-D
    FeatureVolume of the fitted volume.  Features are bound to the exact
    volume seen at fit time, so transform refuses a different one.
    """

    def __init__(self, levels=8, features_per_level=2, table_size=1 << 16,
                 base_resolution=16, per_level_scale=1.5, patch_side=5,
                 fusion="film", gradient_target="vector", learning_rate=1e-4,
                 epochs=100, batch_size=65536, lambda_grad=1.0,
                 lambda_stat=0.5, seed=0, dtype="float32"):
        self.levels = levels
        self.features_per_level = features_per_level
        self.table_size = table_size
        self.base_resolution = base_resolution
        self.per_level_scale = per_level_scale
        self.patch_side = patch_side
        self.fusion = fusion
        self.gradient_target = gradient_target
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.lambda_grad = lambda_grad
        self.lambda_stat = lambda_stat
        self.seed = seed
        self.dtype = dtype

    def model_config(self) -> ModelConfig:
        grid = HashGridConfig(levels=self.levels,
                              features_per_level=self.features_per_level,
                              table_size=self.table_size,
                              base_resolution=self.base_resolution,
                              per_level_scale=self.per_level_scale)
        return ModelConfig(grid=grid, patch_side=self.patch_side,
                           fusion=self.fusion,
                           gradient_target=self.gradient_target)

    def train_config(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, epochs=self.epochs,
                           batch_size=self.batch_size,
                           lambda_grad=self.lambda_grad,
                           lambda_stat=self.lambda_stat, seed=self.seed,
                           dtype=self.dtype)

    def fit(self, volume: ScalarVolume, y=None, progress_cb=None):
        fields = compute_derived_fields(volume, self.patch_side)
        model_cfg = self.model_config()
        train_cfg = self.train_config()
        self.model_, self.history_ = train(volume, fields, model_cfg, train_cfg,
                                           progress_cb=progress_cb)
        self.fields_ = fields
        self.source_hash_ = feature_source_hash(volume, model_cfg, train_cfg)
        self._fit_digest = hashlib.sha256(
            np.ascontiguousarray(volume.data).tobytes()).hexdigest()
        self._fit_volume = volume
        return self

    def transform(self, volume: ScalarVolume = None):
        if not hasattr(self, "model_"):
            raise RuntimeError("InrFeatures is not fitted")
        if volume is None:
            volume = self._fit_volume
        else:
            digest = hashlib.sha256(
                np.ascontiguousarray(volume.data).tobytes()).hexdigest()
            if digest != self._fit_digest:
                raise ValueError("features are bound to the fitted volume; "
                                 "got a different volume")
        return extract_features(self.model_, volume, self.source_hash_)

    def fit_transform(self, volume: ScalarVolume, y=None, **fit_kwargs):
        return self.fit(volume, y, **fit_kwargs).transform()
