"""Volume-exploration-optimized implicit neural representation.

Hash-grid positional encoding fused with a patch-based structural encoder
through feature-wise linear modulation, trained with a multi-task
regression loss; the final hidden layer provides the 64-D per-voxel
feature representation consumed by classification and viewpoint modules.
"""

from .config import HashGridConfig, ModelConfig, TrainConfig
from .model import InrModel, film_modulate, init_model
from .train import TrainingDiverged, loss_total, train
from .features import FeatureVolume, extract_features, feature_source_hash, load_features, save_features
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .estimator import InrFeatures

__all__ = [
    "HashGridConfig", "ModelConfig", "TrainConfig",
    "InrModel", "film_modulate", "init_model",
    "TrainingDiverged", "loss_total", "train",
    "FeatureVolume", "extract_features", "feature_source_hash",
    "load_features", "save_features",
    "CheckpointError", "load_checkpoint", "save_checkpoint",
    "InrFeatures",
]
