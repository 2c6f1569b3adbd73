"""Configuration records for the feature INR and its training loop."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict


@dataclass(frozen=True)
class HashGridConfig:
    """Multiresolution hash-grid encoding hyperparameters.

    Output width is levels * features_per_level.  Levels whose dense grid
    fits in the table use direct indexing; larger levels hash corners.
    """

    levels: int = 8
    features_per_level: int = 2
    table_size: int = 1 << 16
    base_resolution: int = 16
    per_level_scale: float = 1.5

    def __post_init__(self):
        if self.levels < 1 or self.features_per_level < 1:
            raise ValueError("levels and features_per_level must be >= 1")
        if self.table_size < 2 or self.table_size & (self.table_size - 1):
            raise ValueError("table_size must be a power of two")
        if self.per_level_scale <= 1.0:
            raise ValueError("per_level_scale must exceed 1")
        if self.base_resolution < 1:
            raise ValueError("base_resolution must be >= 1")

    @property
    def output_dim(self) -> int:
        return self.levels * self.features_per_level

    def resolutions(self) -> list:
        return [int(self.base_resolution * self.per_level_scale ** lvl)
                for lvl in range(self.levels)]


@dataclass(frozen=True)
class ModelConfig:
    """Architecture of the dual-pathway network.

    fusion selects how the structural path joins the positional encoding:
    "film" (scale/shift modulation plus residual skip), "concat"
    (plain concatenation), or "none" (positional encoding only).
    gradient_target "vector" regresses the normalized 3-vector (head
    width 6); "magnitude" regresses its scalar norm (head width 4).
    """

    grid: HashGridConfig = field(default_factory=HashGridConfig)
    patch_side: int = 5
    struct_width: int = 32
    hidden_width: int = 64
    fusion: str = "film"
    gradient_target: str = "vector"

    def __post_init__(self):
        if self.patch_side % 2 == 0 or self.patch_side < 1:
            raise ValueError("patch_side must be odd and positive")
        if self.fusion not in ("film", "concat", "none"):
            raise ValueError(f"unknown fusion mode '{self.fusion}'")
        if self.gradient_target not in ("vector", "magnitude"):
            raise ValueError(f"unknown gradient target '{self.gradient_target}'")

    @property
    def head_width(self) -> int:
        return 6 if self.gradient_target == "vector" else 4

    @property
    def mlp_input_dim(self) -> int:
        d = self.grid.output_dim
        return d + self.struct_width if self.fusion == "concat" else d

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        d = dict(d)
        d["grid"] = HashGridConfig(**d["grid"])
        return ModelConfig(**d)


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings (Adam, full-shuffle epochs)."""

    learning_rate: float = 1e-4
    epochs: int = 100
    batch_size: int = 65536
    lambda_grad: float = 1.0
    lambda_stat: float = 0.5
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    dtype: str = "float32"

    def __post_init__(self):
        if self.learning_rate < 0 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError("learning_rate/epochs/batch_size out of range")
        if self.lambda_grad < 0 or self.lambda_stat < 0:
            raise ValueError("loss weights must be >= 0")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        return TrainConfig(**d)
