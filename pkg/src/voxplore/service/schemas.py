"""Request/response documents for the HTTP API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class VolumeRegister(BaseModel):
    """Register a volume by file path, or upload raw data inline."""
    path: Optional[str] = None
    dims: Optional[list] = None
    dtype: Optional[str] = None
    spacing: Optional[list] = None
    data_b64: Optional[str] = None


class VolumeInfo(BaseModel):
    id: str
    dims: tuple
    spacing: tuple


class TrainRequest(BaseModel):
    epochs: int = Field(default=100, ge=0)
    batch_size: int = Field(default=65536, ge=1)
    learning_rate: float = Field(default=1e-4, gt=0)
    lambda_grad: float = Field(default=1.0, ge=0)
    lambda_stat: float = Field(default=0.5, ge=0)
    seed: int = 0
    levels: int = Field(default=8, ge=1)
    features_per_level: int = Field(default=2, ge=1)
    table_size: int = Field(default=1 << 16, ge=2)
    base_resolution: int = Field(default=16, ge=1)
    fusion: Literal["film", "concat", "none"] = "film"


class JobInfo(BaseModel):
    id: str
    kind: str
    state: Literal["idle", "running", "done", "failed"]
    progress: float
    epoch_losses: list
    error: Optional[str] = None
    started_at: Optional[float] = None
    finished_at: Optional[float] = None
    cache_hit: Optional[bool] = None


class SliceRef(BaseModel):
    axis: int = Field(ge=0, le=2)
    index: int


class ScribbleEntry(BaseModel):
    voxel: list
    cls: int = Field(alias="class", ge=0)
    stroke: int = 0
    slice: Optional[SliceRef] = None

    model_config = {"populate_by_name": True}


class ScribblePut(BaseModel):
    entries: list[ScribbleEntry]


class ScribbleAck(BaseModel):
    accepted: int
    per_class: dict
    conflicts: int


class ClassifyRequest(BaseModel):
    trees: int = Field(default=1000, ge=1)
    min_samples_split: int = Field(default=8, ge=2)
    seed: int = 0
    tau: float = Field(default=0.5, ge=0.0, le=1.0)


class ClassifyResponse(BaseModel):
    classes: list
    n_scribbles: int
    train_accuracy_per_class: dict
    tau: float


class CameraDoc(BaseModel):
    eye: Optional[list] = None
    look_at: Optional[list] = None
    up: list = [0.0, 0.0, 1.0]
    direction: Optional[list] = None
    radius_scale: float = 1.5
    fov_y_deg: float = Field(default=40.0, gt=0, lt=180)
    width: int = Field(default=256, ge=16, le=2048)
    height: int = Field(default=256, ge=16, le=2048)


class RenderRequest(BaseModel):
    camera: CameraDoc = CameraDoc()
    mode: Literal["probabilistic", "probability_intensity"] = "probability_intensity"
    step_size: float = Field(default=0.5, gt=0)


class ViewpointsRequest(BaseModel):
    k: int = Field(default=50, ge=1)
    m: int = Field(default=1800, ge=1)
    coverage: float = Field(default=0.95, gt=0, le=1.0)
    max_views: int = Field(default=8, ge=1)
    seed: int = 0
    thumbnails: bool = True
    thumb_size: int = Field(default=128, ge=16, le=1024)
