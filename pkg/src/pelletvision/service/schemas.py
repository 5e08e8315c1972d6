"""Pydantic request/response models for the pipeline service.

Requests carry file paths plus an optional bundle of config overrides; the
service resolves them over the package defaults and echoes the effective
configuration in every response.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from ..config import PipelineConfig


class ConfigOverrides(BaseModel):
    """Sparse overrides of :class:`PipelineConfig`; unset fields keep defaults."""

    n_rays: Optional[int] = None
    prob_threshold: Optional[float] = None
    nms_iou_threshold: Optional[float] = None
    match_tau: Optional[float] = None
    mm_per_px: Optional[float] = None
    expansion_radius_px: Optional[float] = None
    tile_h: Optional[int] = None
    tile_w: Optional[int] = None
    tile_stride: Optional[int] = None
    pyramid_floor: Optional[float] = None
    w_dist: Optional[float] = None
    w_type: Optional[float] = None
    w_stardist: Optional[float] = None
    histogram_bins_mm: Optional[list[float]] = None
    measured_classes: Optional[list[str]] = None
    extraction_stride: Optional[int] = None
    split_test_fraction: Optional[float] = None
    split_restarts: Optional[int] = None
    seed: Optional[int] = None

    def resolve(self) -> PipelineConfig:
        values = {k: v for k, v in self.model_dump().items() if v is not None}
        for key in ("histogram_bins_mm", "measured_classes"):
            if key in values:
                values[key] = tuple(values[key])
        return PipelineConfig().with_overrides(**values)


class Provenance(BaseModel):
    tool_version: str
    config_sha256: str
    inputs: list[str]


class SynthRequest(BaseModel):
    out_dir: str
    seed: int
    height: int = 1000
    width: int = 1000
    n_objects: int = 50
    class_mix: Optional[list[float]] = None
    radius_min: float = 9.0
    radius_max: float = 16.0
    min_gap: float = 3.0
    config: ConfigOverrides = Field(default_factory=ConfigOverrides)


class SynthResponse(BaseModel):
    seed: int
    requested: int
    placed: int
    complete: bool
    height: int
    width: int
    centers: list[list[int]]
    paths: dict[str, str]
    provenance: Provenance
    effective_config: dict[str, str]


class GenTargetsRequest(BaseModel):
    labels_path: str
    out_dir: str
    classes_path: Optional[str] = None
    expand: bool = False
    config: ConfigOverrides = Field(default_factory=ConfigOverrides)


class GenTargetsResponse(BaseModel):
    out_dir: str
    height: int
    width: int
    n_rays: int
    expanded: bool
    provenance: Provenance
    effective_config: dict[str, str]


class PostprocessRequest(BaseModel):
    out_dir: str
    maps_dir: Optional[str] = None
    tiles_manifest: Optional[str] = None
    image_height: Optional[int] = None
    image_width: Optional[int] = None
    reclassify: bool = True
    config: ConfigOverrides = Field(default_factory=ConfigOverrides)


class PostprocessResponse(BaseModel):
    n_candidates: int
    n_instances: int
    paths: dict[str, str]
    provenance: Provenance
    effective_config: dict[str, str]


class MeasureRequest(BaseModel):
    labels_path: str
    records_path: str
    out_dir: str
    config: ConfigOverrides = Field(default_factory=ConfigOverrides)


class MeasureResponse(BaseModel):
    size_report: dict
    paths: dict[str, str]
    provenance: Provenance
    effective_config: dict[str, str]


class EvaluateRequest(BaseModel):
    pred_path: str
    gt_path: str
    pred_classes_path: Optional[str] = None
    gt_classes_path: Optional[str] = None
    out_path: Optional[str] = None
    config: ConfigOverrides = Field(default_factory=ConfigOverrides)


class EvaluateResponse(BaseModel):
    tau: float
    match_report: dict
    pixel_metrics: dict
    mask_iou: float
    ugly_f1: Optional[float] = None
    paths: Optional[dict[str, str]] = None
    provenance: Provenance
    effective_config: dict[str, str]


class SplitRequest(BaseModel):
    out_manifest: str
    seed: int
    stats_csv: Optional[str] = None
    classes_dir: Optional[str] = None
    out_stats: Optional[str] = None
    config: ConfigOverrides = Field(default_factory=ConfigOverrides)


class SplitResponse(BaseModel):
    split: dict
    seed: int
    paths: dict[str, str]
    provenance: Provenance
    effective_config: dict[str, str]


class NormalizeRequest(BaseModel):
    inputs: list[str]
    out_dir: str
    ref_mean: Optional[float] = None
    ref_std: Optional[float] = None
    ref_image: Optional[str] = None
    jobs: int = 1
    config: ConfigOverrides = Field(default_factory=ConfigOverrides)


class NormalizeResponse(BaseModel):
    ref: dict[str, float]
    images: list[dict]
    provenance: Provenance
    effective_config: dict[str, str]


class HealthResponse(BaseModel):
    status: str
    tool_version: str
