"""Pipeline configuration: defaults, flat key=value files, and hashing."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .analysis import NAME_TO_CLASS, PelletClass
from .errors import FormatError, InvalidParameterError

TOOL_VERSION = "0.1.0"


@dataclass(frozen=True)
class PipelineConfig:
    n_rays: int = 32
    prob_threshold: float = 0.5
    nms_iou_threshold: float = 0.3
    match_tau: float = 0.5
    mm_per_px: float | None = None  # required for measurement
    expansion_radius_px: float = 2.0
    tile_h: int | None = None       # None: process the full image as one tile
    tile_w: int | None = None
    tile_stride: int | None = None
    pyramid_floor: float = 0.01
    w_dist: float = 1.0
    w_type: float = 1.0
    w_stardist: float = 0.5
    histogram_bins_mm: tuple[float, ...] = (8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0)
    measured_classes: tuple[str, ...] = ("nice",)
    extraction_stride: int = 1
    split_test_fraction: float = 0.2
    split_restarts: int = 16
    seed: int | None = None

    def validate(self) -> "PipelineConfig":
        if self.n_rays < 3:
            raise InvalidParameterError(f"n_rays must be >= 3, got {self.n_rays}")
        for name in ("prob_threshold", "nms_iou_threshold", "match_tau"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidParameterError(f"{name} must be in [0, 1], got {value}")
        if self.mm_per_px is not None and self.mm_per_px <= 0:
            raise InvalidParameterError(f"mm_per_px must be > 0, got {self.mm_per_px}")
        if self.expansion_radius_px < 0:
            raise InvalidParameterError("expansion_radius_px must be >= 0")
        if not 0.0 < self.pyramid_floor <= 1.0:
            raise InvalidParameterError("pyramid_floor must be in (0, 1]")
        if min(self.w_dist, self.w_type, self.w_stardist) < 0:
            raise InvalidParameterError("loss weights must be >= 0")
        if len(self.histogram_bins_mm) < 2 or any(
                nxt <= prev for prev, nxt in zip(self.histogram_bins_mm[:-1],
                                                 self.histogram_bins_mm[1:])):
            raise InvalidParameterError("histogram_bins_mm must be strictly increasing")
        for name in self.measured_classes:
            if name not in NAME_TO_CLASS or name == "background":
                raise InvalidParameterError(f"unknown measured class {name!r}")
        if self.extraction_stride < 1:
            raise InvalidParameterError("extraction_stride must be >= 1")
        if not 0.0 < self.split_test_fraction < 1.0:
            raise InvalidParameterError("split_test_fraction must be in (0, 1)")
        if self.split_restarts < 1:
            raise InvalidParameterError("split_restarts must be >= 1")
        return self

    def measured_class_set(self) -> set[PelletClass]:
        return {NAME_TO_CLASS[name] for name in self.measured_classes}

    def to_flat_dict(self) -> dict[str, str]:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                out[f.name] = ""
            elif isinstance(value, tuple):
                out[f.name] = ",".join(str(v) for v in value)
            else:
                out[f.name] = str(value)
        return out

    def config_hash(self) -> str:
        payload = "\n".join(f"{k}={v}" for k, v in sorted(self.to_flat_dict().items()))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def with_overrides(self, **overrides) -> "PipelineConfig":
        clean = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **clean).validate()


_INT_FIELDS = {"n_rays", "tile_h", "tile_w", "tile_stride", "extraction_stride",
               "split_restarts", "seed"}
_FLOAT_FIELDS = {"prob_threshold", "nms_iou_threshold", "match_tau", "mm_per_px",
                 "expansion_radius_px", "pyramid_floor", "w_dist", "w_type",
                 "w_stardist", "split_test_fraction"}
_OPTIONAL_FIELDS = {"mm_per_px", "tile_h", "tile_w", "tile_stride", "seed"}


def parse_config_values(text: str, source: str = "<config>") -> dict:
    """Parse a flat key=value config into a dict of typed values.

    Only keys present in the text appear in the result; '#' starts a comment.
    """
    known = {f.name for f in fields(PipelineConfig)}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise InvalidParameterError(f"{source}:{lineno}: unknown config key {key!r}")
        values[key] = _parse_value(key, value, f"{source}:{lineno}")
    return values


def parse_config_text(text: str, source: str = "<config>") -> PipelineConfig:
    return PipelineConfig(**parse_config_values(text, source)).validate()


def _parse_value(key: str, value: str, where: str):
    if value == "":
        if key in _OPTIONAL_FIELDS:
            return None
        raise FormatError(f"{where}: empty value for {key}")
    try:
        if key in _INT_FIELDS:
            return int(value)
        if key in _FLOAT_FIELDS:
            return float(value)
        if key == "histogram_bins_mm":
            return tuple(float(v) for v in value.split(","))
        if key == "measured_classes":
            return tuple(v.strip() for v in value.split(",") if v.strip())
    except ValueError as exc:
        raise FormatError(f"{where}: cannot parse {key}={value!r}: {exc}") from exc
    return value


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"config file not found: {path}")
    return parse_config_text(path.read_text(), source=str(path))


def load_config_values(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"config file not found: {path}")
    return parse_config_values(path.read_text(), source=str(path))
