"""Prediction maps to instances: candidate extraction, polygon NMS, instance
rendering, and pyramid-weighted tile blending."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageError, InvalidParameterError, ShapeMismatchError
from .geometry import (PixelMask, RayFan, StarPolygon, mask_intersection_area,
                       rasterize_polygon, rasterize_polygon_unclipped)


@dataclass(eq=False)
class PredictionMaps:
    """The three per-pixel model outputs.

    ``prob`` is the object probability (H, W); ``dist`` holds the radial
    distances (H, W, n_rays); ``type_scores`` the per-class scores
    (H, W, n_classes) with background as class 0.  Scores need not be
    normalized; only argmax ordering matters downstream.
    """

    prob: np.ndarray
    dist: np.ndarray
    type_scores: np.ndarray

    def __post_init__(self):
        if self.prob.ndim != 2 or self.dist.ndim != 3 or self.type_scores.ndim != 3:
            raise ShapeMismatchError(
                f"expected prob (H,W), dist (H,W,R), type_scores (H,W,C); got "
                f"{self.prob.shape}, {self.dist.shape}, {self.type_scores.shape}")
        if (self.dist.shape[:2] != self.prob.shape
                or self.type_scores.shape[:2] != self.prob.shape):
            raise ShapeMismatchError(
                f"maps disagree on image size: prob {self.prob.shape}, "
                f"dist {self.dist.shape[:2]}, type {self.type_scores.shape[:2]}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.prob.shape

    @property
    def n_rays(self) -> int:
        return self.dist.shape[2]

    @property
    def n_classes(self) -> int:
        return self.type_scores.shape[2]


@dataclass
class InstanceRecord:
    score: float
    class_id: int


@dataclass(eq=False)
class InstanceMap:
    """Rendered instances: a label grid plus one record per id (1-based)."""

    labels: np.ndarray
    records: list[InstanceRecord] = field(default_factory=list)

    @property
    def n_instances(self) -> int:
        return len(self.records)

    def record_for(self, inst_id: int) -> InstanceRecord:
        return self.records[inst_id - 1]


def extract_candidates(maps: PredictionMaps, fan: RayFan,
                       prob_threshold: float, stride: int = 1) -> list[StarPolygon]:
    """One candidate polygon per above-threshold pixel.

    Candidates come back sorted by descending score with ties broken by
    row-major center position.  ``stride`` optionally subsamples the pixel
    grid for very large images (default 1: every pixel).
    """
    if not 0.0 <= prob_threshold <= 1.0:
        raise InvalidParameterError(
            f"prob_threshold must be in [0, 1], got {prob_threshold}")
    if stride < 1:
        raise InvalidParameterError(f"stride must be >= 1, got {stride}")
    if maps.dist.shape[2] != fan.n_rays:
        raise ShapeMismatchError(
            f"dist maps carry {maps.dist.shape[2]} rays but the fan has {fan.n_rays}")
    if maps.n_classes < 2:
        raise InvalidParameterError("type_scores needs background plus at "
                                    "least one foreground class")

    prob = maps.prob
    keep = prob >= prob_threshold
    if stride > 1:
        sub = np.zeros_like(keep)
        sub[::stride, ::stride] = True
        keep &= sub
    rows, cols = np.nonzero(keep)
    if rows.size == 0:
        return []
    scores = prob[rows, cols].astype(np.float64)
    order = np.lexsort((cols, rows, -scores))
    rows, cols, scores = rows[order], cols[order], scores[order]
    class_ids = np.argmax(maps.type_scores[rows, cols, 1:], axis=1) + 1
    radii = np.maximum(maps.dist[rows, cols, :].astype(np.float64), 0.0)
    return [StarPolygon(center=(int(r), int(c)), radii=radii[i],
                        score=float(scores[i]), class_id=int(class_ids[i]))
            for i, (r, c) in enumerate(zip(rows, cols))]


def nms(candidates: list[StarPolygon], fan: RayFan,
        iou_threshold: float) -> list[StarPolygon]:
    """Greedy score-ordered suppression.

    A candidate is kept iff its polygon IoU with every already-kept polygon
    is <= ``iou_threshold``.  Input must already be sorted as produced by
    :func:`extract_candidates`; the scan order defines the result.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise InvalidParameterError(
            f"iou_threshold must be in [0, 1], got {iou_threshold}")
    kept: list[StarPolygon] = []
    kept_masks: list[PixelMask] = []
    kept_rows: list[float] = []
    kept_cols: list[float] = []
    kept_reach: list[float] = []
    for cand in candidates:
        reach = float(cand.radii.max()) if cand.radii.size else 0.0
        cand_mask = None
        suppressed = False
        if kept:
            # Polygons live inside the disk spanned by their largest radius,
            # so centers farther apart than the two reaches cannot overlap.
            dr = np.asarray(kept_rows) - cand.center[0]
            dc = np.asarray(kept_cols) - cand.center[1]
            near = np.flatnonzero(np.hypot(dr, dc) <= np.asarray(kept_reach) + reach)
            for idx in near:
                if cand_mask is None:
                    cand_mask = rasterize_polygon_unclipped(cand, fan)
                inter = mask_intersection_area(cand_mask, kept_masks[idx])
                union = cand_mask.area + kept_masks[idx].area - inter
                iou = inter / union if union else 0.0
                if iou > iou_threshold:
                    suppressed = True
                    break
        if suppressed:
            continue
        if cand_mask is None:
            cand_mask = rasterize_polygon_unclipped(cand, fan)
        kept.append(cand)
        kept_masks.append(cand_mask)
        kept_rows.append(cand.center[0])
        kept_cols.append(cand.center[1])
        kept_reach.append(reach)
    return kept


def render_instance_map(kept: list[StarPolygon], fan: RayFan,
                        shape: tuple[int, int]) -> InstanceMap:
    """Paint kept polygons into a label grid, ids 1..K in kept order.

    Contested pixels go to the earliest kept polygon covering them, which by
    the NMS ordering is the highest-scoring one.
    """
    labels = np.zeros(shape, dtype=np.int32)
    records = []
    for idx, poly in enumerate(kept):
        records.append(InstanceRecord(score=poly.score, class_id=poly.class_id))
        mask = rasterize_polygon(poly, fan, shape)
        if mask.is_empty:
            continue
        window = labels[mask.row0:mask.row0 + mask.height,
                        mask.col0:mask.col0 + mask.width]
        window[mask.bits & (window == 0)] = idx + 1
    return InstanceMap(labels=labels, records=records)


@dataclass(frozen=True)
class TileLayout:
    """Sliding-window tiling; offsets are (row, col) of each tile's corner."""

    tile_h: int
    tile_w: int
    stride: int
    offsets: tuple[tuple[int, int], ...]


def make_tile_layout(image_h: int, image_w: int, tile_h: int, tile_w: int,
                     stride: int) -> TileLayout:
    """Cover an image with tiles at the given stride; the final row/column of
    tiles is pushed flush with the image edge."""
    if tile_h < 1 or tile_w < 1 or stride < 1:
        raise InvalidParameterError(
            f"tile dims and stride must be >= 1, got {tile_h}x{tile_w}, stride {stride}")
    if stride > min(tile_h, tile_w):
        raise InvalidParameterError(
            f"stride {stride} exceeds tile size {tile_h}x{tile_w}")
    if tile_h > image_h or tile_w > image_w:
        raise InvalidParameterError(
            f"tile {tile_h}x{tile_w} larger than image {image_h}x{image_w}")

    def starts(image_len: int, tile_len: int) -> list[int]:
        vals = list(range(0, image_len - tile_len + 1, stride))
        if vals[-1] != image_len - tile_len:
            vals.append(image_len - tile_len)
        return vals

    offsets = tuple((r, c) for r in starts(image_h, tile_h)
                    for c in starts(image_w, tile_w))
    return TileLayout(tile_h=tile_h, tile_w=tile_w, stride=stride, offsets=offsets)


def pyramid_weight_map(tile_h: int, tile_w: int, floor: float) -> np.ndarray:
    """Separable tent weights peaking at 1 in the tile center, clamped below
    by ``floor`` so every pixel keeps positive weight."""
    if tile_h < 1 or tile_w < 1:
        raise InvalidParameterError(
            f"tile dims must be >= 1, got {tile_h}x{tile_w}")
    if not 0.0 < floor <= 1.0:
        raise InvalidParameterError(f"floor must be in (0, 1], got {floor}")

    def tri(n: int) -> np.ndarray:
        if n == 1:
            return np.ones(1)
        i = np.arange(n, dtype=np.float64)
        return 1.0 - np.abs(2.0 * i - (n - 1)) / (n - 1)

    return np.maximum(floor, np.outer(tri(tile_h), tri(tile_w)))


def blend_tiles(tiles: list[tuple[tuple[int, int], PredictionMaps]],
                layout: TileLayout, full_shape: tuple[int, int],
                floor: float = 0.01) -> PredictionMaps:
    """Blend overlapping tile predictions with pyramid weights.

    Pixels covered by exactly one tile copy that tile's values bit-for-bit;
    overlap regions take the weighted average.  Raises ``CoverageError``
    naming the first uncovered pixel if the tiles do not cover the image.
    """
    if not tiles:
        raise CoverageError("no tiles given; pixel (0, 0) is uncovered")
    valid_offsets = set(layout.offsets)
    first = tiles[0][1]
    n_rays, n_classes = first.n_rays, first.n_classes
    h, w = full_shape
    wsum = np.zeros((h, w), dtype=np.float64)
    acc_prob = np.zeros((h, w), dtype=np.float64)
    acc_dist = np.zeros((h, w, n_rays), dtype=np.float64)
    acc_type = np.zeros((h, w, n_classes), dtype=np.float64)
    count = np.zeros((h, w), dtype=np.int32)
    weights = pyramid_weight_map(layout.tile_h, layout.tile_w, floor)

    # Canonical processing order makes the float accumulation independent of
    # the order tiles were handed in.
    ordered = sorted(tiles, key=lambda item: item[0])
    for offset, maps in ordered:
        if offset not in valid_offsets:
            raise InvalidParameterError(f"tile offset {offset} not in layout")
        if maps.shape != (layout.tile_h, layout.tile_w):
            raise ShapeMismatchError(
                f"tile at {offset} has shape {maps.shape}, layout expects "
                f"{(layout.tile_h, layout.tile_w)}")
        r0, c0 = offset
        sl = (slice(r0, r0 + layout.tile_h), slice(c0, c0 + layout.tile_w))
        wsum[sl] += weights
        count[sl] += 1
        acc_prob[sl] += weights * maps.prob
        acc_dist[sl] += weights[:, :, None] * maps.dist
        acc_type[sl] += weights[:, :, None] * maps.type_scores

    if (count == 0).any():
        r, c = np.argwhere(count == 0)[0]
        raise CoverageError(f"pixel ({r}, {c}) is covered by no tile")

    out_prob = acc_prob / wsum
    out_dist = acc_dist / wsum[:, :, None]
    out_type = acc_type / wsum[:, :, None]
    # Exactness where a single tile covers: copy values straight through.
    single = count == 1
    if single.any():
        for offset, maps in ordered:
            r0, c0 = offset
            sl = (slice(r0, r0 + layout.tile_h), slice(c0, c0 + layout.tile_w))
            lone = single[sl]
            out_prob[sl][lone] = maps.prob[lone]
            out_dist[sl][lone] = maps.dist[lone]
            out_type[sl][lone] = maps.type_scores[lone]
    return PredictionMaps(prob=out_prob, dist=out_dist, type_scores=out_type)
