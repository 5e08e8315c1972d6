"""Training/evaluation targets derived from ground-truth label maps.

A label map is a 2D integer grid; 0 is background and each nonzero id is one
instance (ids need not be contiguous).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ._kernels import march_star_distances
from .errors import InvalidParameterError
from .geometry import RayFan


def _validate_labels(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise InvalidParameterError(f"label map must be 2D, got shape {labels.shape}")
    if labels.size and labels.min() < 0:
        raise InvalidParameterError("label map must be non-negative")
    return labels


def star_distances(labels: np.ndarray, fan: RayFan) -> np.ndarray:
    """Per-pixel radial distances to the instance boundary along each fan ray.

    From every foreground pixel, each ray is marched in 1.0 px steps with
    nearest-pixel membership tests; the recorded value is the distance of the
    last step whose visited pixel still shares the start pixel's label.
    Background pixels carry 0 for all rays.  Returns a float32 grid of shape
    (height, width, n_rays).
    """
    labels = _validate_labels(labels)
    h, w = labels.shape
    out = np.zeros((h, w, fan.n_rays), dtype=np.float32)
    fg_rows, fg_cols = np.nonzero(labels)
    if fg_rows.size == 0:
        return out
    labels64 = np.ascontiguousarray(labels, dtype=np.int64)
    fg_labels = labels64[fg_rows, fg_cols]
    max_steps = int(math.ceil(math.hypot(h, w))) + 1
    dists = np.zeros((fg_rows.size, fan.n_rays), dtype=np.float32)
    march_star_distances(labels64, fg_rows.astype(np.int64),
                         fg_cols.astype(np.int64), fg_labels,
                         fan.dir_rows, fan.dir_cols, max_steps, dists)
    out[fg_rows, fg_cols, :] = dists
    return out


def object_probability(labels: np.ndarray) -> np.ndarray:
    """Normalized distance-to-boundary map used as the object probability.

    For each foreground pixel: Euclidean distance to the nearest pixel not
    sharing its label (other instances, background, and the image border all
    count as boundary), divided by the maximum such distance within its
    instance.  Background is 0; each instance attains 1 somewhere.
    """
    labels = _validate_labels(labels)
    h, w = labels.shape
    out = np.zeros((h, w), dtype=np.float64)
    for inst_id, (r0, r1, c0, c1) in _instance_boxes(labels).items():
        # Work on the bbox plus a 1 px ring.  Ring pixels inside the image
        # carry their true labels (all != inst_id by bbox tightness); where
        # the ring would fall outside the image a False pad stands in, making
        # the border count as boundary.
        gr0, gc0 = max(r0 - 1, 0), max(c0 - 1, 0)
        gr1, gc1 = min(r1 + 2, h), min(c1 + 2, w)
        same = labels[gr0:gr1, gc0:gc1] == inst_id
        pad_t, pad_b = int(r0 == 0), int(r1 == h - 1)
        pad_l, pad_r = int(c0 == 0), int(c1 == w - 1)
        if pad_t or pad_b or pad_l or pad_r:
            padded = np.pad(same, ((pad_t, pad_b), (pad_l, pad_r)),
                            constant_values=False)
            dist = ndimage.distance_transform_edt(padded)
            dist = dist[pad_t:pad_t + same.shape[0], pad_l:pad_l + same.shape[1]]
        else:
            dist = ndimage.distance_transform_edt(same)
        peak = dist[same].max()
        out[gr0:gr1, gc0:gc1][same] = dist[same] / peak
    return out


def expand_labels(labels: np.ndarray, radius: float) -> np.ndarray:
    """Grow every instance into background by up to ``radius`` px without
    letting instances merge.

    A background pixel within ``radius`` (Euclidean) of at least one labeled
    pixel takes the label of the nearest one; exact distance ties go to the
    lower label id.  Originally labeled pixels are never changed.
    """
    labels = _validate_labels(labels)
    if radius < 0:
        raise InvalidParameterError(f"radius must be >= 0, got {radius}")
    out = labels.copy()
    if radius == 0:
        return out
    h, w = labels.shape
    pad = int(math.ceil(radius)) + 1
    best = np.full((h, w), np.inf, dtype=np.float64)
    background = labels == 0
    # Ascending id order + strict improvement implements the low-id tie rule:
    # squared pixel distances are integers, so equal distances compare equal
    # exactly and the first (lowest) id keeps the pixel.
    for inst_id, (r0, r1, c0, c1) in sorted(_instance_boxes(labels).items()):
        gr0, gc0 = max(r0 - pad, 0), max(c0 - pad, 0)
        gr1, gc1 = min(r1 + 1 + pad, h), min(c1 + 1 + pad, w)
        not_here = labels[gr0:gr1, gc0:gc1] != inst_id
        dist = ndimage.distance_transform_edt(not_here)
        window = (slice(gr0, gr1), slice(gc0, gc1))
        claim = (dist <= radius) & (dist < best[window]) & background[window]
        best[window][claim] = dist[claim]
        out[window][claim] = inst_id
    return out


def _instance_boxes(labels: np.ndarray) -> dict[int, tuple[int, int, int, int]]:
    """Tight bounding boxes (r0, r1, c0, c1) inclusive, keyed by instance id.

    Ids may be sparse; one pass over the foreground pixels handles that.
    """
    rows, cols = np.nonzero(labels)
    if rows.size == 0:
        return {}
    values = labels[rows, cols]
    order = np.argsort(values, kind="stable")
    values, rows, cols = values[order], rows[order], cols[order]
    cuts = np.flatnonzero(np.diff(values)) + 1
    starts = np.concatenate(([0], cuts))
    stops = np.concatenate((cuts, [values.size]))
    boxes = {}
    for s, e in zip(starts, stops):
        boxes[int(values[s])] = (int(rows[s:e].min()), int(rows[s:e].max()),
                                 int(cols[s:e].min()), int(cols[s:e].max()))
    return boxes
