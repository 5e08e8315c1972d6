"""Per-instance analysis: class vote, enclosing-circle sizing, size reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy import ndimage

from .errors import EmptyInputError, InvalidParameterError
from .geometry import Circle, PixelMask, min_enclosing_circle, trace_contour
from .postproc import InstanceMap

# A bounding circle built from fewer contour points than this is discarded;
# tiny fragments do not yield trustworthy sizes.
MIN_CONTOUR_POINTS = 8


class PelletClass(IntEnum):
    BACKGROUND = 0
    NICE = 1
    UGLY = 2
    BIG = 3
    JOINT = 4


# Annotation colors used in reports and the synthetic renderer.
CLASS_COLORS = {
    PelletClass.NICE: "green",
    PelletClass.UGLY: "red",
    PelletClass.BIG: "purple",
    PelletClass.JOINT: "blue",
}

CLASS_NAMES = {cls: cls.name.lower() for cls in PelletClass}
NAME_TO_CLASS = {name: cls for cls, name in CLASS_NAMES.items()}


@dataclass(eq=False)
class Instance:
    """A detected pellet with its class and (optional) physical size.

    The circle and diameters are absent exactly when the contour filter
    rejected the instance.
    """

    inst_id: int
    mask: PixelMask
    pellet_class: PelletClass
    contour: list[tuple[int, int]]
    score: float = 1.0
    circle: Circle | None = None
    diameter_px: float | None = None
    diameter_mm: float | None = None


def classify_instance(mask: PixelMask, type_scores: np.ndarray) -> PelletClass:
    """Majority vote of the per-pixel argmax class over the mask.

    Background never wins: pixels whose argmax is background cast no vote.
    Vote ties break toward the class with the larger score sum over the mask;
    if every pixel argmaxes to background, the non-background class with the
    largest score sum is returned.
    """
    if mask.is_empty:
        raise EmptyInputError("cannot classify an empty mask")
    rows, cols = mask.pixel_coords()
    scores = np.asarray(type_scores, dtype=np.float64)[rows, cols, :]
    n_classes = scores.shape[1]
    votes = np.bincount(np.argmax(scores, axis=1), minlength=n_classes)
    votes[0] = 0
    score_sums = scores.sum(axis=0)
    if votes.sum() == 0:
        return PelletClass(1 + int(np.argmax(score_sums[1:])))
    top = np.flatnonzero(votes == votes.max())
    if top.size == 1:
        return PelletClass(int(top[0]))
    # Tie: larger summed score wins; a residual exact tie goes to the lower id.
    return PelletClass(int(top[np.argmax(score_sums[top])]))


def measure_instance(mask: PixelMask, mm_per_px: float,
                     contour: list[tuple[int, int]] | None = None,
                     ) -> tuple[Circle, float] | None:
    """Bounding-circle size of one instance, or ``None`` when rejected.

    The contour is traced, deduplicated to distinct pixels, and dropped if it
    has fewer than 8 points; otherwise the minimum enclosing circle of the
    contour gives the diameter, converted to millimetres.  A pre-traced
    contour may be passed to avoid repeating the trace.
    """
    if mask.is_empty:
        raise EmptyInputError("cannot measure an empty mask")
    if mm_per_px <= 0:
        raise InvalidParameterError(f"mm_per_px must be > 0, got {mm_per_px}")
    if contour is None:
        contour = trace_contour(mask)
    contour_points = set(contour)
    if len(contour_points) < MIN_CONTOUR_POINTS:
        return None
    circle = min_enclosing_circle(sorted(contour_points))
    return circle, 2.0 * circle.radius * mm_per_px


@dataclass(eq=False)
class SizeReport:
    """Per-class size histograms plus bookkeeping counts.

    Histograms cover only the measured classes; ``counts`` tallies every
    instance regardless.  Diameters falling outside the bin range are tracked
    in ``underflow``/``overflow`` so histogram + under/overflow always equals
    the measured count.
    """

    bin_edges_mm: tuple[float, ...]
    histograms: dict[PelletClass, np.ndarray]
    counts: dict[PelletClass, int]
    measured_counts: dict[PelletClass, int]
    underflow: dict[PelletClass, int]
    overflow: dict[PelletClass, int]
    rejected_ids: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "bin_edges_mm": list(self.bin_edges_mm),
            "histograms": {CLASS_NAMES[c]: [int(v) for v in h]
                           for c, h in self.histograms.items()},
            "counts": {CLASS_NAMES[c]: n for c, n in self.counts.items()},
            "measured_counts": {CLASS_NAMES[c]: n
                                for c, n in self.measured_counts.items()},
            "underflow": {CLASS_NAMES[c]: n for c, n in self.underflow.items()},
            "overflow": {CLASS_NAMES[c]: n for c, n in self.overflow.items()},
            "rejected_ids": list(self.rejected_ids),
        }


def size_report(instances: list[Instance], bins_mm,
                measured_classes=frozenset({PelletClass.NICE})) -> SizeReport:
    """Histogram the measured diameters per class.

    Bins are half-open [lo, hi) with the final bin closed.  Only classes in
    ``measured_classes`` are sized; every instance is counted either way, and
    contour-filter rejections are listed by id.
    """
    edges = np.asarray(tuple(bins_mm), dtype=np.float64)
    if edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise InvalidParameterError(
            f"histogram bin edges must be strictly increasing, got {list(edges)}")
    measured = {PelletClass(c) for c in measured_classes}
    counts: dict[PelletClass, int] = {}
    histograms = {c: np.zeros(edges.size - 1, dtype=np.int64) for c in measured}
    measured_counts = {c: 0 for c in measured}
    underflow = {c: 0 for c in measured}
    overflow = {c: 0 for c in measured}
    rejected: list[int] = []
    for inst in instances:
        counts[inst.pellet_class] = counts.get(inst.pellet_class, 0) + 1
        if inst.diameter_mm is None:
            rejected.append(inst.inst_id)
            continue
        if inst.pellet_class not in measured:
            continue
        cls = inst.pellet_class
        measured_counts[cls] += 1
        d = inst.diameter_mm
        if d < edges[0]:
            underflow[cls] += 1
        elif d > edges[-1]:
            overflow[cls] += 1
        else:
            hist, _ = np.histogram([d], bins=edges)
            histograms[cls] += hist
    return SizeReport(bin_edges_mm=tuple(float(e) for e in edges),
                      histograms=histograms, counts=counts,
                      measured_counts=measured_counts,
                      underflow=underflow, overflow=overflow,
                      rejected_ids=rejected)


def analyze_instances(instance_map: InstanceMap, mm_per_px: float,
                      type_scores: np.ndarray | None = None) -> list[Instance]:
    """Build full ``Instance`` records from a rendered instance map.

    When ``type_scores`` is given, classes come from the per-mask majority
    vote; otherwise the class recorded at render time is used.
    """
    labels = instance_map.labels
    boxes = ndimage.find_objects(labels, max_label=instance_map.n_instances)
    out: list[Instance] = []
    for inst_id in range(1, instance_map.n_instances + 1):
        box = boxes[inst_id - 1]
        if box is None:
            continue
        bits = labels[box] == inst_id
        mask = PixelMask.from_bits(box[0].start, box[1].start, bits)
        record = instance_map.record_for(inst_id)
        if type_scores is not None:
            pellet_class = classify_instance(mask, type_scores)
        else:
            pellet_class = PelletClass(record.class_id)
        contour = trace_contour(mask)
        measured = measure_instance(mask, mm_per_px, contour=contour)
        inst = Instance(inst_id=inst_id, mask=mask, pellet_class=pellet_class,
                        contour=contour, score=record.score)
        if measured is not None:
            inst.circle, inst.diameter_mm = measured
            inst.diameter_px = 2.0 * inst.circle.radius
        out.append(inst)
    return out
