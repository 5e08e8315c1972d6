"""Pixel-stratified dataset splitting.

Images are summarized by their per-class pixel fractions; a train/test split
is chosen to minimize the worst per-class 1-D L2-Wasserstein distance between
the two sides' fraction distributions.  Splitting by pixel distribution
rather than instance counts keeps rare-but-large classes balanced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import PelletClass
from .errors import EmptyInputError, InvalidParameterError

N_CLASSES = len(PelletClass)


@dataclass(eq=False)
class ImageStats:
    """Per-image summary used for splitting.

    ``fractions[c]`` is the share of all pixels carrying class c (background
    entry is 0 by construction).  Luminance statistics are in CIELAB L units
    and may be zero when no image content was available.
    """

    image_id: str
    fractions: np.ndarray
    lum_mean: float = 0.0
    lum_std: float = 0.0


@dataclass(eq=False)
class SplitAssignment:
    train_ids: list[str]
    test_ids: list[str]
    per_class_w2: dict[int, float]
    objective: float
    initial_objective: float

    def to_dict(self) -> dict:
        return {
            "train_ids": list(self.train_ids),
            "test_ids": list(self.test_ids),
            "per_class_w2": {PelletClass(c).name.lower(): v
                             for c, v in self.per_class_w2.items()},
            "objective": self.objective,
            "initial_objective": self.initial_objective,
        }


def class_pixel_fractions(classes: np.ndarray,
                          n_classes: int = N_CLASSES) -> np.ndarray:
    """Fraction of all pixels held by each non-background class.

    Returns an array indexed by class id; index 0 (background) is 0.
    """
    classes = np.asarray(classes)
    if classes.ndim != 2:
        raise InvalidParameterError(f"class map must be 2D, got {classes.shape}")
    counts = np.bincount(classes.ravel().astype(np.int64), minlength=n_classes)
    fractions = counts[:n_classes].astype(np.float64) / classes.size
    fractions[0] = 0.0
    return fractions


def wasserstein2_1d(a, b) -> float:
    """L2-Wasserstein distance between two empirical 1-D distributions.

    Computed exactly on the piecewise-constant quantile functions: both
    samples are sorted (the monotone rearrangement is the optimal transport
    map in 1-D) and the squared quantile difference is integrated over the
    merged breakpoint grid.  For equal sample sizes this reduces to the root
    mean squared difference of order statistics.
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise EmptyInputError("wasserstein2_1d needs non-empty samples")
    n, m = a.size, b.size
    if n == m:
        return float(math.sqrt(np.mean((a - b) ** 2)))
    # Quantile breakpoints of the two samples live at multiples of L/n and
    # L/m on a common integer grid of length L = lcm(n, m); integer midpoint
    # indexing keeps segment lookup exact.
    common = math.lcm(n, m)
    ticks = np.union1d(np.arange(0, common + 1, common // n),
                       np.arange(0, common + 1, common // m))
    seg = np.diff(ticks)
    mid2 = ticks[:-1] + ticks[1:]
    ia = (mid2 * n) // (2 * common)
    ib = (mid2 * m) // (2 * common)
    w2_sq = float(np.sum((a[ia] - b[ib]) ** 2 * seg) / common)
    return math.sqrt(w2_sq)


def split_objective(fractions: np.ndarray, test_mask: np.ndarray) -> float:
    """Worst-class W2 between train-side and test-side fraction samples."""
    worst = 0.0
    for c in range(1, fractions.shape[1]):
        worst = max(worst, wasserstein2_1d(fractions[~test_mask, c],
                                           fractions[test_mask, c]))
    return worst


def test_set_size(n_images: int, test_fraction: float) -> int:
    """Number of test images for a requested fraction (>=1 on each side)."""
    return min(max(round(n_images * test_fraction), 1), n_images - 1)


def split_dataset(stats: list[ImageStats], test_fraction: float = 0.2,
                  restarts: int = 16, seed: int = 0) -> SplitAssignment:
    """Stratify images into train/test by worst-class Wasserstein distance.

    ``restarts`` random partitions at the requested test fraction are each
    refined by greedy pair swaps (the best improving swap, repeated until no
    swap lowers the objective); the best refined partition wins.  Fully
    deterministic given ``seed``.
    """
    n = len(stats)
    if n < 2:
        raise InvalidParameterError(f"need at least 2 images to split, got {n}")
    if not 0.0 < test_fraction < 1.0:
        raise InvalidParameterError(
            f"test_fraction must be in (0, 1), got {test_fraction}")
    if restarts < 1:
        raise InvalidParameterError(f"restarts must be >= 1, got {restarts}")
    k = test_set_size(n, test_fraction)
    fractions = np.stack([s.fractions for s in stats])
    rng = np.random.default_rng(seed)

    best_mask = None
    best_obj = math.inf
    best_initial = math.inf
    for _ in range(restarts):
        mask = np.zeros(n, dtype=bool)
        mask[rng.permutation(n)[:k]] = True
        initial = split_objective(fractions, mask)
        obj = _greedy_refine(fractions, mask, initial)
        if obj < best_obj:
            best_obj = obj
            best_mask = mask
            best_initial = initial

    per_class = {c: wasserstein2_1d(fractions[~best_mask, c],
                                    fractions[best_mask, c])
                 for c in range(1, fractions.shape[1])}
    ids = [s.image_id for s in stats]
    return SplitAssignment(
        train_ids=[ids[i] for i in range(n) if not best_mask[i]],
        test_ids=[ids[i] for i in range(n) if best_mask[i]],
        per_class_w2=per_class, objective=best_obj,
        initial_objective=best_initial)


def _greedy_refine(fractions: np.ndarray, mask: np.ndarray,
                   current: float) -> float:
    """Steepest-descent pair swaps, in place on ``mask``."""
    while True:
        train_idx = np.flatnonzero(~mask)
        test_idx = np.flatnonzero(mask)
        best_delta_obj = current
        best_swap = None
        for i in train_idx:
            for j in test_idx:
                mask[i] = True
                mask[j] = False
                obj = split_objective(fractions, mask)
                mask[i] = False
                mask[j] = True
                if obj < best_delta_obj:
                    best_delta_obj = obj
                    best_swap = (i, j)
        if best_swap is None:
            return current
        i, j = best_swap
        mask[i] = True
        mask[j] = False
        current = best_delta_obj
