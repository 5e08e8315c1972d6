"""Seeded synthetic pellet scenes for end-to-end testing.

Objects are smooth star-convex blobs (a base radius modulated by a few
low-order harmonics, total amplitude capped at 30% so every blob stays
star-convex about its center), placed by rejection sampling so that no two
masks come within ``min_gap`` pixels of each other.  Everything is driven by
one ``numpy`` PCG64 generator, so identical seeds give bit-identical scenes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .analysis import PelletClass
from .errors import InvalidParameterError

MAX_ATTEMPTS_PER_OBJECT = 200
_HARMONICS = (2, 3)
MAX_PERTURBATION = 0.25
_STAR_CHECK_RAYS = 96

# Class tints for the rendered image, following the annotation colors.
_CLASS_TINT = {
    PelletClass.NICE: (70, 185, 90),
    PelletClass.UGLY: (205, 70, 65),
    PelletClass.BIG: (160, 80, 195),
    PelletClass.JOINT: (75, 100, 210),
}
_BACKGROUND_RGB = (24, 22, 26)

DEFAULT_CLASS_MIX = (0.7, 0.1, 0.1, 0.1)  # nice, ugly, big, joint


@dataclass(eq=False)
class SynthScene:
    labels: np.ndarray   # (H, W) int32 instance ids
    classes: np.ndarray  # (H, W) uint8 class ids
    image: np.ndarray    # (H, W, 3) uint8
    requested: int
    placed: int
    centers: list[tuple[int, int]]

    @property
    def complete(self) -> bool:
        return self.placed == self.requested


def synth_scene(seed: int, shape: tuple[int, int], n_objects: int,
                class_mix=DEFAULT_CLASS_MIX,
                radius_range: tuple[float, float] = (9.0, 16.0),
                min_gap: float = 3.0) -> SynthScene:
    """Generate a deterministic scene of non-overlapping star-convex blobs.

    If placement cannot finish within the attempt budget the scene comes back
    with fewer objects and ``complete`` False.
    """
    h, w = shape
    if h < 8 or w < 8:
        raise InvalidParameterError(f"scene shape too small: {shape}")
    if n_objects < 0:
        raise InvalidParameterError(f"n_objects must be >= 0, got {n_objects}")
    mix = np.asarray(class_mix, dtype=np.float64)
    if mix.size != len(PelletClass) - 1 or mix.min() < 0 or abs(mix.sum() - 1.0) > 1e-9:
        raise InvalidParameterError(
            "class_mix must be one probability per non-background class, summing to 1")
    r_lo, r_hi = radius_range
    if not 0 < r_lo <= r_hi:
        raise InvalidParameterError(f"radius range must be positive, got {radius_range}")
    if min_gap < 0:
        raise InvalidParameterError(f"min_gap must be >= 0, got {min_gap}")

    rng = np.random.default_rng(seed)
    labels = np.zeros((h, w), dtype=np.int32)
    classes = np.zeros((h, w), dtype=np.uint8)
    shading = np.zeros((h, w), dtype=np.float64)
    # Pixels within min_gap of any placed mask; candidates may not touch it.
    forbidden = np.zeros((h, w), dtype=bool)
    centers: list[tuple[int, int]] = []
    placed = 0
    gap_pad = int(math.ceil(min_gap))

    attempts_left = MAX_ATTEMPTS_PER_OBJECT * max(n_objects, 1)
    while placed < n_objects and attempts_left > 0:
        attempts_left -= 1
        base_r = rng.uniform(r_lo, r_hi)
        amps = rng.uniform(0.0, 1.0, size=len(_HARMONICS))
        total_amp = rng.uniform(0.15, 1.0) * MAX_PERTURBATION
        amps = amps / amps.sum() * total_amp
        phases = rng.uniform(0.0, 2.0 * math.pi, size=len(_HARMONICS))
        pellet_class = PelletClass(1 + int(rng.choice(4, p=mix)))

        margin = int(math.ceil(base_r * (1.0 + MAX_PERTURBATION))) + 1
        if h - 2 * margin <= 0 or w - 2 * margin <= 0:
            continue
        cr = int(rng.integers(margin, h - margin))
        cc = int(rng.integers(margin, w - margin))

        bits = _blob_mask(base_r, amps, phases, margin)
        if not _rays_exit_once(bits, margin):
            continue
        r0, c0 = cr - margin, cc - margin
        window = (slice(r0, r0 + bits.shape[0]), slice(c0, c0 + bits.shape[1]))
        if (forbidden[window] & bits).any() or (labels[window][bits] != 0).any():
            continue

        placed += 1
        labels[window][bits] = placed
        classes[window][bits] = int(pellet_class)
        shading[window][bits] = _sphere_shading(bits)[bits]
        centers.append((cr, cc))
        # Grow the keep-out zone: everything within min_gap of this mask.
        pr0 = max(r0 - gap_pad, 0)
        pc0 = max(c0 - gap_pad, 0)
        pr1 = min(r0 + bits.shape[0] + gap_pad, h)
        pc1 = min(c0 + bits.shape[1] + gap_pad, w)
        region = np.zeros((pr1 - pr0, pc1 - pc0), dtype=bool)
        region[r0 - pr0:r0 - pr0 + bits.shape[0],
               c0 - pc0:c0 - pc0 + bits.shape[1]] = bits
        dist = ndimage.distance_transform_edt(~region)
        forbidden[pr0:pr1, pc0:pc1] |= dist <= min_gap

    image = _render(labels, classes, shading, rng)
    return SynthScene(labels=labels, classes=classes, image=image,
                      requested=n_objects, placed=placed, centers=centers)


def _blob_mask(base_r: float, amps: np.ndarray, phases: np.ndarray,
               margin: int) -> np.ndarray:
    """Rasterize the radial function rho(theta) on a (2*margin+1)^2 grid
    centered on the blob; a pixel belongs iff its distance from the center is
    within rho at its angle."""
    span = np.arange(-margin, margin + 1, dtype=np.float64)
    dr = span[:, None]
    dc = span[None, :]
    radius = np.hypot(dr, dc)
    theta = np.arctan2(dr, dc)
    rho = np.full_like(theta, base_r)
    for amp, harmonic, phase in zip(amps, _HARMONICS, phases):
        rho += base_r * amp * np.cos(harmonic * theta + phase)
    return radius <= rho


def _rays_exit_once(bits: np.ndarray, margin: int) -> bool:
    """Check the blob is star-convex in the rounded-pixel sense: marching a
    dense fan of rays from the center, membership never turns back on after
    first leaving the mask.  Blobs failing this (boundary flicker from pixel
    rounding) are regenerated."""
    if not bits[margin, margin]:
        return False
    theta = np.arange(_STAR_CHECK_RAYS) * (2.0 * math.pi / _STAR_CHECK_RAYS)
    steps = np.arange(1, 2 * margin + 2, dtype=np.float64)
    rr = np.rint(margin + np.sin(theta)[:, None] * steps[None, :]).astype(np.int64)
    cc = np.rint(margin + np.cos(theta)[:, None] * steps[None, :]).astype(np.int64)
    inside_grid = ((rr >= 0) & (rr < bits.shape[0])
                   & (cc >= 0) & (cc < bits.shape[1]))
    member = np.zeros_like(inside_grid)
    member[inside_grid] = bits[rr[inside_grid], cc[inside_grid]]
    left = np.logical_not(member).cumsum(axis=1) > 0
    return not (member & left).any()


def _sphere_shading(bits: np.ndarray) -> np.ndarray:
    """Brightness factor in [0, 1] rising toward the blob interior."""
    dist = ndimage.distance_transform_edt(bits)
    peak = dist.max()
    if peak <= 0:
        return bits.astype(np.float64)
    return np.sqrt(dist / peak)


def _render(labels: np.ndarray, classes: np.ndarray, shading: np.ndarray,
            rng: np.random.Generator) -> np.ndarray:
    h, w = labels.shape
    image = np.empty((h, w, 3), dtype=np.float64)
    image[:] = _BACKGROUND_RGB
    noise = rng.normal(0.0, 2.0, size=(h, w, 1))
    image += noise
    fg = labels > 0
    for cls, tint in _CLASS_TINT.items():
        sel = classes == int(cls)
        if not sel.any():
            continue
        factor = 0.35 + 0.65 * shading[sel]
        image[sel] = np.asarray(tint, dtype=np.float64) * factor[:, None]
    image[fg] += rng.normal(0.0, 3.0, size=(int(fg.sum()), 3))
    return np.clip(np.rint(image), 0, 255).astype(np.uint8)
