"""Independent brute-force oracles used across the test suite.

These deliberately re-derive results by the most literal method available
(exhaustive scans, permutation enumeration, fine-step marching) and never
call into the package's optimized paths for the quantity under test.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


# --- polygon rasterization -------------------------------------------------

def point_in_polygon(py: float, px: float, verts: list[tuple[float, float]]) -> bool:
    """Even-odd membership for a pixel center, on-edge inclusive."""
    inside = False
    n = len(verts)
    for k in range(n):
        ar, ac = verts[k]
        br, bc = verts[(k + 1) % n]
        cross = (br - ar) * (px - ac) - (bc - ac) * (py - ar)
        if cross == 0.0 and (min(ar, br) <= py <= max(ar, br)
                             and min(ac, bc) <= px <= max(ac, bc)):
            return True
        if (ar > py) != (br > py):
            x_int = ac + (py - ar) / (br - ar) * (bc - ac)
            if px < x_int:
                inside = not inside
    return inside


def rasterize_bruteforce(verts: list[tuple[float, float]],
                         clip: tuple[int, int]) -> set[tuple[int, int]]:
    """Scan every pixel of the clip region with the scalar even-odd test."""
    pixels = set()
    for r in range(clip[0]):
        for c in range(clip[1]):
            if point_in_polygon(float(r), float(c), verts):
                pixels.add((r, c))
    return pixels


# --- minimum enclosing circle ----------------------------------------------

def _circumcircle3(a, b, c):
    d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    if d == 0.0:
        return None
    aa = a[0] ** 2 + a[1] ** 2
    bb = b[0] ** 2 + b[1] ** 2
    cc = c[0] ** 2 + c[1] ** 2
    ur = (aa * (b[1] - c[1]) + bb * (c[1] - a[1]) + cc * (a[1] - b[1])) / d
    uc = (aa * (c[0] - b[0]) + bb * (a[0] - c[0]) + cc * (b[0] - a[0])) / d
    radius = max(math.hypot(ur - p[0], uc - p[1]) for p in (a, b, c))
    return ur, uc, radius


def mec_bruteforce(points) -> tuple[float, float, float]:
    """Smallest circle over all diameter pairs and circumcircle triples."""
    pts = [(float(r), float(c)) for r, c in points]
    arr = np.asarray(pts)
    if len(pts) == 1:
        return pts[0][0], pts[0][1], 0.0
    candidates = []
    for i, j in itertools.combinations(range(len(pts)), 2):
        cr = (pts[i][0] + pts[j][0]) / 2.0
        cc = (pts[i][1] + pts[j][1]) / 2.0
        radius = max(math.hypot(cr - pts[i][0], cc - pts[i][1]),
                     math.hypot(cr - pts[j][0], cc - pts[j][1]))
        candidates.append((cr, cc, radius))
    for i, j, k in itertools.combinations(range(len(pts)), 3):
        circ = _circumcircle3(pts[i], pts[j], pts[k])
        if circ is not None:
            candidates.append(circ)
    best = None
    for cr, cc, radius in candidates:
        dists = np.hypot(arr[:, 0] - cr, arr[:, 1] - cc)
        if dists.max() <= radius + 1e-10 * (1.0 + radius):
            if best is None or radius < best[2]:
                best = (cr, cc, radius)
    return best


# --- contours ----------------------------------------------------------------

def boundary_pixel_set(bits: np.ndarray) -> set[tuple[int, int]]:
    """Member pixels with at least one 4-neighbor outside the mask."""
    h, w = bits.shape
    out = set()
    for r in range(h):
        for c in range(w):
            if not bits[r, c]:
                continue
            for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                nr, nc = r + dr, c + dc
                if not (0 <= nr < h and 0 <= nc < w) or not bits[nr, nc]:
                    out.add((r, c))
                    break
    return out


def random_solid_blob(rng: np.random.Generator, size: int = 24) -> np.ndarray:
    """A random hole-free 8-connected blob: union of disks, holes filled."""
    from scipy import ndimage

    grid = np.zeros((size, size), dtype=bool)
    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(rng.integers(2, 6)):
        cr = rng.uniform(size * 0.25, size * 0.75)
        cc = rng.uniform(size * 0.25, size * 0.75)
        rad = rng.uniform(2.0, size * 0.22)
        grid |= (yy - cr) ** 2 + (xx - cc) ** 2 <= rad ** 2
    labeled, count = ndimage.label(grid, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        grid[size // 2, size // 2] = True
        return grid
    sizes = ndimage.sum_labels(grid, labeled, index=range(1, count + 1))
    grid = labeled == (1 + int(np.argmax(sizes)))
    return ndimage.binary_fill_holes(grid)


# --- star distances ----------------------------------------------------------

def star_distance_substep(labels: np.ndarray, row: int, col: int,
                          dir_row: float, dir_col: float,
                          step: float = 0.1) -> float:
    """Fine-step ray march: last distance whose rounded pixel keeps the label."""
    h, w = labels.shape
    target = labels[row, col]
    t = np.arange(step, math.hypot(h, w) + 1.0, step)
    rr = np.rint(row + t * dir_row).astype(np.int64)
    cc = np.rint(col + t * dir_col).astype(np.int64)
    in_bounds = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
    alive = np.zeros(t.size, dtype=bool)
    alive[in_bounds] = labels[rr[in_bounds], cc[in_bounds]] == target
    dead = np.flatnonzero(~alive)
    if dead.size == 0:
        return float(t[-1])
    if dead[0] == 0:
        return 0.0
    return float(t[dead[0] - 1])


# --- nearest-labeled-pixel expansion -----------------------------------------

def expand_labels_bruteforce(labels: np.ndarray, radius: float) -> np.ndarray:
    """Per background pixel: nearest labeled pixel (ties to lower label)."""
    out = labels.copy()
    lab_r, lab_c = np.nonzero(labels)
    if lab_r.size == 0:
        return out
    lab_v = labels[lab_r, lab_c]
    h, w = labels.shape
    for r in range(h):
        for c in range(w):
            if labels[r, c] != 0:
                continue
            d2 = (lab_r - r) ** 2 + (lab_c - c) ** 2
            best = d2.min()
            if math.sqrt(float(best)) <= radius:
                out[r, c] = lab_v[d2 == best].min()
    return out


# --- greedy NMS ----------------------------------------------------------------

def nms_bruteforce(order: list[int], iou_matrix: np.ndarray,
                   threshold: float) -> list[int]:
    """Greedy scan over a precomputed pairwise IoU matrix."""
    kept: list[int] = []
    for i in order:
        if all(iou_matrix[i, j] <= threshold for j in kept):
            kept.append(i)
    return kept


# --- instance matching ----------------------------------------------------------

def iou_matrix_bruteforce(pred: np.ndarray, gt: np.ndarray,
                          pred_ids: list[int], gt_ids: list[int]) -> np.ndarray:
    matrix = np.zeros((len(pred_ids), len(gt_ids)))
    for i, p in enumerate(pred_ids):
        pm = pred == p
        for j, g in enumerate(gt_ids):
            gm = gt == g
            inter = np.logical_and(pm, gm).sum()
            union = np.logical_or(pm, gm).sum()
            matrix[i, j] = inter / union if union else 0.0
    return matrix


def best_matching_bruteforce(iou: np.ndarray, tau: float):
    """Max-total-IoU one-to-one matching over pairs with IoU > tau, by
    enumerating every injective assignment."""
    n_pred, n_gt = iou.shape
    best_total = 0.0
    best_pairs: list[tuple[int, int]] = []
    smaller, larger = (n_pred, n_gt) if n_pred <= n_gt else (n_gt, n_pred)
    for chosen in itertools.permutations(range(larger), smaller):
        pairs = []
        total = 0.0
        for a, b in enumerate(chosen):
            i, j = (a, b) if n_pred <= n_gt else (b, a)
            if iou[i, j] > tau:
                pairs.append((i, j))
                total += iou[i, j]
        if total > best_total + 1e-15:
            best_total = total
            best_pairs = pairs
    return best_total, best_pairs


# --- 1-D Wasserstein ----------------------------------------------------------

def w2_quantile_discretized(a, b) -> float:
    """Midpoint quantile integral on n*m cells (aligned with all breakpoints)."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    n, m = a.size, b.size
    cells = n * m
    u = (np.arange(cells) + 0.5) / cells
    qa = a[np.minimum((u * n).astype(int), n - 1)]
    qb = b[np.minimum((u * m).astype(int), m - 1)]
    return float(math.sqrt(np.mean((qa - qb) ** 2)))


# --- pixel metrics ----------------------------------------------------------

def confusion_bruteforce(pred: np.ndarray, gt: np.ndarray,
                         n_classes: int) -> np.ndarray:
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    for g, p in zip(gt.ravel().tolist(), pred.ravel().tolist()):
        counts[g, p] += 1
    return counts


# --- object probability ----------------------------------------------------------

def nearest_other_label_bruteforce(labels: np.ndarray) -> np.ndarray:
    """Exhaustive per-pixel distance to the nearest not-same-label position,
    counting out-of-image positions just past the border as boundary."""
    h, w = labels.shape
    out = np.zeros((h, w), dtype=np.float64)
    for r in range(h):
        for c in range(w):
            lab = labels[r, c]
            if lab == 0:
                continue
            best = float("inf")
            # Border: nearest virtual outside pixel.
            best = min(best, r + 1, c + 1, h - r, w - c)
            for rr in range(h):
                for cc in range(w):
                    if labels[rr, cc] != lab:
                        best = min(best, math.hypot(rr - r, cc - c))
            out[r, c] = best
    return out
