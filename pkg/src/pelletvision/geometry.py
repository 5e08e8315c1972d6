"""Star-polygon primitives.

Conventions used throughout the package:

* Grids are indexed ``(row, col)`` with row increasing downward.
* Ray 0 points along +columns (image right); angles increase toward +rows,
  i.e. clockwise on screen.
* Rasterization uses the even-odd rule on integer pixel centers, with pixel
  centers exactly on an edge counting as inside.
"""

from __future__ import annotations

import math
import random
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ._kernels import rasterize_evenodd
from .errors import EmptyInputError, InvalidParameterError

# Fixed seed for the enclosing-circle shuffle: the result is unique anyway,
# but a deterministic order keeps outputs bit-identical across runs.
_MEC_SHUFFLE_SEED = 0x2A


@dataclass(frozen=True, eq=False)
class RayFan:
    """Evenly spaced ray directions around a center pixel."""

    n_rays: int
    angles: np.ndarray     # (n_rays,) radians, 2*pi*k/n_rays
    dir_rows: np.ndarray   # (n_rays,) sin(angle): row component
    dir_cols: np.ndarray   # (n_rays,) cos(angle): col component


@dataclass(eq=False)
class StarPolygon:
    """A star-convex polygon: center pixel plus one radius per fan ray."""

    center: tuple[int, int]
    radii: np.ndarray
    score: float = 1.0
    class_id: int = 0

    def vertices(self, fan: RayFan) -> tuple[np.ndarray, np.ndarray]:
        """Vertex coordinates (rows, cols) in fan-ray order."""
        rows = self.center[0] + self.radii * fan.dir_rows
        cols = self.center[1] + self.radii * fan.dir_cols
        return rows, cols


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float


@dataclass(eq=False)
class PixelMask:
    """A bit grid anchored at ``(row0, col0)``; the bounding box is tight."""

    row0: int
    col0: int
    bits: np.ndarray = field(repr=False)  # 2D bool

    @classmethod
    def empty(cls) -> "PixelMask":
        return cls(0, 0, np.zeros((0, 0), dtype=bool))

    @classmethod
    def from_bits(cls, row0: int, col0: int, bits: np.ndarray) -> "PixelMask":
        """Build a mask, cropping the grid to the tight bounding box."""
        rows_any = bits.any(axis=1)
        if not rows_any.any():
            return cls.empty()
        cols_any = bits.any(axis=0)
        r_lo, r_hi = np.flatnonzero(rows_any)[[0, -1]]
        c_lo, c_hi = np.flatnonzero(cols_any)[[0, -1]]
        return cls(row0 + int(r_lo), col0 + int(c_lo),
                   np.ascontiguousarray(bits[r_lo:r_hi + 1, c_lo:c_hi + 1]))

    @property
    def is_empty(self) -> bool:
        return self.bits.size == 0

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def area(self) -> int:
        return int(self.bits.sum())

    def pixel_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Absolute (rows, cols) of all member pixels."""
        rr, cc = np.nonzero(self.bits)
        return rr + self.row0, cc + self.col0

    def to_grid(self, shape: tuple[int, int]) -> np.ndarray:
        """Paint the mask into a full-size boolean grid (clipped)."""
        grid = np.zeros(shape, dtype=bool)
        if self.is_empty:
            return grid
        r_lo = max(self.row0, 0)
        c_lo = max(self.col0, 0)
        r_hi = min(self.row0 + self.height, shape[0])
        c_hi = min(self.col0 + self.width, shape[1])
        if r_lo < r_hi and c_lo < c_hi:
            grid[r_lo:r_hi, c_lo:c_hi] = self.bits[
                r_lo - self.row0:r_hi - self.row0,
                c_lo - self.col0:c_hi - self.col0]
        return grid


def ray_directions(n_rays: int) -> RayFan:
    """Build the fan of ``n_rays`` unit directions at angles 2*pi*k/n_rays.

    Directions on quadrant boundaries (multiples of 90 degrees) are computed
    exactly, so e.g. n_rays=4 yields (0,1),(1,0),(0,-1),(-1,0) bit-for-bit.
    """
    if n_rays < 3:
        raise InvalidParameterError(f"n_rays must be >= 3, got {n_rays}")
    angles = np.arange(n_rays, dtype=np.float64) * (2.0 * math.pi / n_rays)
    dir_rows = np.empty(n_rays, dtype=np.float64)
    dir_cols = np.empty(n_rays, dtype=np.float64)
    for k in range(n_rays):
        quadrant, rem = divmod(4 * k, n_rays)
        alpha = (math.pi / 2.0) * (rem / n_rays)
        s, c = math.sin(alpha), math.cos(alpha)
        if quadrant == 0:
            sin_t, cos_t = s, c
        elif quadrant == 1:
            sin_t, cos_t = c, -s
        elif quadrant == 2:
            sin_t, cos_t = -s, -c
        else:
            sin_t, cos_t = -c, s
        dir_rows[k] = sin_t + 0.0  # normalize -0.0
        dir_cols[k] = cos_t + 0.0
    return RayFan(n_rays=n_rays, angles=angles,
                  dir_rows=dir_rows, dir_cols=dir_cols)


def _vertex_pixel_range(rows: np.ndarray, cols: np.ndarray):
    """Integer pixel range [r_lo, r_hi] x [c_lo, c_hi] that can intersect
    the polygon whose vertices are given."""
    r_lo = math.ceil(float(rows.min()))
    r_hi = math.floor(float(rows.max()))
    c_lo = math.ceil(float(cols.min()))
    c_hi = math.floor(float(cols.max()))
    return r_lo, r_hi, c_lo, c_hi


def _rasterize(poly: StarPolygon, fan: RayFan,
               clip: tuple[int, int] | None) -> PixelMask:
    vr, vc = poly.vertices(fan)
    if not (np.all(np.isfinite(vr)) and np.all(np.isfinite(vc))):
        raise InvalidParameterError("polygon has non-finite vertices")
    r_lo, r_hi, c_lo, c_hi = _vertex_pixel_range(vr, vc)
    if clip is not None:
        r_lo = max(r_lo, 0)
        c_lo = max(c_lo, 0)
        r_hi = min(r_hi, clip[0] - 1)
        c_hi = min(c_hi, clip[1] - 1)
    if r_hi < r_lo or c_hi < c_lo:
        return PixelMask.empty()
    bits = rasterize_evenodd(vr, vc, r_lo, c_lo,
                             r_hi - r_lo + 1, c_hi - c_lo + 1)
    return PixelMask.from_bits(r_lo, c_lo, bits)


def rasterize_polygon(poly: StarPolygon, fan: RayFan,
                      clip: tuple[int, int]) -> PixelMask:
    """Rasterize a star polygon to the pixels whose centers it covers.

    ``clip`` is the (height, width) of the image; the mask is restricted to
    it.  A polygon with all radii zero covers exactly its center pixel.
    """
    if clip[0] <= 0 or clip[1] <= 0:
        raise InvalidParameterError(f"clip bounds must be positive, got {clip}")
    return _rasterize(poly, fan, clip)


def rasterize_polygon_unclipped(poly: StarPolygon, fan: RayFan) -> PixelMask:
    """Rasterize without image bounds (used by polygon IoU and NMS)."""
    return _rasterize(poly, fan, None)


def mask_intersection_area(a: PixelMask, b: PixelMask) -> int:
    """Number of pixels shared by two anchored masks."""
    if a.is_empty or b.is_empty:
        return 0
    r_lo = max(a.row0, b.row0)
    c_lo = max(a.col0, b.col0)
    r_hi = min(a.row0 + a.height, b.row0 + b.height)
    c_hi = min(a.col0 + a.width, b.col0 + b.width)
    if r_lo >= r_hi or c_lo >= c_hi:
        return 0
    sub_a = a.bits[r_lo - a.row0:r_hi - a.row0, c_lo - a.col0:c_hi - a.col0]
    sub_b = b.bits[r_lo - b.row0:r_hi - b.row0, c_lo - b.col0:c_hi - b.col0]
    return int(np.logical_and(sub_a, sub_b).sum())


def masks_iou(a: PixelMask, b: PixelMask) -> float:
    inter = mask_intersection_area(a, b)
    union = a.area + b.area - inter
    if union == 0:
        return 0.0
    return inter / union


def polygon_iou(a: StarPolygon, b: StarPolygon, fan: RayFan) -> float:
    """Pixel-level IoU of two star polygons (rasters unclipped by any image)."""
    return masks_iou(rasterize_polygon_unclipped(a, fan),
                     rasterize_polygon_unclipped(b, fan))


# Moore neighborhood in clockwise screen order starting from West.
_MOORE = ((0, -1), (-1, -1), (-1, 0), (-1, 1),
          (0, 1), (1, 1), (1, 0), (1, -1))


def trace_contour(mask: PixelMask) -> list[tuple[int, int]]:
    """Moore-neighbor boundary trace of a mask, clockwise.

    Starts at the top-most then left-most member pixel and returns one full
    closed cycle; the first pixel follows the last, so the start is not
    repeated at the end.  Pixels on one-pixel-wide necks appear once per
    traversal direction.  The mask is expected to be a single 8-connected
    component without holes; if several components are present only the one
    containing the start pixel is traced and a ``RuntimeWarning`` is emitted.
    """
    if mask.is_empty:
        raise EmptyInputError("cannot trace an empty mask")
    bits = mask.bits
    h, w = bits.shape

    rr, cc = np.nonzero(bits)
    start = (int(rr[0]), int(cc[0]))  # np.nonzero is row-major: topmost-leftmost

    if _count_components(bits) > 1:
        warnings.warn("mask has multiple 8-connected components; tracing the "
                      "one containing the top-left-most pixel", RuntimeWarning)

    def scan(cur: tuple[int, int], backtrack_dir: int):
        """First member pixel clockwise from the backtrack neighbor."""
        for step in range(1, 9):
            d = (backtrack_dir + step) % 8
            nr, nc = cur[0] + _MOORE[d][0], cur[1] + _MOORE[d][1]
            if 0 <= nr < h and 0 <= nc < w and bits[nr, nc]:
                return nr, nc, d
        return None

    contour = [start]
    cur = start
    backtrack_dir = 0  # the background pixel west of the start
    first_move = None
    max_steps = 4 * len(rr) + 8
    for _ in range(max_steps):
        move = scan(cur, backtrack_dir)
        if move is None:
            break  # isolated pixel
        if first_move is None:
            first_move = move
        elif cur == start and move == first_move:
            # Jacob's criterion: leaving the start the same way again means
            # the cycle is complete; drop the re-appended start.
            contour.pop()
            break
        nr, nc, d = move
        backtrack_dir = _entry_dir(cur, (nr, nc), d)
        cur = (nr, nc)
        contour.append(cur)
    else:
        raise RuntimeError("contour trace failed to close; mask is malformed")
    return [(r + mask.row0, c + mask.col0) for r, c in contour]


def _entry_dir(prev: tuple[int, int], cur: tuple[int, int], d: int) -> int:
    """Backtrack index for the next scan: the neighbor of ``cur`` examined
    immediately before ``cur`` was found from ``prev``."""
    pr = prev[0] + _MOORE[(d - 1) % 8][0]
    pc = prev[1] + _MOORE[(d - 1) % 8][1]
    return _MOORE.index((pr - cur[0], pc - cur[1]))


def _count_components(bits: np.ndarray) -> int:
    labeled, n = ndimage.label(bits, structure=np.ones((3, 3), dtype=int))
    return int(n)


def contour_is_boundary(mask: PixelMask, contour: list[tuple[int, int]]) -> bool:
    """True when every contour pixel is a member with a 4-neighbor outside."""
    bits = mask.bits
    h, w = bits.shape
    for r, c in contour:
        lr, lc = r - mask.row0, c - mask.col0
        if not (0 <= lr < h and 0 <= lc < w and bits[lr, lc]):
            return False
        exposed = False
        for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            nr, nc = lr + dr, lc + dc
            if not (0 <= nr < h and 0 <= nc < w) or not bits[nr, nc]:
                exposed = True
                break
        if not exposed:
            return False
    return True


def min_enclosing_circle(points) -> Circle:
    """Smallest circle containing all points, by randomized incremental build.

    Containment holds to within 1e-9 absolute on the radius; the circle is
    determined by at most three support points.
    """
    pts = [(float(r), float(c)) for r, c in points]
    if not pts:
        raise EmptyInputError("min_enclosing_circle needs at least one point")
    rng = random.Random(_MEC_SHUFFLE_SEED)
    rng.shuffle(pts)

    circle = (pts[0][0], pts[0][1], 0.0)
    for i, p in enumerate(pts):
        if not _in_circle(circle, p):
            circle = _circle_with_one(pts[:i + 1], p)
    return Circle(center=(circle[0], circle[1]), radius=circle[2])


_EPS_GROW = 1.0 + 1e-13


def _in_circle(circle, p) -> bool:
    return math.hypot(p[0] - circle[0], p[1] - circle[1]) <= circle[2] * _EPS_GROW


def _circle_with_one(pts, p):
    circle = (p[0], p[1], 0.0)
    for i, q in enumerate(pts):
        if not _in_circle(circle, q):
            if circle[2] == 0.0:
                circle = _diameter_circle(p, q)
            else:
                circle = _circle_with_two(pts[:i + 1], p, q)
    return circle


def _circle_with_two(pts, p, q):
    base = _diameter_circle(p, q)
    left = None
    right = None
    for s in pts:
        if _in_circle(base, s):
            continue
        side = _cross(p, q, s)
        circ = _circumcircle(p, q, s)
        if circ is None:
            continue
        center_side = _cross(p, q, (circ[0], circ[1]))
        if side > 0.0 and (left is None or center_side > _cross(p, q, (left[0], left[1]))):
            left = circ
        elif side < 0.0 and (right is None or center_side < _cross(p, q, (right[0], right[1]))):
            right = circ
    if left is None and right is None:
        return base
    if left is None:
        return right
    if right is None:
        return left
    return left if left[2] <= right[2] else right


def _diameter_circle(a, b):
    cr = (a[0] + b[0]) / 2.0
    cc = (a[1] + b[1]) / 2.0
    radius = max(math.hypot(cr - a[0], cc - a[1]),
                 math.hypot(cr - b[0], cc - b[1]))
    return (cr, cc, radius)


def _circumcircle(a, b, c):
    # Shift to the bbox midpoint for numerical stability.
    or_ = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2.0
    oc = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2.0
    ar, ac = a[0] - or_, a[1] - oc
    br, bc = b[0] - or_, b[1] - oc
    cr, cc = c[0] - or_, c[1] - oc
    d = 2.0 * (ar * (bc - cc) + br * (cc - ac) + cr * (ac - bc))
    if d == 0.0:
        return None
    r = or_ + ((ar * ar + ac * ac) * (bc - cc)
               + (br * br + bc * bc) * (cc - ac)
               + (cr * cr + cc * cc) * (ac - bc)) / d
    col = oc + ((ar * ar + ac * ac) * (cr - br)
                + (br * br + bc * bc) * (ar - cr)
                + (cr * cr + cc * cc) * (br - ar)) / d
    radius = max(math.hypot(r - a[0], col - a[1]),
                 math.hypot(r - b[0], col - b[1]),
                 math.hypot(r - c[0], col - c[1]))
    return (r, col, radius)


def _cross(o, a, b) -> float:
    return ((a[0] - o[0]) * (b[1] - o[1])
            - (a[1] - o[1]) * (b[0] - o[0]))
