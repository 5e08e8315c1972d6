"""Numba kernels for the dense-grid hot paths.

Everything here is a plain function of arrays; the public modules wrap these
with validation and typed containers.  Compiled code is cached on disk so the
JIT cost is paid once per machine, not once per process.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def rasterize_evenodd(vert_rows, vert_cols, row0, col0, height, width):
    """Even-odd rasterization of a closed polygon onto pixel centers.

    A pixel belongs when its integer-coordinate center is strictly inside the
    polygon under the even-odd rule, or lies exactly on an edge (inclusive
    boundary).  Degenerate zero-length edges contribute nothing to the
    crossing count, so an all-vertices-coincident polygon still marks the
    pixel sitting exactly on it.
    """
    n = vert_rows.shape[0]
    out = np.zeros((height, width), dtype=np.bool_)
    for i in range(height):
        py = float(row0 + i)
        for j in range(width):
            px = float(col0 + j)
            inside = False
            on_edge = False
            for k in range(n):
                ar = vert_rows[k]
                ac = vert_cols[k]
                kk = k + 1
                if kk == n:
                    kk = 0
                br = vert_rows[kk]
                bc = vert_cols[kk]
                cross = (br - ar) * (px - ac) - (bc - ac) * (py - ar)
                if cross == 0.0:
                    lo_r = ar if ar < br else br
                    hi_r = ar if ar > br else br
                    lo_c = ac if ac < bc else bc
                    hi_c = ac if ac > bc else bc
                    if lo_r <= py <= hi_r and lo_c <= px <= hi_c:
                        on_edge = True
                        break
                if (ar > py) != (br > py):
                    x_int = ac + (py - ar) / (br - ar) * (bc - ac)
                    if px < x_int:
                        inside = not inside
            out[i, j] = inside or on_edge
    return out


@njit(cache=True)
def march_star_distances(labels, fg_rows, fg_cols, fg_labels,
                         dir_rows, dir_cols, max_steps, out):
    """Integer-step ray marching from each foreground pixel.

    For pixel i and ray k, steps of 1.0 px are taken along the ray; the
    visited pixel is the nearest-integer rounding of the real position.  The
    recorded value is the distance of the last step whose visited pixel is in
    bounds and carries the same label as the start pixel.
    """
    height, width = labels.shape
    n_pix = fg_rows.shape[0]
    n_rays = dir_rows.shape[0]
    for k in range(n_rays):
        dr = dir_rows[k]
        dc = dir_cols[k]
        for i in range(n_pix):
            r0 = float(fg_rows[i])
            c0 = float(fg_cols[i])
            lab = fg_labels[i]
            dist = 0.0
            for t in range(1, max_steps + 1):
                rr = int(round(r0 + t * dr))
                cc = int(round(c0 + t * dc))
                if rr < 0 or rr >= height or cc < 0 or cc >= width:
                    break
                if labels[rr, cc] != lab:
                    break
                dist = float(t)
            out[i, k] = dist
