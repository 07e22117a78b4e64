# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: polygon clipping, overlap matrices, bipartite assignment.

Keep every arithmetic expression in the same order as _kernels.pure so both
backends return bitwise-identical results (the parity tests assert this).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

BACKEND = "compiled"

cdef double CLIP_EPS = 1e-9

# A quad clipped by one half-plane at most doubles its vertex count; four
# clips of a 4-gon therefore never exceed 64 vertices.
DEF MAX_VERTS = 64


cdef double _shoelace(double* xs, double* ys, int k) noexcept nogil:
    cdef double acc = 0.0
    cdef double x1, y1, x2, y2
    cdef int i
    if k < 3:
        return 0.0
    x1 = xs[k - 1]
    y1 = ys[k - 1]
    for i in range(k):
        x2 = xs[i]
        y2 = ys[i]
        acc += x1 * y2 - x2 * y1
        x1 = x2
        y1 = y2
    if acc < 0.0:
        acc = -acc
    return acc * 0.5


cdef int _clip_axis(double* in_x, double* in_y, int n,
                    double* out_x, double* out_y,
                    int axis, double bound, bint keep_greater) noexcept nogil:
    cdef int i, m = 0
    cdef double px, py, cx, cy, pa, ca, t, denom
    cdef bint p_in, c_in
    if n == 0:
        return 0
    px = in_x[n - 1]
    py = in_y[n - 1]
    pa = px if axis == 0 else py
    if keep_greater:
        p_in = pa >= bound - CLIP_EPS
    else:
        p_in = pa <= bound + CLIP_EPS
    for i in range(n):
        cx = in_x[i]
        cy = in_y[i]
        ca = cx if axis == 0 else cy
        if keep_greater:
            c_in = ca >= bound - CLIP_EPS
        else:
            c_in = ca <= bound + CLIP_EPS
        if c_in != p_in:
            denom = ca - pa
            if denom != 0.0:
                t = (bound - pa) / denom
                out_x[m] = px + t * (cx - px)
                out_y[m] = py + t * (cy - py)
                m += 1
        if c_in:
            out_x[m] = cx
            out_y[m] = cy
            m += 1
        px = cx
        py = cy
        pa = ca
        p_in = c_in
    return m


cdef double _quad_box_area(const double[:, :] quad,
                           double x_min, double y_min,
                           double x_max, double y_max) noexcept nogil:
    cdef double ax[MAX_VERTS]
    cdef double ay[MAX_VERTS]
    cdef double bx[MAX_VERTS]
    cdef double by[MAX_VERTS]
    cdef int i, n
    for i in range(4):
        ax[i] = quad[i, 0]
        ay[i] = quad[i, 1]
    n = _clip_axis(ax, ay, 4, bx, by, 0, x_min, True)
    n = _clip_axis(bx, by, n, ax, ay, 0, x_max, False)
    n = _clip_axis(ax, ay, n, bx, by, 1, y_min, True)
    n = _clip_axis(bx, by, n, ax, ay, 1, y_max, False)
    if n < 3:
        return 0.0
    return _shoelace(ax, ay, n)


def polygon_area(pts):
    """Shoelace area (absolute value) of a polygon given as an (k, 2) array."""
    cdef double[:, :] p = np.ascontiguousarray(pts, dtype=np.float64).reshape(-1, 2)
    cdef int k = p.shape[0]
    if k < 3:
        return 0.0
    return _shoelace_strided(p, k)


cdef double _shoelace_strided(double[:, :] p, int k) noexcept nogil:
    cdef double acc = 0.0
    cdef double x1, y1, x2, y2
    cdef int i
    x1 = p[k - 1, 0]
    y1 = p[k - 1, 1]
    for i in range(k):
        x2 = p[i, 0]
        y2 = p[i, 1]
        acc += x1 * y2 - x2 * y1
        x1 = x2
        y1 = y2
    if acc < 0.0:
        acc = -acc
    return acc * 0.5


def quad_box_intersection_area(quad, box):
    """Area of quad clipped to an axis-aligned box.

    quad: (4, 2) vertex array, box: (x_min, y_min, x_max, y_max).
    """
    cdef double[:, :] q = np.ascontiguousarray(quad, dtype=np.float64)
    b = np.ascontiguousarray(box, dtype=np.float64)
    cdef double[:] bv = b
    return _quad_box_area(q, bv[0], bv[1], bv[2], bv[3])


def intersection_matrix(quads, boxes):
    """Pairwise clipped-overlap areas: (c, 4, 2) quads x (a, 4) boxes -> (c, a)."""
    cdef double[:, :, :] q = np.ascontiguousarray(quads, dtype=np.float64).reshape(-1, 4, 2)
    cdef double[:, :] b = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    cdef int c = q.shape[0]
    cdef int a = b.shape[0]
    out_arr = np.zeros((c, a), dtype=np.float64)
    cdef double[:, :] out = out_arr
    cdef int i, j
    with nogil:
        for i in range(c):
            for j in range(a):
                out[i, j] = _quad_box_area(q[i], b[j, 0], b[j, 1], b[j, 2], b[j, 3])
    return out_arr


def solve_assignment(cost):
    """Minimum-cost maximum-cardinality bipartite assignment.

    Same contract as the pure backend: (n, m) float matrix with np.inf for
    forbidden pairs -> (rows, cols) matched index arrays sorted by row.
    """
    cdef cnp.ndarray[double, ndim=2] c_arr = np.array(cost, dtype=np.float64, order="C")
    cdef int n = c_arr.shape[0]
    cdef int m = c_arr.shape[1]
    if n == 0 or m == 0:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp)
    cdef bint transposed = n > m
    if transposed:
        c_arr = np.ascontiguousarray(c_arr.T)
        n, m = m, n
    finite = c_arr[np.isfinite(c_arr)]
    if finite.size == 0:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp)
    cdef double lo = finite.min()
    if lo < 0.0:
        c_arr = np.where(np.isfinite(c_arr), c_arr - lo, np.inf)
        c_arr = np.ascontiguousarray(c_arr)

    cdef double[:, :] C = c_arr
    u_arr = np.zeros(n, dtype=np.float64)
    v_arr = np.zeros(m, dtype=np.float64)
    col4row_arr = np.full(n, -1, dtype=np.intp)
    row4col_arr = np.full(m, -1, dtype=np.intp)
    shortest_arr = np.empty(m, dtype=np.float64)
    path_arr = np.empty(m, dtype=np.intp)
    done_arr = np.empty(m, dtype=np.uint8)
    cdef double[:] u = u_arr
    cdef double[:] v = v_arr
    cdef cnp.intp_t[:] col4row = col4row_arr
    cdef cnp.intp_t[:] row4col = row4col_arr
    cdef double[:] shortest = shortest_arr
    cdef cnp.intp_t[:] path = path_arr
    cdef cnp.uint8_t[:] done = done_arr

    cdef int cur_row, i, j, sink, best
    cdef double min_val, lowest, reduced, delta
    cdef cnp.intp_t r, tmp

    with nogil:
        for cur_row in range(n):
            for j in range(m):
                shortest[j] = INFINITY
                path[j] = -1
                done[j] = 0
            min_val = 0.0
            i = cur_row
            sink = -1
            while sink == -1:
                best = -1
                lowest = INFINITY
                for j in range(m):
                    if done[j]:
                        continue
                    reduced = min_val + C[i, j] - u[i] - v[j]
                    if reduced < shortest[j]:
                        shortest[j] = reduced
                        path[j] = i
                    if shortest[j] < lowest:
                        lowest = shortest[j]
                        best = j
                if best == -1 or lowest == INFINITY:
                    break
                j = best
                done[j] = 1
                min_val = lowest
                if row4col[j] == -1:
                    sink = j
                else:
                    i = row4col[j]
            if sink == -1:
                continue
            u[cur_row] += min_val
            for j in range(m):
                if not done[j]:
                    continue
                delta = min_val - shortest[j]
                r = row4col[j]
                if r != -1:
                    u[r] += delta
                v[j] -= delta
            j = sink
            while True:
                i = path[j]
                row4col[j] = i
                tmp = col4row[i]
                col4row[i] = j
                j = tmp
                if i == cur_row:
                    break

    rows = np.flatnonzero(col4row_arr >= 0)
    cols = col4row_arr[rows]
    if transposed:
        order = np.argsort(cols, kind="stable")
        return cols[order], rows[order]
    return rows, cols
