"""Pure-Python kernel implementations.

Mirrors the compiled extension in crossview._kernels._core; used as the
fallback backend when the extension is unavailable and as the reference
for the parity tests. Same function names, same semantics, same results.
"""

import numpy as np

BACKEND = "pure"

# On-edge classification tolerance for half-plane clipping.
CLIP_EPS = 1e-9


def polygon_area(pts):
    """Shoelace area (absolute value) of a polygon given as an (k, 2) array."""
    pts = np.asarray(pts, dtype=np.float64)
    k = pts.shape[0]
    if k < 3:
        return 0.0
    acc = 0.0
    x1, y1 = pts[k - 1]
    for i in range(k):
        x2, y2 = pts[i]
        acc += x1 * y2 - x2 * y1
        x1, y1 = x2, y2
    return abs(acc) * 0.5


def _clip_axis(pts, axis, bound, keep_greater):
    # Sutherland-Hodgman step against one axis-aligned half-plane.
    out = []
    n = len(pts)
    if n == 0:
        return out
    prev = pts[-1]
    if keep_greater:
        prev_in = prev[axis] >= bound - CLIP_EPS
    else:
        prev_in = prev[axis] <= bound + CLIP_EPS
    for cur in pts:
        if keep_greater:
            cur_in = cur[axis] >= bound - CLIP_EPS
        else:
            cur_in = cur[axis] <= bound + CLIP_EPS
        if cur_in != prev_in:
            denom = cur[axis] - prev[axis]
            if denom != 0.0:
                t = (bound - prev[axis]) / denom
                out.append(
                    (
                        prev[0] + t * (cur[0] - prev[0]),
                        prev[1] + t * (cur[1] - prev[1]),
                    )
                )
        if cur_in:
            out.append(cur)
        prev = cur
        prev_in = cur_in
    return out


def quad_box_intersection_area(quad, box):
    """Area of quad clipped to an axis-aligned box.

    quad: (4, 2) vertex array, box: (x_min, y_min, x_max, y_max).
    """
    quad = np.asarray(quad, dtype=np.float64)
    x_min, y_min, x_max, y_max = (float(b) for b in box)
    pts = [(float(p[0]), float(p[1])) for p in quad]
    pts = _clip_axis(pts, 0, x_min, True)
    pts = _clip_axis(pts, 0, x_max, False)
    pts = _clip_axis(pts, 1, y_min, True)
    pts = _clip_axis(pts, 1, y_max, False)
    if len(pts) < 3:
        return 0.0
    return polygon_area(np.asarray(pts))


def intersection_matrix(quads, boxes):
    """Pairwise clipped-overlap areas: (c, 4, 2) quads x (a, 4) boxes -> (c, a)."""
    quads = np.asarray(quads, dtype=np.float64)
    boxes = np.asarray(boxes, dtype=np.float64)
    c = quads.shape[0]
    a = boxes.shape[0]
    out = np.zeros((c, a), dtype=np.float64)
    for i in range(c):
        for j in range(a):
            out[i, j] = quad_box_intersection_area(quads[i], boxes[j])
    return out


def solve_assignment(cost):
    """Minimum-cost maximum-cardinality bipartite assignment.

    cost: (n, m) float matrix, np.inf marks forbidden pairs. Returns
    (rows, cols) index arrays of matched pairs, sorted by row. Among
    matchings of maximum cardinality the total cost is minimal; ties are
    resolved deterministically (shortest augmenting paths, first-index
    argmin) but not in any documented order.
    """
    cost = np.array(cost, dtype=np.float64)
    n, m = cost.shape
    if n == 0 or m == 0:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp)
    transposed = n > m
    if transposed:
        cost = cost.T.copy()
        n, m = m, n
    finite = cost[np.isfinite(cost)]
    if finite.size == 0:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp)
    # Shift to non-negative entries so reduced costs stay valid for Dijkstra.
    # Constant shifts do not change the argmin within a cardinality class.
    lo = finite.min()
    if lo < 0.0:
        cost = np.where(np.isfinite(cost), cost - lo, np.inf)

    u = np.zeros(n)
    v = np.zeros(m)
    col4row = np.full(n, -1, dtype=np.intp)
    row4col = np.full(m, -1, dtype=np.intp)

    for cur_row in range(n):
        shortest = np.full(m, np.inf)
        path = np.full(m, -1, dtype=np.intp)
        done = np.zeros(m, dtype=bool)
        min_val = 0.0
        i = cur_row
        sink = -1
        while sink == -1:
            reduced = min_val + cost[i] - u[i] - v
            better = ~done & (reduced < shortest)
            shortest[better] = reduced[better]
            path[better] = i
            masked = np.where(done, np.inf, shortest)
            j = int(np.argmin(masked))
            lowest = masked[j]
            if lowest == np.inf:
                break  # row cannot be matched
            done[j] = True
            min_val = lowest
            if row4col[j] == -1:
                sink = j
            else:
                i = row4col[j]
        if sink == -1:
            continue
        u[cur_row] += min_val
        for j in np.flatnonzero(done):
            delta = min_val - shortest[j]
            r = row4col[j]
            if r != -1:
                u[r] += delta
            v[j] -= delta
        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur_row:
                break

    rows = np.flatnonzero(col4row >= 0)
    cols = col4row[rows]
    if transposed:
        order = np.argsort(cols, kind="stable")
        return cols[order], rows[order]
    return rows, cols
