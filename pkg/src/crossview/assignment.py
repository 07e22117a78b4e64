"""Optimal bipartite assignment with deterministic tie-breaking.

hungarian() minimizes total cost over maximum-cardinality assignments that
respect a forbidden mask; among equal-cost optima it returns the
lexicographically smallest assignment set. The solver core lives in the
kernel backend; this wrapper adds the mask handling, connected-component
decomposition (gated tracking matrices are nearly diagonal, so components
are tiny) and the exact tie-break refinement.
"""

import math

import numpy as np

from . import _kernels


def _component_pairs(work, row_ids, col_ids):
    """Lexicographically smallest min-cost max-cardinality pairs of one component."""
    rows = list(row_ids)
    cols = list(col_ids)
    if len(rows) == 1 and len(cols) == 1:
        return [(rows[0], cols[0])]
    if len(rows) == 1:
        r = rows[0]
        vals = work[r, cols]
        return [(r, cols[int(np.argmin(vals))])]
    if len(cols) == 1:
        c = cols[0]
        vals = work[rows, c]
        return [(rows[int(np.argmin(vals))], c)]

    sub = work[np.ix_(rows, cols)]
    rr, cc = _kernels.solve_assignment(sub)
    k_opt = len(rr)
    if k_opt == 0:
        return []
    v_opt = math.fsum(sub[rr, cc].tolist())

    # Fix pairs row by row, smallest column first; a candidate stands when an
    # optimal completion (same cardinality, fsum-equal cost) still exists.
    chosen = []
    chosen_vals = []
    avail = list(range(len(cols)))
    need = k_opt
    for pos in range(len(rows)):
        if need == 0:
            break
        rest = rows[pos + 1 :]
        rest_idx = list(range(pos + 1, len(rows)))
        for ci in avail:
            val = sub[pos, ci]
            if not np.isfinite(val):
                continue
            rem_cols = [c for c in avail if c != ci]
            if rest_idx and rem_cols:
                sub2 = sub[np.ix_(rest_idx, rem_cols)]
                rr2, cc2 = _kernels.solve_assignment(sub2)
                tail = sub2[rr2, cc2].tolist()
            else:
                tail = []
            if len(tail) != need - 1:
                continue
            if math.fsum(chosen_vals + [val] + tail) == v_opt:
                chosen.append((rows[pos], cols[ci]))
                chosen_vals.append(val)
                avail.remove(ci)
                need -= 1
                break
    if need != 0:
        # float pathology escape hatch: keep the base solution
        return sorted((rows[i], cols[j]) for i, j in zip(rr, cc))
    return chosen


def hungarian(cost, forbidden=None):
    """Min-cost maximum-cardinality assignment on a gated cost matrix.

    cost: (n, m) array-like of finite costs; forbidden: optional boolean mask
    of disallowed pairs (non-finite costs are treated as forbidden too).
    Returns the assignment as a list of (row, col) tuples sorted by row;
    ties in total cost resolve to the lexicographically smallest pair set.
    """
    work = np.array(cost, dtype=np.float64)
    if work.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    if forbidden is not None:
        forbidden = np.asarray(forbidden, dtype=bool)
        if forbidden.shape != work.shape:
            raise ValueError("forbidden mask shape must match cost shape")
        work = np.where(forbidden, np.inf, work)
    work[~np.isfinite(work)] = np.inf

    allowed = np.isfinite(work)
    n, m = work.shape
    if n == 0 or m == 0 or not allowed.any():
        return []

    row_seen = np.zeros(n, dtype=bool)
    col_seen = np.zeros(m, dtype=bool)
    result = []
    for start in range(n):
        if row_seen[start] or not allowed[start].any():
            continue
        comp_rows = []
        comp_cols = []
        row_queue = [start]
        row_seen[start] = True
        while row_queue:
            r = row_queue.pop()
            comp_rows.append(r)
            for c in np.flatnonzero(allowed[r] & ~col_seen):
                col_seen[c] = True
                comp_cols.append(int(c))
                for r2 in np.flatnonzero(allowed[:, c] & ~row_seen):
                    row_seen[r2] = True
                    row_queue.append(int(r2))
        comp_rows.sort()
        comp_cols.sort()
        result.extend(_component_pairs(work, comp_rows, comp_cols))
    result.sort()
    return result


def assignment_cost(cost, pairs) -> float:
    """Exact (order-independent) total cost of an assignment."""
    cost = np.asarray(cost, dtype=np.float64)
    return math.fsum(float(cost[r, c]) for r, c in pairs)
