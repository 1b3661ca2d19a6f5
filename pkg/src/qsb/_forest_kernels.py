"""Hot kernels for quantile-forest growing and prediction.

Written in nopython-compatible style and compiled with numba when available
(see :mod:`qsb._accel`); the same source runs unmodified as plain
Python/NumPy when the ``QSB_NO_NUMBA`` env flag is set.  All randomness
(bootstrap indices, per-node candidate dimensions) is drawn by the caller
with a numpy Generator and passed in, so both execution paths produce
bitwise-identical forests.

Tree storage is flat: per-node arrays where ``node_feat[k] == -1`` marks a
leaf whose member rows (bootstrap indices into the training set, counted
with multiplicity) live in ``work_idx[node_start[k]:node_end[k]]``.
Children pointers are local to the tree; multi-tree arrays are concatenated
with per-tree offsets.
"""

import numpy as np

from ._accel import njit


@njit(cache=True)
def grow_tree(
    x,
    y,
    work_idx,
    cand_dims,
    d_tilde,
    max_leaf,
    node_feat,
    node_thr,
    node_left,
    node_right,
    node_start,
    node_end,
    stack,
    tmp,
):
    """Grow one CART-style tree; returns the number of nodes used.

    ``work_idx`` holds the tree's bootstrap sample (training-row indices,
    with multiplicity) and is partitioned in place.  At each node the best
    (dimension, threshold) minimizes the summed left/right squared error
    around the child means, scanned incrementally over midpoints between
    consecutive distinct sorted values.  Candidate dimensions per node come
    pre-drawn and sorted ascending in ``cand_dims``, so equal scores resolve
    to the lowest dimension, then the lowest threshold.
    """
    m = work_idx.shape[0]
    node_start[0] = 0
    node_end[0] = m
    n_nodes = 1
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        nid = stack[sp]
        s = node_start[nid]
        e = node_end[nid]
        mn = e - s
        node_feat[nid] = -1
        if mn <= max_leaf:
            continue
        tsum = 0.0
        tsq = 0.0
        for k in range(s, e):
            yv = y[work_idx[k]]
            tsum += yv
            tsq += yv * yv
        best_score = np.inf
        best_dim = -1
        best_thr = 0.0
        vals = np.empty(mn, dtype=np.float64)
        for t in range(d_tilde):
            f = cand_dims[nid, t]
            for k in range(mn):
                vals[k] = x[work_idx[s + k], f]
            order = np.argsort(vals, kind="mergesort")
            sy = 0.0
            sy2 = 0.0
            for pos in range(mn - 1):
                yv = y[work_idx[s + order[pos]]]
                sy += yv
                sy2 += yv * yv
                v0 = vals[order[pos]]
                v1 = vals[order[pos + 1]]
                if v1 <= v0:
                    continue
                n_l = pos + 1
                n_r = mn - n_l
                rsum = tsum - sy
                rsq = tsq - sy2
                score = (sy2 - sy * sy / n_l) + (rsq - rsum * rsum / n_r)
                if score < best_score:
                    best_score = score
                    best_dim = f
                    best_thr = 0.5 * (v0 + v1)
        if best_dim < 0:
            continue  # no admissible split in the candidate dimensions
        n_l = 0
        for k in range(s, e):
            if x[work_idx[k], best_dim] <= best_thr:
                tmp[n_l] = work_idx[k]
                n_l += 1
        n_r = n_l
        for k in range(s, e):
            if x[work_idx[k], best_dim] > best_thr:
                tmp[n_r] = work_idx[k]
                n_r += 1
        for k in range(mn):
            work_idx[s + k] = tmp[k]
        left = n_nodes
        right = n_nodes + 1
        n_nodes += 2
        node_feat[nid] = best_dim
        node_thr[nid] = best_thr
        node_left[nid] = left
        node_right[nid] = right
        node_start[left] = s
        node_end[left] = s + n_l
        node_start[right] = s + n_l
        node_end[right] = e
        stack[sp] = right
        sp += 1
        stack[sp] = left
        sp += 1
    return n_nodes


@njit(cache=True)
def accumulate_weights(
    xq,
    node_feat,
    node_thr,
    node_left,
    node_right,
    node_start,
    node_end,
    tree_node_off,
    tree_work_off,
    work_all,
    w_out,
):
    """Add each tree's leaf weights at query point ``xq`` into ``w_out``.

    Per tree, every bootstrap copy landing in the query's leaf contributes
    1/(leaf population); the caller divides by the number of trees.
    """
    n_trees = tree_node_off.shape[0] - 1
    for t in range(n_trees):
        base = tree_node_off[t]
        wbase = tree_work_off[t]
        nid = base
        while node_feat[nid] >= 0:
            if xq[node_feat[nid]] <= node_thr[nid]:
                nid = base + node_left[nid]
            else:
                nid = base + node_right[nid]
        s = node_start[nid]
        e = node_end[nid]
        inv = 1.0 / (e - s)
        for k in range(s, e):
            w_out[work_all[wbase + k]] += inv


@njit(cache=True)
def predict_batch(
    queries,
    node_feat,
    node_thr,
    node_left,
    node_right,
    node_start,
    node_end,
    tree_node_off,
    tree_work_off,
    work_all,
    y,
    y_order,
    tau_guarded,
    out,
):
    """Weighted-CDF quantile at each query row.

    The returned value is the smallest training response whose accumulated
    weight (in sorted-response order) reaches ``tau_guarded`` times the
    total weight.
    """
    n = y.shape[0]
    w = np.zeros(n, dtype=np.float64)
    for q in range(queries.shape[0]):
        for i in range(n):
            w[i] = 0.0
        accumulate_weights(
            queries[q],
            node_feat,
            node_thr,
            node_left,
            node_right,
            node_start,
            node_end,
            tree_node_off,
            tree_work_off,
            work_all,
            w,
        )
        total = 0.0
        for i in range(n):
            total += w[i]
        target = tau_guarded * total
        acc = 0.0
        res = y[y_order[n - 1]]
        for k in range(n):
            acc += w[y_order[k]]
            if acc >= target:
                res = y[y_order[k]]
                break
        out[q] = res
