"""Quantile random forest: CART trees on bootstrap resamples, weighted
empirical CDF, order-statistic quantile extraction.

Leaf membership counts bootstrap copies by multiplicity, both in the
indicator and in the leaf population, matching the reference semantics of
the weighted-CDF estimator.  Tree growing and prediction run through the
numba kernels in :mod:`qsb._forest_kernels` (pure-NumPy fallback via the
``QSB_NO_NUMBA`` env flag; identical output either way).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _forest_kernels as fk
from .core import CEIL_GUARD, check_tau
from .data import Dataset


def split_score(y_left, y_right) -> float:
    """Sum of squared deviations around each side's mean."""
    yl = np.asarray(y_left, dtype=float).ravel()
    yr = np.asarray(y_right, dtype=float).ravel()
    if yl.size == 0 or yr.size == 0:
        raise ValueError("both sides of a split must be nonempty")
    return float(((yl - yl.mean()) ** 2).sum() + ((yr - yr.mean()) ** 2).sum())


@dataclass(frozen=True)
class ForestModel:
    x: np.ndarray
    y: np.ndarray
    tau: float
    max_leaf: int
    n_trees: int
    d_tilde: int
    bootstrap: bool
    node_feat: np.ndarray
    node_thr: np.ndarray
    node_left: np.ndarray
    node_right: np.ndarray
    node_start: np.ndarray
    node_end: np.ndarray
    tree_node_off: np.ndarray
    tree_work_off: np.ndarray
    work_all: np.ndarray
    y_order: np.ndarray


def forest_fit(
    data: Dataset,
    tau: float,
    max_leaf: int,
    n_trees: int = 10_000,
    d_tilde: int = None,
    rng: np.random.Generator = None,
    bootstrap: bool = True,
) -> ForestModel:
    """Grow ``n_trees`` trees on independent bootstrap resamples.

    ``d_tilde`` candidate dimensions (default ceil(d/3)) are drawn uniformly
    without replacement at every node.  Recursion stops when a node holds at
    most ``max_leaf`` points or no candidate split strictly separates them.
    ``bootstrap=False`` grows every tree on the original sample (test hook).
    """
    tau = check_tau(tau)
    if max_leaf < 1:
        raise ValueError("max_leaf must be at least 1")
    if n_trees < 1:
        raise ValueError("need at least one tree")
    n, d = data.x.shape
    if d_tilde is None:
        d_tilde = max(1, math.ceil(d / 3))
    if not 1 <= d_tilde <= d:
        raise ValueError(f"d_tilde must lie in [1, {d}]")
    rng = np.random.default_rng(rng)

    # Split scores are invariant to shifting y; centering avoids the
    # cancellation in the sum-of-squares update on large-mean data.
    y_centered = data.y - data.y.mean()
    x = np.ascontiguousarray(data.x)
    max_nodes = 2 * n + 1

    node_feat = np.empty(max_nodes, dtype=np.int32)
    node_thr = np.empty(max_nodes, dtype=np.float64)
    node_left = np.empty(max_nodes, dtype=np.int32)
    node_right = np.empty(max_nodes, dtype=np.int32)
    node_start = np.empty(max_nodes, dtype=np.int32)
    node_end = np.empty(max_nodes, dtype=np.int32)
    stack = np.empty(max_nodes, dtype=np.int32)
    tmp = np.empty(n, dtype=np.int32)

    feats, thrs, lefts, rights, starts, ends, works = [], [], [], [], [], [], []
    identity = np.arange(n, dtype=np.int32)
    all_dims = np.tile(np.arange(d, dtype=np.int32), (max_nodes, 1))
    for _ in range(n_trees):
        work = rng.integers(0, n, n).astype(np.int32) if bootstrap else identity.copy()
        if d_tilde == d:
            cand = all_dims
        else:
            u = rng.random((max_nodes, d))
            cand = np.sort(np.argsort(u, axis=1)[:, :d_tilde].astype(np.int32), axis=1)
        n_nodes = fk.grow_tree(
            x,
            y_centered,
            work,
            cand,
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
        )
        feats.append(node_feat[:n_nodes].copy())
        thrs.append(node_thr[:n_nodes].copy())
        lefts.append(node_left[:n_nodes].copy())
        rights.append(node_right[:n_nodes].copy())
        starts.append(node_start[:n_nodes].copy())
        ends.append(node_end[:n_nodes].copy())
        works.append(work)

    counts = np.array([f.size for f in feats], dtype=np.int64)
    tree_node_off = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    tree_work_off = (np.arange(n_trees + 1, dtype=np.int64)) * n
    return ForestModel(
        x=x,
        y=data.y,
        tau=tau,
        max_leaf=max_leaf,
        n_trees=n_trees,
        d_tilde=d_tilde,
        bootstrap=bootstrap,
        node_feat=np.concatenate(feats),
        node_thr=np.concatenate(thrs),
        node_left=np.concatenate(lefts),
        node_right=np.concatenate(rights),
        node_start=np.concatenate(starts),
        node_end=np.concatenate(ends),
        tree_node_off=tree_node_off,
        tree_work_off=tree_work_off,
        work_all=np.concatenate(works),
        y_order=np.argsort(data.y, kind="stable"),
    )


def forest_cdf_weights(model: ForestModel, x_star) -> np.ndarray:
    """Averaged leaf weights over training points at a query point."""
    xq = np.asarray(x_star, dtype=float).ravel()
    w = np.zeros(model.y.size, dtype=np.float64)
    fk.accumulate_weights(
        xq,
        model.node_feat,
        model.node_thr,
        model.node_left,
        model.node_right,
        model.node_start,
        model.node_end,
        model.tree_node_off,
        model.tree_work_off,
        model.work_all,
        w,
    )
    return w / model.n_trees


def weighted_cdf_quantile(y, weights, tau: float) -> float:
    """Smallest y value whose accumulated weight reaches tau (guarded)."""
    y = np.asarray(y, dtype=float)
    order = np.argsort(y, kind="stable")
    cum = np.cumsum(np.asarray(weights, dtype=float)[order])
    target = (tau - CEIL_GUARD) * cum[-1]
    k = int(np.searchsorted(cum, target, side="left"))
    return float(y[order[min(k, y.size - 1)]])


def forest_predict_batch(model: ForestModel, points) -> np.ndarray:
    queries = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
    out = np.empty(queries.shape[0], dtype=np.float64)
    fk.predict_batch(
        queries,
        model.node_feat,
        model.node_thr,
        model.node_left,
        model.node_right,
        model.node_start,
        model.node_end,
        model.tree_node_off,
        model.tree_work_off,
        model.work_all,
        model.y,
        model.y_order.astype(np.int64),
        model.tau - CEIL_GUARD,
        out,
    )
    return out


def forest_predict(model: ForestModel, x_star) -> float:
    return float(forest_predict_batch(model, np.atleast_2d(x_star))[0])
