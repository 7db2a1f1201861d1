"""Greedy CART regression trees with a numba-compiled split search.

Trees are grown by recursive binary splitting, choosing at each node the
(feature, threshold) pair that minimizes the summed within-child squared
error. Leaf predictions are child means. The hot loops are compiled with
numba because forests fit thousands of trees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from claimbands.models._common import FeatureMatrix, as_matrix, as_target

_NO_DEPTH_LIMIT = -1


@njit(cache=True)
def _grow(X, y, min_leaf, max_depth, mtry, seed):
    """Grow one tree; returns flat node arrays and the node count.

    Node layout: feature[i] < 0 marks a leaf, otherwise the node splits on
    feature[i] at threshold[i] with rows going left when x <= threshold.
    """
    n, p = X.shape
    max_nodes = 2 * max(1, n // min_leaf)

    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes)
    count = np.zeros(max_nodes, dtype=np.int64)

    samples = np.arange(n)
    tmp = np.empty(n, dtype=np.int64)
    vals_buf = np.empty(n)
    ys_buf = np.empty(n)
    feat_pool = np.arange(p)

    subsample = mtry < p
    if subsample:
        np.random.seed(seed)

    stack_node = np.empty(max_nodes, dtype=np.int64)
    stack_lo = np.empty(max_nodes, dtype=np.int64)
    stack_hi = np.empty(max_nodes, dtype=np.int64)
    stack_depth = np.empty(max_nodes, dtype=np.int64)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    stack_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        depth = stack_depth[top]
        m = hi - lo

        total = 0.0
        ymin = y[samples[lo]]
        ymax = ymin
        for i in range(lo, hi):
            v = y[samples[i]]
            total += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        value[node] = total / m
        count[node] = m

        if m < 2 * min_leaf or ymin == ymax:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue

        if subsample:
            # Partial Fisher-Yates: the first mtry pool entries become a
            # uniform draw of features without replacement.
            for t in range(mtry):
                j = t + np.random.randint(0, p - t)
                swap = feat_pool[t]
                feat_pool[t] = feat_pool[j]
                feat_pool[j] = swap

        best_gain = -1.0
        best_feat = -1
        best_thr = 0.0
        vals = vals_buf[:m]
        ys = ys_buf[:m]

        for c in range(mtry):
            f = feat_pool[c]
            for i in range(m):
                vals[i] = X[samples[lo + i], f]
            order = np.argsort(vals)
            for i in range(m):
                ys[i] = y[samples[lo + order[i]]]

            # Minimizing child SSE is equivalent to maximizing
            # ls^2/nl + rs^2/nr because the parent sum of squares is fixed.
            ls = 0.0
            for i in range(m - 1):
                ls += ys[i]
                nl = i + 1
                nr = m - nl
                if nr < min_leaf:
                    break
                if nl < min_leaf:
                    continue
                lo_val = vals[order[i]]
                hi_val = vals[order[i + 1]]
                if lo_val == hi_val:
                    continue
                rs = total - ls
                gain = ls * ls / nl + rs * rs / nr
                if gain > best_gain:
                    mid = 0.5 * (lo_val + hi_val)
                    # Midpoints of adjacent floats can round up to the
                    # higher value; fall back so x <= mid keeps exactly
                    # the left block.
                    if mid >= hi_val:
                        mid = lo_val
                    best_gain = gain
                    best_feat = f
                    best_thr = mid

        if best_feat < 0:
            continue

        nl = 0
        nr = 0
        for i in range(lo, hi):
            r = samples[i]
            if X[r, best_feat] <= best_thr:
                samples[lo + nl] = r
                nl += 1
            else:
                tmp[nr] = r
                nr += 1
        for i in range(nr):
            samples[lo + nl + i] = tmp[i]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid

        stack_node[top] = rid
        stack_lo[top] = lo + nl
        stack_hi[top] = hi
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = lid
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        stack_depth[top] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        count[:n_nodes].copy(),
    )


@njit(cache=True)
def _predict(feature, threshold, left, right, value, X, out):
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]


@dataclass(frozen=True, eq=False)
class CartTree:
    """A fitted regression tree stored as flat node arrays.

    ``feature[i] < 0`` marks node i as a leaf with prediction ``value[i]``;
    otherwise rows with ``x[feature[i]] <= threshold[i]`` descend to
    ``left[i]`` and the rest to ``right[i]``. ``value`` and ``n_samples``
    are populated for internal nodes too (node mean and node size).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    n_features: int
    min_leaf: int
    max_depth: int | None
    mtry: int

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def predict(self, X: "np.ndarray | FeatureMatrix") -> np.ndarray:
        return tree_predict(self, X)


def fit_cart(
    X: "np.ndarray | FeatureMatrix",
    y: np.ndarray,
    min_leaf: int = 5,
    max_depth: int | None = None,
    mtry: int | None = None,
    seed: int | None = None,
) -> CartTree:
    """Fit a CART regression tree by greedy variance reduction.

    Parameters
    ----------
    X : ndarray or FeatureMatrix of shape (n, p)
    y : ndarray of shape (n,)
    min_leaf : int
        Minimum rows in each leaf; splits producing a smaller child are
        not considered.
    max_depth : int or None
        Depth limit; None grows until leaves are pure or too small.
    mtry : int or None
        Number of features drawn uniformly without replacement as split
        candidates at each node. None considers every feature, which makes
        the fit fully deterministic regardless of ``seed``.
    seed : int or None
        Seed for the per-node feature draws. Only consulted when
        ``mtry < p``; None draws a fresh seed.

    Returns
    -------
    CartTree
    """
    X = as_matrix(X)
    y = as_target(y, X.shape[0])
    n, p = X.shape
    if n == 0:
        raise ValueError("cannot fit a tree on zero rows")
    min_leaf = int(min_leaf)
    if min_leaf < 1:
        raise ValueError(f"min_leaf must be at least 1, got {min_leaf}")
    if mtry is None:
        mtry = p
    mtry = int(mtry)
    if not 1 <= mtry <= p:
        raise ValueError(f"mtry must lie in [1, {p}], got {mtry}")
    depth_limit = _NO_DEPTH_LIMIT if max_depth is None else int(max_depth)
    if max_depth is not None and depth_limit < 0:
        raise ValueError(f"max_depth must be non-negative, got {max_depth}")
    if seed is None:
        seed = int(np.random.default_rng().integers(0, 2**31 - 1))
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")

    feature, threshold, left, right, value, count = _grow(
        X, y, min_leaf, depth_limit, mtry, seed
    )
    return CartTree(
        feature=feature,
        threshold=threshold,
        left=left,
        right=right,
        value=value,
        n_samples=count,
        n_features=p,
        min_leaf=min_leaf,
        max_depth=max_depth,
        mtry=mtry,
    )


def tree_predict(tree: CartTree, X: "np.ndarray | FeatureMatrix") -> np.ndarray:
    """Predict leaf means for each row of X."""
    X = as_matrix(X)
    if X.shape[1] != tree.n_features:
        raise ValueError(
            f"feature count mismatch: tree expects {tree.n_features}, got {X.shape[1]}"
        )
    out = np.empty(X.shape[0])
    _predict(tree.feature, tree.threshold, tree.left, tree.right, tree.value, X, out)
    return out
