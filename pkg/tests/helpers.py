"""Independent reference implementations used as test oracles.

Everything here is deliberately written the slow, obvious way (plain Python
loops, direct sums of squares) so that agreement with the package's
optimized code is meaningful.
"""

from __future__ import annotations

import numpy as np

from claimbands.models import tree_predict
from claimbands.models.forest import Forest


def sse(y) -> float:
    """Sum of squared deviations from the mean, in plain Python."""
    vals = [float(v) for v in y]
    mean = sum(vals) / len(vals)
    return sum((v - mean) ** 2 for v in vals)


def best_split_by_scan(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Exhaustively scan every (feature, midpoint) split of one node.

    Returns ``(child_sse, mask_left)`` for the split minimizing the summed
    child squared error, or ``None`` when no legal split exists. Candidate
    thresholds are midpoints between adjacent distinct sorted values; a
    child smaller than ``min_leaf`` is illegal.
    """
    n, p = X.shape
    best = None
    for f in range(p):
        distinct = sorted(set(float(v) for v in X[:, f]))
        for lo_val, hi_val in zip(distinct, distinct[1:]):
            thr = 0.5 * (lo_val + hi_val)
            mask = X[:, f] <= thr
            nl = int(mask.sum())
            if nl < min_leaf or n - nl < min_leaf:
                continue
            cost = sse(y[mask]) + sse(y[~mask])
            if best is None or cost < best[0]:
                best = (cost, mask)
    return best


def exhaustive_greedy_sse(
    X: np.ndarray, y: np.ndarray, min_leaf: int = 1, max_depth: int | None = None
) -> float:
    """Total leaf SSE of a greedy tree grown by the exhaustive node scan.

    Node legality matches the library contract: a node stays a leaf when it
    has fewer than ``2 * min_leaf`` rows, is pure, sits at the depth limit,
    or no scan candidate is legal.
    """

    def grow(rows: np.ndarray, depth: int) -> float:
        ysub = y[rows]
        if rows.size < 2 * min_leaf or np.all(ysub == ysub[0]):
            return sse(ysub)
        if max_depth is not None and depth >= max_depth:
            return sse(ysub)
        found = best_split_by_scan(X[rows], ysub, min_leaf)
        if found is None:
            return sse(ysub)
        _, mask = found
        return grow(rows[mask], depth + 1) + grow(rows[~mask], depth + 1)

    return grow(np.arange(X.shape[0]), 0)


def tree_leaf_sse(tree, X: np.ndarray, y: np.ndarray) -> float:
    """Total leaf SSE of a fitted tree on its training rows."""
    preds = tree_predict(tree, X)
    return float(np.sum((y - preds) ** 2))


def brute_forest_predict(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Row-by-row mean over every member tree."""
    out = np.zeros(X.shape[0])
    for i in range(X.shape[0]):
        row = X[i : i + 1]
        out[i] = np.mean([tree_predict(t, row)[0] for t in forest.trees])
    return out


def brute_oob_predict(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Row-by-row mean over the trees whose bootstrap missed the row."""
    out = np.zeros(X.shape[0])
    for i in range(X.shape[0]):
        row = X[i : i + 1]
        preds = [
            tree_predict(t, row)[0]
            for j, t in enumerate(forest.trees)
            if forest.inbag[j, i] == 0
        ]
        if not preds:
            raise AssertionError(f"row {i} has an empty out-of-bag set")
        out[i] = np.mean(preds)
    return out


class ConstantModel:
    """Predicts the same value for every row."""

    def __init__(self, value: float):
        self.value = float(value)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        n = X.shape[0] if X.ndim == 2 else 1
        return np.full(n, self.value)


class ScaledModel:
    """Wraps a fitted model, multiplying its predictions by a constant."""

    def __init__(self, base, factor: float):
        self.base = base
        self.factor = float(factor)

    def predict(self, X) -> np.ndarray:
        return self.factor * np.asarray(self.base.predict(X), dtype=np.float64)


def scaled_factory(base_factory, factor: float):
    """A model factory whose fitted model predicts ``factor`` times more."""

    def factory(X, y):
        return ScaledModel(base_factory(X, y), factor)

    return factory
