"""Bagged regression forests with explicit out-of-bag bookkeeping.

The forest keeps the full bootstrap record: ``inbag[j, i]`` counts how many
times training row i was drawn into tree j's bootstrap sample. Everything
out-of-bag (which trees never saw a row, OOB predictions) is derived from
that matrix, so the bookkeeping can be audited directly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from claimbands.models._common import FeatureMatrix, as_matrix, as_target
from claimbands.models.tree import CartTree, fit_cart, tree_predict

logger = logging.getLogger(__name__)

# Below roughly this many trees, rows with empty OOB sets stop being rare:
# each row is out-of-bag with probability about exp(-1) per tree.
RECOMMENDED_MIN_TREES = 100


def default_mtry(n_features: int) -> int:
    """Default feature subsample size, max(1, floor(p / 3))."""
    return max(1, n_features // 3)


@dataclass(frozen=True, eq=False)
class Forest:
    """A fitted bagged forest.

    Attributes
    ----------
    trees : tuple of CartTree
        The member trees, in fitting order.
    inbag : ndarray of shape (n_trees, n_train)
        Bootstrap multiplicity of each training row in each tree's sample.
        Row j sums to n_train when bootstrapping is on. A zero entry means
        the row is out-of-bag for that tree.
    mtry, min_leaf, max_depth :
        Hyperparameters shared by all trees.
    seed : int or None
        Master seed the per-tree streams were derived from.
    """

    trees: tuple[CartTree, ...]
    inbag: np.ndarray
    mtry: int
    min_leaf: int
    max_depth: int | None
    seed: int | None

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_train(self) -> int:
        return int(self.inbag.shape[1])

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    def predict(self, X: "np.ndarray | FeatureMatrix") -> np.ndarray:
        return forest_predict(self, X)


def fit_forest(
    X: "np.ndarray | FeatureMatrix",
    y: np.ndarray,
    n_trees: int = 1000,
    mtry: int | None = None,
    min_leaf: int = 5,
    max_depth: int | None = None,
    seed: int | None = None,
    bootstrap: bool = True,
) -> Forest:
    """Fit a bagged forest of CART trees.

    Each tree gets its own RNG stream spawned from the master seed, so the
    result depends only on (data, hyperparameters, seed) and not on any
    execution schedule. ``bootstrap=False`` is a test hook that trains
    every tree on the full sample; with ``n_trees=1`` and ``mtry=p`` the
    forest then reproduces a single CART fit exactly.

    Parameters
    ----------
    X : ndarray or FeatureMatrix of shape (n, p)
    y : ndarray of shape (n,)
    n_trees : int
        Number of trees B. Keep B >= 100 when OOB predictions are needed.
    mtry : int or None
        Split-candidate features per node; None uses max(1, floor(p / 3)).
    min_leaf, max_depth :
        Passed through to each tree.
    seed : int or None
        Master seed; None draws fresh entropy.
    bootstrap : bool
        Draw a bootstrap sample per tree (default) or train on all rows.

    Returns
    -------
    Forest
    """
    X = as_matrix(X)
    y = as_target(y, X.shape[0])
    n, p = X.shape
    if n == 0:
        raise ValueError("cannot fit a forest on zero rows")
    n_trees = int(n_trees)
    if n_trees < 1:
        raise ValueError(f"n_trees must be at least 1, got {n_trees}")
    if mtry is None:
        mtry = default_mtry(p)
    if bootstrap and n_trees < RECOMMENDED_MIN_TREES:
        logger.debug(
            "forest with %d trees: OOB sets may be empty, %d or more recommended",
            n_trees,
            RECOMMENDED_MIN_TREES,
        )

    master = np.random.SeedSequence(seed)
    children = master.spawn(n_trees)
    trees: list[CartTree] = []
    inbag = np.zeros((n_trees, n), dtype=np.uint32)
    for j, child in enumerate(children):
        rng = np.random.default_rng(child)
        if bootstrap:
            bidx = rng.integers(0, n, size=n)
        else:
            bidx = np.arange(n)
        inbag[j] = np.bincount(bidx, minlength=n)
        tree_seed = int(rng.integers(0, 2**31 - 1))
        trees.append(
            fit_cart(
                X[bidx],
                y[bidx],
                min_leaf=min_leaf,
                max_depth=max_depth,
                mtry=mtry,
                seed=tree_seed,
            )
        )
    inbag.setflags(write=False)
    return Forest(
        trees=tuple(trees),
        inbag=inbag,
        mtry=int(mtry),
        min_leaf=int(min_leaf),
        max_depth=max_depth,
        seed=None if seed is None else int(seed),
    )


def forest_predict(forest: Forest, X: "np.ndarray | FeatureMatrix") -> np.ndarray:
    """Mean prediction over all member trees."""
    X = as_matrix(X)
    acc = np.zeros(X.shape[0])
    for tree in forest.trees:
        acc += tree_predict(tree, X)
    return acc / forest.n_trees


def oob_indices(forest: Forest, row: int) -> np.ndarray:
    """Indices of trees for which training row ``row`` is out-of-bag.

    A tree is out-of-bag for a row when the row never entered that tree's
    bootstrap sample.
    """
    row = int(row)
    if not 0 <= row < forest.n_train:
        raise ValueError(f"row {row} outside the training sample of size {forest.n_train}")
    return np.nonzero(forest.inbag[:, row] == 0)[0]


def oob_predict(
    forest: Forest,
    X: "np.ndarray | FeatureMatrix",
    rows: np.ndarray | None = None,
) -> np.ndarray:
    """Out-of-bag predictions for training rows.

    For each requested row the prediction averages only the trees that
    never saw that row during fitting.

    Parameters
    ----------
    forest : Forest
    X : ndarray or FeatureMatrix of shape (n_train, p)
        The training feature matrix the forest was fit on, in the same row
        order (the inbag record is positional).
    rows : ndarray or None
        Training row indices to predict; None means all rows.

    Returns
    -------
    ndarray
        One OOB prediction per requested row.

    Raises
    ------
    ValueError
        If X does not have n_train rows, or any requested row has an empty
        OOB set (no tree excluded it). The fix is a larger forest;
        B >= 100 makes empty OOB sets vanishingly rare.
    """
    X = as_matrix(X)
    if X.shape[0] != forest.n_train:
        raise ValueError(
            f"X has {X.shape[0]} rows but the forest was trained on {forest.n_train}"
        )
    if rows is None:
        rows = np.arange(forest.n_train)
    else:
        rows = np.asarray(rows, dtype=np.int64)
        if rows.ndim != 1:
            raise ValueError("rows must be a 1-d index array")
        if rows.size and (rows.min() < 0 or rows.max() >= forest.n_train):
            raise ValueError("rows contain indices outside the training sample")

    X_sub = X[rows]
    sums = np.zeros(rows.size)
    counts = np.zeros(rows.size, dtype=np.int64)
    for j, tree in enumerate(forest.trees):
        mask = forest.inbag[j, rows] == 0
        if not np.any(mask):
            continue
        preds = tree_predict(tree, X_sub[mask])
        sums[mask] += preds
        counts[mask] += 1

    empty = np.nonzero(counts == 0)[0]
    if empty.size:
        raise ValueError(
            f"{empty.size} row(s) have an empty out-of-bag set "
            f"(first: training row {int(rows[empty[0]])}); "
            f"increase n_trees (B >= {RECOMMENDED_MIN_TREES} recommended)"
        )
    return sums / counts
