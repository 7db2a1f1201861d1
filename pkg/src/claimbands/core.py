"""Core data containers and finite-sample calibration arithmetic.

This module holds the small set of types shared by every other part of the
package (claims data, split bookkeeping, score sets, prediction intervals)
together with the order-statistic arithmetic that gives split conformal
prediction its finite-sample coverage guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ColumnSpec",
    "ClaimsDataset",
    "SplitIndices",
    "ScoreSet",
    "PredictionInterval",
    "MiscoverageLevel",
    "random_split",
    "calibration_rank",
    "conformal_quantile",
    "empirical_coverage",
    "average_width",
    "rmse",
]

_SCORE_PROVENANCES = ("calibration", "oob")


def _as_alpha(alpha: "float | MiscoverageLevel") -> float:
    """Normalize a miscoverage argument to a validated float."""
    if isinstance(alpha, MiscoverageLevel):
        return alpha.alpha
    alpha = float(alpha)
    if not math.isfinite(alpha) or not 0.0 < alpha < 1.0:
        raise ValueError(f"miscoverage level must lie strictly in (0, 1), got {alpha!r}")
    return alpha


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class MiscoverageLevel:
    """A validated miscoverage level alpha, strictly between 0 and 1.

    Operations in this package accept either a plain float or a
    ``MiscoverageLevel``; the wrapper exists so that configuration code can
    validate once and pass the value around without re-checking.
    """

    alpha: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", float(self.alpha))
        if not math.isfinite(self.alpha) or not 0.0 < self.alpha < 1.0:
            raise ValueError(
                f"miscoverage level must lie strictly in (0, 1), got {self.alpha!r}"
            )

    @property
    def coverage(self) -> float:
        """Nominal coverage 1 - alpha."""
        return 1.0 - self.alpha


@dataclass(frozen=True)
class ColumnSpec:
    """Description of one predictor column.

    Parameters
    ----------
    name : str
        Column name, unique within a dataset.
    kind : str
        Either ``"numeric"`` or ``"categorical"``.
    levels : tuple of str
        For categorical columns, the observed level labels. The position of
        a label in this tuple is the integer code stored in the predictor
        matrix. Empty for numeric columns.
    """

    name: str
    kind: str
    levels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("numeric", "categorical"):
            raise ValueError(f"column kind must be 'numeric' or 'categorical', got {self.kind!r}")
        if self.kind == "numeric" and self.levels:
            raise ValueError(f"numeric column {self.name!r} must not carry levels")
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))


@dataclass(frozen=True)
class ClaimsDataset:
    """Immutable claims data: predictors, claim frequency and claim severity.

    Parameters
    ----------
    predictors : ndarray of shape (n, p)
        Predictor matrix. Categorical cells hold integer level codes
        (stored as floats) indexing into the matching ``ColumnSpec.levels``.
    frequency : ndarray of shape (n,)
        Non-negative integer claim counts.
    severity : ndarray of shape (n,)
        Non-negative average claim amounts. Rows with zero frequency must
        have zero severity.
    columns : tuple of ColumnSpec
        One spec per predictor column, in matrix order.

    Raises
    ------
    ValueError
        On shape mismatches, negative or non-finite values, non-integer
        frequencies, or rows where ``frequency == 0`` but ``severity != 0``.
    """

    predictors: np.ndarray
    frequency: np.ndarray
    severity: np.ndarray
    columns: tuple[ColumnSpec, ...]

    def __post_init__(self) -> None:
        X = np.asarray(self.predictors, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"predictors must be a 2-d array, got ndim={X.ndim}")
        freq = np.asarray(self.frequency)
        if freq.ndim != 1 or freq.shape[0] != X.shape[0]:
            raise ValueError("frequency must be a 1-d array with one entry per row")
        if not np.issubdtype(freq.dtype, np.number):
            raise ValueError("frequency must be numeric")
        if np.any(freq != np.floor(freq)):
            raise ValueError("frequency must contain integer counts")
        freq = freq.astype(np.int64)
        sev = np.asarray(self.severity, dtype=np.float64)
        if sev.ndim != 1 or sev.shape[0] != X.shape[0]:
            raise ValueError("severity must be a 1-d array with one entry per row")
        cols = tuple(self.columns)
        if len(cols) != X.shape[1]:
            raise ValueError(
                f"got {len(cols)} column specs for {X.shape[1]} predictor columns"
            )
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise ValueError("column names must be unique")
        if not np.all(np.isfinite(X)):
            raise ValueError("predictors contain non-finite values")
        if not np.all(np.isfinite(sev)):
            raise ValueError("severity contains non-finite values")
        if np.any(freq < 0):
            raise ValueError("frequency must be non-negative")
        if np.any(sev < 0):
            raise ValueError("severity must be non-negative")
        bad = np.nonzero((freq == 0) & (sev != 0.0))[0]
        if bad.size:
            raise ValueError(
                f"rows with zero frequency must have zero severity, violated at rows {bad[:10].tolist()}"
            )
        for j, c in enumerate(cols):
            if c.kind == "categorical":
                codes = X[:, j]
                if np.any(codes != np.floor(codes)) or np.any(codes < 0) or np.any(
                    codes >= len(c.levels)
                ):
                    raise ValueError(
                        f"categorical column {c.name!r} holds codes outside its level range"
                    )
        object.__setattr__(self, "predictors", _readonly(X))
        object.__setattr__(self, "frequency", _readonly(freq))
        object.__setattr__(self, "severity", _readonly(sev))
        object.__setattr__(self, "columns", cols)

    @property
    def n_rows(self) -> int:
        return self.predictors.shape[0]

    @property
    def n_predictors(self) -> int:
        return self.predictors.shape[1]

    def take(self, rows: np.ndarray) -> "ClaimsDataset":
        """Return a new dataset restricted to the given row indices."""
        rows = np.asarray(rows, dtype=np.int64)
        return ClaimsDataset(
            predictors=self.predictors[rows],
            frequency=self.frequency[rows],
            severity=self.severity[rows],
            columns=self.columns,
        )


@dataclass(frozen=True)
class SplitIndices:
    """Disjoint row indices for training, calibration and test."""

    train: np.ndarray
    calibration: np.ndarray
    test: np.ndarray

    def __post_init__(self) -> None:
        parts = []
        for name in ("train", "calibration", "test"):
            idx = np.asarray(getattr(self, name), dtype=np.int64)
            if idx.ndim != 1 or idx.size == 0:
                raise ValueError(f"{name} indices must be a non-empty 1-d array")
            if np.any(idx < 0):
                raise ValueError(f"{name} indices must be non-negative")
            object.__setattr__(self, name, _readonly(idx))
            parts.append(idx)
        combined = np.concatenate(parts)
        if np.unique(combined).size != combined.size:
            raise ValueError("train, calibration and test indices must be disjoint")

    @property
    def n_calibration(self) -> int:
        return self.calibration.size


@dataclass(frozen=True, eq=False)
class ScoreSet:
    """A set of non-negative nonconformity scores with provenance.

    Parameters
    ----------
    scores : ndarray of shape (m,)
        Finite, non-negative nonconformity scores. Stored sorted so that
        two score sets built from the same multiset compare equal
        regardless of input order.
    provenance : str
        Either ``"calibration"`` (held-out calibration rows) or ``"oob"``
        (out-of-bag scores computed on the full training sample).
    """

    scores: np.ndarray
    provenance: str

    def __post_init__(self) -> None:
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("scores must be a non-empty 1-d array")
        if not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite")
        if np.any(s < 0):
            raise ValueError("scores must be non-negative")
        if self.provenance not in _SCORE_PROVENANCES:
            raise ValueError(
                f"provenance must be one of {_SCORE_PROVENANCES}, got {self.provenance!r}"
            )
        object.__setattr__(self, "scores", _readonly(np.sort(s)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScoreSet):
            return NotImplemented
        return self.provenance == other.provenance and np.array_equal(
            self.scores, other.scores
        )

    def __len__(self) -> int:
        return int(self.scores.size)


@dataclass(frozen=True)
class PredictionInterval:
    """A single prediction interval.

    Attributes
    ----------
    lo, hi : float
        Interval endpoints, ``lo <= hi``. Two-stage severity intervals are
        clipped below at zero; single-stage intervals are not clipped and
        may have a negative lower endpoint.
    center : float
        The point prediction the interval is built around.
    half_width_raw : float
        The half width before any clipping at zero. The reported interval
        width ``hi - lo`` can be smaller than ``2 * half_width_raw`` when
        the lower endpoint was clipped.
    clipped_at_zero : bool
        True when the unclipped lower endpoint was negative.
    """

    lo: float
    hi: float
    center: float
    half_width_raw: float
    clipped_at_zero: bool = False

    def __post_init__(self) -> None:
        for name in ("lo", "hi", "center", "half_width_raw"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"interval field {name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        if self.lo > self.hi:
            raise ValueError(f"interval endpoints out of order: lo={self.lo} > hi={self.hi}")
        if self.half_width_raw < 0:
            raise ValueError("half_width_raw must be non-negative")
        if self.clipped_at_zero and self.lo < 0:
            raise ValueError("a zero-clipped interval cannot have a negative lower endpoint")

    @property
    def width(self) -> float:
        """Interval width after clipping, ``hi - lo``."""
        return self.hi - self.lo

    def contains(self, value: float) -> bool:
        """Whether ``value`` lies inside the closed interval."""
        return self.lo <= value <= self.hi


def random_split(
    n: int,
    proportions: Sequence[float],
    seed: "int | np.random.SeedSequence",
) -> SplitIndices:
    """Randomly partition ``range(n)`` into train, calibration and test.

    Target sizes are the proportions times ``n`` rounded with the largest
    remainder method: each part first receives the floor of its exact
    share, then the leftover rows go to the parts with the largest
    fractional remainders (ties broken by part order).

    Parameters
    ----------
    n : int
        Number of rows to split.
    proportions : sequence of 3 floats
        Positive shares for (train, calibration, test) summing to 1.
    seed : int or numpy SeedSequence
        Seed for the shuffle. The same seed always yields the same split.

    Returns
    -------
    SplitIndices

    Raises
    ------
    ValueError
        If the proportions are invalid or any part would receive zero rows.
    """
    prop = [float(p) for p in proportions]
    if len(prop) != 3:
        raise ValueError(f"expected 3 proportions (train, calibration, test), got {len(prop)}")
    if any(p <= 0 for p in prop):
        raise ValueError(f"proportions must be strictly positive, got {prop}")
    if abs(sum(prop) - 1.0) > 1e-9:
        raise ValueError(f"proportions must sum to 1, got sum={sum(prop)!r}")
    n = int(n)
    if n < 3:
        raise ValueError(f"need at least 3 rows to split, got {n}")

    exact = [p * n for p in prop]
    sizes = [int(math.floor(e)) for e in exact]
    leftover = n - sum(sizes)
    remainders = [e - s for e, s in zip(exact, sizes)]
    # Stable argsort on negated remainders breaks ties by part order.
    order = sorted(range(3), key=lambda i: (-remainders[i], i))
    for i in order[:leftover]:
        sizes[i] += 1
    if any(s == 0 for s in sizes):
        raise ValueError(
            f"degenerate split: part sizes {sizes} for n={n}, proportions={prop}"
        )

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    a, b = sizes[0], sizes[0] + sizes[1]
    return SplitIndices(train=perm[:a], calibration=perm[a:b], test=perm[b:])


def calibration_rank(m: int, alpha: "float | MiscoverageLevel") -> int:
    """The order-statistic rank k = ceil((1 - alpha) * (m + 1)).

    The product is evaluated in exact rational arithmetic on the binary
    value of ``alpha``, so the returned k always satisfies
    ``(1 - alpha) * (m + 1) <= k < (1 - alpha) * (m + 1) + 1`` exactly.

    Raises
    ------
    ValueError
        If ``k > m``, i.e. the score set is too small for the requested
        level. The message states the minimum usable m.
    """
    alpha = _as_alpha(alpha)
    m = int(m)
    if m < 1:
        raise ValueError(f"need at least one score, got m={m}")
    frac = 1 - Fraction(alpha)
    k = math.ceil(frac * (m + 1))
    if k > m:
        m_min = math.ceil(frac / Fraction(alpha))
        raise ValueError(
            f"{m} scores are too few for alpha={alpha}: "
            f"rank k={k} exceeds m={m}; need at least m={m_min}"
        )
    return k


def conformal_quantile(
    scores: "np.ndarray | ScoreSet",
    alpha: "float | MiscoverageLevel",
) -> float:
    """Finite-sample conformal quantile of a score set.

    Returns the k-th smallest score where ``k = ceil((1 - alpha) * (m + 1))``
    and ``m`` is the number of scores. Ties count with multiplicity: the
    k-th smallest element of the sorted multiset is returned, so repeated
    values occupy consecutive ranks.

    Parameters
    ----------
    scores : ndarray or ScoreSet
        Finite scores. A plain array does not need to be sorted.
    alpha : float or MiscoverageLevel
        Miscoverage level in (0, 1).

    Returns
    -------
    float
        The calibrated radius r-hat.

    Raises
    ------
    ValueError
        If the score set is empty, contains non-finite values, or is too
        small for the requested level (``k > m``).
    """
    if isinstance(scores, ScoreSet):
        s = scores.scores
    else:
        s = np.asarray(scores, dtype=np.float64)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("scores must be a non-empty 1-d array")
        if not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite")
        s = np.sort(s)
    k = calibration_rank(s.size, alpha)
    return float(s[k - 1])


def _check_intervals(intervals: Iterable[PredictionInterval]) -> list[PredictionInterval]:
    out = list(intervals)
    if not out:
        raise ValueError("need at least one interval")
    for iv in out:
        if not isinstance(iv, PredictionInterval):
            raise TypeError(f"expected PredictionInterval, got {type(iv).__name__}")
    return out


def empirical_coverage(
    intervals: Iterable[PredictionInterval],
    truths: Sequence[float],
) -> float:
    """Fraction of truths falling inside their closed intervals."""
    ivs = _check_intervals(intervals)
    y = np.asarray(truths, dtype=np.float64)
    if y.ndim != 1 or y.size != len(ivs):
        raise ValueError(
            f"got {len(ivs)} intervals but {y.size} truth values"
        )
    hits = sum(1 for iv, t in zip(ivs, y) if iv.contains(float(t)))
    return hits / len(ivs)


def average_width(intervals: Iterable[PredictionInterval]) -> float:
    """Mean width ``hi - lo`` across intervals (after any clipping)."""
    ivs = _check_intervals(intervals)
    return float(np.mean([iv.width for iv in ivs]))


def rmse(predictions: Sequence[float], truths: Sequence[float]) -> float:
    """Root mean squared error between predictions and truths."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(truths, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1:
        raise ValueError(f"shape mismatch: predictions {p.shape} vs truths {t.shape}")
    if p.size == 0:
        raise ValueError("need at least one prediction")
    return float(np.sqrt(np.mean((p - t) ** 2)))
