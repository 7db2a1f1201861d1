"""Core containers and the order-statistic calibration arithmetic."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from claimbands.core import (
    ClaimsDataset,
    ColumnSpec,
    MiscoverageLevel,
    PredictionInterval,
    ScoreSet,
    SplitIndices,
    average_width,
    calibration_rank,
    conformal_quantile,
    empirical_coverage,
    random_split,
    rmse,
)

# Levels whose binary float value introduces no spurious extra rank in
# ceil((1 - alpha) * (m + 1)) for any small m; used for permutation sweeps.
ALPHA_GRID = (0.05, 0.1, 0.2, 0.25, 0.5)


def rank_oracle(m: int, alpha: float) -> int:
    return math.ceil((1 - Fraction(alpha)) * (m + 1))


class TestMiscoverageLevel:
    def test_coverage_property(self):
        assert MiscoverageLevel(0.1).coverage == pytest.approx(0.9)

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.5, float("nan"), float("inf")])
    def test_rejects_out_of_range(self, bad):
        with pytest.raises(ValueError, match="strictly in"):
            MiscoverageLevel(bad)


class TestColumnSpec:
    def test_numeric_must_not_carry_levels(self):
        with pytest.raises(ValueError, match="must not carry levels"):
            ColumnSpec("x", "numeric", levels=("a",))

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            ColumnSpec("x", "ordinal")

    def test_levels_coerced_to_str(self):
        spec = ColumnSpec("x", "categorical", levels=(1, 2))
        assert spec.levels == ("1", "2")


class TestClaimsDataset:
    def test_valid_construction(self, tiny_dataset):
        assert tiny_dataset.n_rows == 6
        assert tiny_dataset.n_predictors == 2
        assert tiny_dataset.frequency.dtype == np.int64

    def test_arrays_are_readonly(self, tiny_dataset):
        with pytest.raises(ValueError):
            tiny_dataset.predictors[0, 0] = 99.0
        with pytest.raises(ValueError):
            tiny_dataset.severity[0] = 99.0

    def test_zero_frequency_needs_zero_severity(self):
        with pytest.raises(ValueError, match="zero frequency must have zero severity"):
            ClaimsDataset(
                predictors=np.ones((2, 1)),
                frequency=np.array([0, 1]),
                severity=np.array([5.0, 5.0]),
                columns=(ColumnSpec("x", "numeric"),),
            )

    def test_non_integer_frequency(self):
        with pytest.raises(ValueError, match="integer counts"):
            ClaimsDataset(
                predictors=np.ones((2, 1)),
                frequency=np.array([1.5, 1.0]),
                severity=np.array([5.0, 5.0]),
                columns=(ColumnSpec("x", "numeric"),),
            )

    @pytest.mark.parametrize(
        "freq, sev",
        [(np.array([-1, 1]), np.array([0.0, 5.0])), (np.array([1, 1]), np.array([-5.0, 5.0]))],
    )
    def test_negative_values(self, freq, sev):
        with pytest.raises(ValueError, match="non-negative"):
            ClaimsDataset(
                predictors=np.ones((2, 1)),
                frequency=freq,
                severity=sev,
                columns=(ColumnSpec("x", "numeric"),),
            )

    def test_categorical_code_out_of_range(self):
        with pytest.raises(ValueError, match="outside its level range"):
            ClaimsDataset(
                predictors=np.array([[0.0], [2.0]]),
                frequency=np.array([1, 1]),
                severity=np.array([1.0, 1.0]),
                columns=(ColumnSpec("c", "categorical", levels=("a", "b")),),
            )

    def test_column_count_mismatch(self):
        with pytest.raises(ValueError, match="column specs"):
            ClaimsDataset(
                predictors=np.ones((2, 2)),
                frequency=np.array([1, 1]),
                severity=np.array([1.0, 1.0]),
                columns=(ColumnSpec("x", "numeric"),),
            )

    def test_duplicate_column_names(self):
        with pytest.raises(ValueError, match="unique"):
            ClaimsDataset(
                predictors=np.ones((2, 2)),
                frequency=np.array([1, 1]),
                severity=np.array([1.0, 1.0]),
                columns=(ColumnSpec("x", "numeric"), ColumnSpec("x", "numeric")),
            )

    def test_take_preserves_columns_and_rows(self, tiny_dataset):
        sub = tiny_dataset.take(np.array([5, 0]))
        assert sub.n_rows == 2
        assert sub.columns == tiny_dataset.columns
        assert sub.severity.tolist() == [300.0, 100.0]
        assert sub.frequency.tolist() == [3, 1]


class TestSplitIndices:
    def test_overlap_rejected(self):
        with pytest.raises(ValueError, match="disjoint"):
            SplitIndices(
                train=np.array([0, 1]), calibration=np.array([1, 2]), test=np.array([3])
            )

    def test_empty_part_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            SplitIndices(
                train=np.array([0]), calibration=np.array([], dtype=np.int64), test=np.array([1])
            )

    def test_n_calibration(self):
        s = SplitIndices(
            train=np.array([0, 1]), calibration=np.array([2, 3, 4]), test=np.array([5])
        )
        assert s.n_calibration == 3


class TestScoreSet:
    def test_stored_sorted(self):
        s = ScoreSet(scores=np.array([3.0, 1.0, 2.0]), provenance="calibration")
        assert s.scores.tolist() == [1.0, 2.0, 3.0]
        assert len(s) == 3

    def test_input_order_irrelevant(self):
        a = ScoreSet(scores=np.array([3.0, 1.0]), provenance="oob")
        b = ScoreSet(scores=np.array([1.0, 3.0]), provenance="oob")
        assert a == b

    @pytest.mark.parametrize("bad", [np.array([]), np.array([-1.0]), np.array([np.nan])])
    def test_invalid_scores(self, bad):
        with pytest.raises(ValueError):
            ScoreSet(scores=bad, provenance="calibration")

    def test_unknown_provenance(self):
        with pytest.raises(ValueError, match="provenance"):
            ScoreSet(scores=np.array([1.0]), provenance="test")


class TestPredictionInterval:
    def test_width_and_contains(self):
        iv = PredictionInterval(lo=1.0, hi=3.0, center=2.0, half_width_raw=1.0)
        assert iv.width == pytest.approx(2.0)
        assert iv.contains(1.0) and iv.contains(3.0) and iv.contains(2.0)
        assert not iv.contains(0.999) and not iv.contains(3.001)

    def test_endpoints_must_be_ordered(self):
        with pytest.raises(ValueError, match="out of order"):
            PredictionInterval(lo=3.0, hi=1.0, center=2.0, half_width_raw=1.0)

    def test_clipped_interval_cannot_be_negative(self):
        with pytest.raises(ValueError, match="zero-clipped"):
            PredictionInterval(
                lo=-1.0, hi=3.0, center=1.0, half_width_raw=2.0, clipped_at_zero=True
            )

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            PredictionInterval(lo=0.0, hi=float("inf"), center=1.0, half_width_raw=1.0)


class TestRandomSplit:
    @pytest.mark.parametrize(
        "n, props, expected",
        [
            (10000, (0.5, 0.25, 0.25), (5000, 2500, 2500)),
            (7, (0.5, 0.25, 0.25), (3, 2, 2)),
            (5, (1 / 3, 1 / 3, 1 / 3), (2, 2, 1)),
            (10, (0.34, 0.33, 0.33), (4, 3, 3)),
        ],
    )
    def test_largest_remainder_sizes(self, n, props, expected):
        s = random_split(n, props, seed=0)
        assert (s.train.size, s.calibration.size, s.test.size) == expected

    @pytest.mark.parametrize("seed", range(8))
    def test_partition_property(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 400))
        raw = rng.uniform(0.05, 1.0, size=3)
        props = tuple(raw / raw.sum())
        try:
            s = random_split(n, props, seed=seed)
        except ValueError:
            # Degenerate splits (a part would get zero rows) are a
            # documented error, not a partition.
            return
        merged = np.concatenate([s.train, s.calibration, s.test])
        assert sorted(merged.tolist()) == list(range(n))
        # Largest-remainder arithmetic, recomputed independently.
        exact = [p * n for p in props]
        floors = [math.floor(e) for e in exact]
        order = sorted(range(3), key=lambda i: (-(exact[i] - floors[i]), i))
        for i in order[: n - sum(floors)]:
            floors[i] += 1
        assert [s.train.size, s.calibration.size, s.test.size] == floors

    def test_deterministic_per_seed(self):
        a = random_split(100, (0.5, 0.25, 0.25), seed=7)
        b = random_split(100, (0.5, 0.25, 0.25), seed=7)
        c = random_split(100, (0.5, 0.25, 0.25), seed=8)
        assert a.train.tolist() == b.train.tolist()
        assert a.train.tolist() != c.train.tolist()

    def test_proportion_validation(self):
        with pytest.raises(ValueError, match="3 proportions"):
            random_split(10, (0.5, 0.5), seed=0)
        with pytest.raises(ValueError, match="strictly positive"):
            random_split(10, (0.5, 0.5, 0.0), seed=0)
        with pytest.raises(ValueError, match="sum to 1"):
            random_split(10, (0.5, 0.3, 0.3), seed=0)

    def test_degenerate_split_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            random_split(3, (0.98, 0.01, 0.01), seed=0)


class TestCalibrationRank:
    @pytest.mark.parametrize(
        "m, alpha, expected",
        [(4, 0.2, 4), (20, 0.2, 17), (2500, 0.1, 2251), (9, 0.5, 5), (1, 0.5, 1)],
    )
    def test_hand_values(self, m, alpha, expected):
        assert calibration_rank(m, alpha) == expected

    @pytest.mark.parametrize("alpha", ALPHA_GRID)
    @pytest.mark.parametrize("m", range(1, 200))
    def test_matches_exact_rational_formula(self, m, alpha):
        want = rank_oracle(m, alpha)
        if want > m:
            with pytest.raises(ValueError, match="too few"):
                calibration_rank(m, alpha)
        else:
            assert calibration_rank(m, alpha) == want

    def test_too_small_reports_minimum(self):
        with pytest.raises(ValueError, match="need at least m=9"):
            calibration_rank(5, 0.1)

    def test_accepts_wrapper(self):
        assert calibration_rank(20, MiscoverageLevel(0.2)) == 17

    def test_rejects_bad_m(self):
        with pytest.raises(ValueError, match="at least one score"):
            calibration_rank(0, 0.5)


class TestConformalQuantile:
    @pytest.mark.parametrize("alpha", ALPHA_GRID)
    @pytest.mark.parametrize("m", range(1, 7))
    def test_equals_sorted_index_all_permutations(self, m, alpha):
        # Multiset with a tie once it is long enough to hold one.
        base = [0.7, 0.1, 0.4, 0.4, 0.9, 0.2][:m]
        want_rank = rank_oracle(m, alpha)
        if want_rank > m:
            return
        expected = sorted(base)[want_rank - 1]
        for perm in itertools.permutations(base):
            assert conformal_quantile(np.array(perm), alpha) == expected

    def test_scaling_commutes_exactly(self):
        scores = np.array([3.0, 1.5, 9.25, 0.125, 4.0])
        for c in (0.001, 7.0, 10000.0):
            assert conformal_quantile(c * scores, 0.25) == c * conformal_quantile(scores, 0.25)

    def test_accepts_scoreset(self):
        s = ScoreSet(scores=np.array([5.0, 1.0, 3.0]), provenance="calibration")
        assert conformal_quantile(s, 0.5) == 3.0

    def test_rejects_empty_and_non_finite(self):
        with pytest.raises(ValueError, match="non-empty"):
            conformal_quantile(np.array([]), 0.5)
        with pytest.raises(ValueError, match="finite"):
            conformal_quantile(np.array([1.0, np.inf]), 0.5)

    def test_too_few_scores(self):
        with pytest.raises(ValueError, match="too few"):
            conformal_quantile(np.array([1.0, 2.0, 3.0]), 0.1)


class TestMetrics:
    def test_empirical_coverage(self):
        ivs = [
            PredictionInterval(lo=0.0, hi=2.0, center=1.0, half_width_raw=1.0),
            PredictionInterval(lo=0.0, hi=2.0, center=1.0, half_width_raw=1.0),
            PredictionInterval(lo=5.0, hi=6.0, center=5.5, half_width_raw=0.5),
        ]
        assert empirical_coverage(ivs, [1.0, 3.0, 5.0]) == pytest.approx(2 / 3)

    def test_coverage_length_mismatch(self):
        ivs = [PredictionInterval(lo=0.0, hi=1.0, center=0.5, half_width_raw=0.5)]
        with pytest.raises(ValueError, match="truth values"):
            empirical_coverage(ivs, [1.0, 2.0])

    def test_average_width_uses_clipped_width(self):
        ivs = [
            PredictionInterval(lo=0.0, hi=3.0, center=1.0, half_width_raw=2.0,
                               clipped_at_zero=True),
            PredictionInterval(lo=1.0, hi=2.0, center=1.5, half_width_raw=0.5),
        ]
        assert average_width(ivs) == pytest.approx(2.0)

    def test_rmse_hand_value(self):
        assert rmse([3.0, 4.0], [0.0, 0.0]) == pytest.approx(3.5355339059327378, rel=1e-15)

    def test_rmse_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            rmse([1.0], [1.0, 2.0])

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError, match="at least one interval"):
            average_width([])
