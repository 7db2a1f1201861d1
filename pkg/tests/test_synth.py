"""Synthetic generator: determinism, structural invariants, and agreement
with quadrature values for the zero proportion and the mean surfaces."""

from __future__ import annotations

import numpy as np
import pytest

from claimbands.synth import SynthConfig, frequency_rate, generate, severity_mean

# Quadrature constants for the default configuration, computed once by
# adaptive numeric integration over the uniform feature ranges and pinned:
#   P(zero | zi)    = zi + (1 - zi)/10 * int_0^10 exp(-e^(0.01 x)) dx
#   E[severity mean] = 4 (e^10 - 1)/10
#                      + (1/100) int int sin(u v) du dv + 5 * 10^4/40
ZERO_PROP_ZI_HALF = 0.6747505465528209
ZERO_PROP_ZI_NONE = 0.3495010931056417
MEAN_SEVERITY_SURFACE = 10060.238193269442
MEAN_POISSON_RATE = 1.0517091807564771  # (e^0.1 - 1) / 0.1


class TestDeterminism:
    def test_bit_identical_per_config(self):
        cfg = SynthConfig(n_rows=500, seed=123)
        a = generate(cfg)
        b = generate(cfg)
        np.testing.assert_array_equal(a.predictors, b.predictors)
        np.testing.assert_array_equal(a.frequency, b.frequency)
        np.testing.assert_array_equal(a.severity, b.severity)

    def test_seed_changes_output(self):
        a = generate(SynthConfig(n_rows=100, seed=0))
        b = generate(SynthConfig(n_rows=100, seed=1))
        assert not np.array_equal(a.severity, b.severity)


class TestValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_rows": 0, "seed": 0},
            {"n_rows": 10, "seed": 0, "n_features": 4},
            {"n_rows": 10, "seed": 0, "zero_inflation": 1.0},
            {"n_rows": 10, "seed": 0, "zero_inflation": -0.1},
            {"n_rows": 10, "seed": 0, "feature_high": 0.0},
        ],
    )
    def test_bad_config(self, kwargs):
        with pytest.raises(ValueError):
            SynthConfig(**kwargs)


class TestInvariants:
    def test_zero_frequency_rows_have_zero_severity(self):
        ds = generate(SynthConfig(n_rows=2000, seed=7))
        assert np.all(ds.severity[ds.frequency == 0] == 0.0)
        assert np.all(ds.frequency[ds.severity > 0] > 0)

    def test_columns_are_numeric_and_named(self):
        ds = generate(SynthConfig(n_rows=10, seed=0, n_features=6))
        assert [c.name for c in ds.columns] == [f"x{j}" for j in range(1, 7)]
        assert all(c.kind == "numeric" for c in ds.columns)

    def test_features_in_range(self):
        ds = generate(SynthConfig(n_rows=1000, seed=3, feature_high=4.0))
        assert ds.predictors.min() >= 0.0
        assert ds.predictors.max() <= 4.0


class TestAgainstQuadrature:
    def test_zero_proportion_default(self):
        ds = generate(SynthConfig(n_rows=200_000, seed=42))
        # Binomial s.e. at n = 200k is ~0.001; allow four of them.
        assert float(np.mean(ds.frequency == 0)) == pytest.approx(
            ZERO_PROP_ZI_HALF, abs=0.005
        )

    def test_zero_proportion_without_inflation(self):
        ds = generate(SynthConfig(n_rows=200_000, seed=43, zero_inflation=0.0))
        assert float(np.mean(ds.frequency == 0)) == pytest.approx(
            ZERO_PROP_ZI_NONE, abs=0.005
        )

    def test_mean_severity_surface(self):
        rng = np.random.default_rng(44)
        X = rng.uniform(0.0, 10.0, size=(200_000, 5))
        got = float(np.mean(severity_mean(X)))
        # The surface's own Monte Carlo s.e. is about 40 here.
        assert got == pytest.approx(MEAN_SEVERITY_SURFACE, abs=250.0)

    def test_severity_draws_center_on_surface(self):
        ds = generate(SynthConfig(n_rows=100_000, seed=45))
        pos = ds.frequency > 0
        ratio = ds.severity[pos] / severity_mean(np.asarray(ds.predictors))[pos]
        # Unit-mean exponential noise: mean ratio 1, s.e. ~ 1/sqrt(k).
        assert float(np.mean(ratio)) == pytest.approx(1.0, abs=0.02)

    def test_mean_poisson_rate(self):
        rng = np.random.default_rng(46)
        X = rng.uniform(0.0, 10.0, size=(200_000, 1))
        assert float(np.mean(frequency_rate(X))) == pytest.approx(
            MEAN_POISSON_RATE, abs=0.001
        )
