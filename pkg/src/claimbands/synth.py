"""Synthetic zero-inflated claims data for calibration experiments.

The generator produces ten uniform predictors of which only the first five
matter. Claim counts follow a zero-inflated Poisson whose rate depends on
the first predictor; positive-count rows draw an exponential severity whose
mean is a nonlinear function of predictors two through five. Roughly two
thirds of all rows end up with zero claims.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from claimbands.core import ClaimsDataset, ColumnSpec

__all__ = ["SynthConfig", "generate"]


@dataclass(frozen=True)
class SynthConfig:
    """Configuration for the synthetic claims generator.

    Parameters
    ----------
    n_rows : int
        Number of policyholder rows.
    seed : int
        Seed for the generator; the output is bit-identical per seed.
    n_features : int
        Number of uniform predictors (at least 5; features beyond the
        fifth are pure decoys).
    zero_inflation : float
        Probability mass forced onto zero claim counts before the Poisson
        draw, in [0, 1).
    feature_high : float
        Upper bound of the uniform predictor range [0, feature_high].
    """

    n_rows: int
    seed: int
    n_features: int = 10
    zero_inflation: float = 0.5
    feature_high: float = 10.0

    def __post_init__(self) -> None:
        if int(self.n_rows) < 1:
            raise ValueError(f"n_rows must be positive, got {self.n_rows}")
        if int(self.n_features) < 5:
            raise ValueError(
                f"need at least 5 features (severity uses the first five), got {self.n_features}"
            )
        if not 0.0 <= float(self.zero_inflation) < 1.0:
            raise ValueError(
                f"zero_inflation must lie in [0, 1), got {self.zero_inflation}"
            )
        if not float(self.feature_high) > 0.0:
            raise ValueError(f"feature_high must be positive, got {self.feature_high}")
        object.__setattr__(self, "n_rows", int(self.n_rows))
        object.__setattr__(self, "n_features", int(self.n_features))
        object.__setattr__(self, "zero_inflation", float(self.zero_inflation))
        object.__setattr__(self, "feature_high", float(self.feature_high))


def severity_mean(X: np.ndarray) -> np.ndarray:
    """Conditional severity mean 4 exp(x2) + sin(x3 x4) + 5 x5^3.

    Columns are positional: x2 is X[:, 1] and so on. On the default
    [0, 10] feature range the mean is always positive (at least 3).
    """
    return 4.0 * np.exp(X[:, 1]) + np.sin(X[:, 2] * X[:, 3]) + 5.0 * X[:, 4] ** 3


def frequency_rate(X: np.ndarray) -> np.ndarray:
    """Poisson rate exp(0.01 x1) for rows not forced to zero."""
    return np.exp(0.01 * X[:, 0])


def generate(config: SynthConfig) -> ClaimsDataset:
    """Generate a synthetic claims dataset.

    Draw order is fixed (predictors, zero-inflation mask, Poisson counts,
    exponential severities), so a given config always produces the same
    dataset bit for bit.

    Returns
    -------
    ClaimsDataset
        Rows with zero frequency carry zero severity; positive-frequency
        rows carry an exponential draw with the conditional mean above.
    """
    rng = np.random.default_rng(config.seed)
    n, p = config.n_rows, config.n_features

    X = rng.uniform(0.0, config.feature_high, size=(n, p))
    forced_zero = rng.random(n) < config.zero_inflation
    counts = rng.poisson(frequency_rate(X))
    freq = np.where(forced_zero, 0, counts).astype(np.int64)
    draws = rng.exponential(severity_mean(X))
    sev = np.where(freq > 0, draws, 0.0)

    columns = tuple(ColumnSpec(name=f"x{j + 1}", kind="numeric") for j in range(p))
    return ClaimsDataset(predictors=X, frequency=freq, severity=sev, columns=columns)
