"""Shared fixtures for the test suite."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

# Make the sibling oracle modules (tests.helpers, tests.oob_example)
# importable regardless of how pytest was invoked.
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from claimbands.core import ClaimsDataset, ColumnSpec


@pytest.fixture
def tiny_dataset() -> ClaimsDataset:
    """Six rows, two numeric predictors, a zero-frequency row included."""
    X = np.array(
        [
            [1.0, 10.0],
            [2.0, 20.0],
            [3.0, 30.0],
            [4.0, 40.0],
            [5.0, 50.0],
            [6.0, 60.0],
        ]
    )
    freq = np.array([1, 0, 2, 1, 0, 3])
    sev = np.array([100.0, 0.0, 250.0, 80.0, 0.0, 300.0])
    cols = (ColumnSpec("a", "numeric"), ColumnSpec("b", "numeric"))
    return ClaimsDataset(predictors=X, frequency=freq, severity=sev, columns=cols)


@pytest.fixture
def mixed_dataset() -> ClaimsDataset:
    """Rows with one numeric and one categorical predictor (3 levels)."""
    X = np.array(
        [
            [0.5, 0.0],
            [1.5, 1.0],
            [2.5, 2.0],
            [3.5, 0.0],
            [4.5, 1.0],
        ]
    )
    freq = np.array([1, 2, 0, 1, 1])
    sev = np.array([10.0, 20.0, 0.0, 15.0, 12.0])
    cols = (
        ColumnSpec("age", "numeric"),
        ColumnSpec("fuel", "categorical", levels=("diesel", "petrol", "gas")),
    )
    return ClaimsDataset(predictors=X, frequency=freq, severity=sev, columns=cols)
