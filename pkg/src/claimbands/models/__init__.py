"""Regression models: log-link GLMs and regression forests with OOB bookkeeping."""

from claimbands.models._common import FeatureMatrix, as_matrix
from claimbands.models.glm import GlmFitError, GlmModel, fit_glm, glm_predict
from claimbands.models.tree import CartTree, fit_cart, tree_predict
from claimbands.models.forest import (
    Forest,
    fit_forest,
    forest_predict,
    oob_indices,
    oob_predict,
)

__all__ = [
    "FeatureMatrix",
    "as_matrix",
    "GlmFitError",
    "GlmModel",
    "fit_glm",
    "glm_predict",
    "CartTree",
    "fit_cart",
    "tree_predict",
    "Forest",
    "fit_forest",
    "forest_predict",
    "oob_indices",
    "oob_predict",
]
