"""Log-link generalized linear models fit by iteratively reweighted least squares.

Two response families are supported, Poisson for claim frequencies and gamma
for claim severities. Both use the log link, so predictions are always
positive and the linear predictor is unconstrained.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from claimbands.models._common import FeatureMatrix, as_matrix, as_target

logger = logging.getLogger(__name__)

_FAMILIES = ("poisson", "gamma")

# Floor applied to gamma targets so that rows with zero observed severity do
# not break the log-scale deviance; see fit_glm.
GAMMA_TARGET_FLOOR = 1e-8

# Linear predictors are clipped here before exponentiation to keep the mean
# finite; exp(700) is still inside float64 range.
_ETA_MAX = 700.0

# Step-halving attempts per IRLS iteration before a worsening step is
# accepted anyway (at 2^-30 of its original length).
_MAX_HALVINGS = 30

# Relative deviance-change stopping rule, same form as R's glm.fit but
# tight enough that well-behaved fits still exit through the coefficient
# test. It is a safety net: the coefficient test alone can chatter forever
# in the flat basin around the optimum on heavy-tailed responses.
_DEV_RTOL = 1e-13


class GlmFitError(RuntimeError):
    """Raised when IRLS cannot produce finite coefficients."""


@dataclass(frozen=True)
class GlmModel:
    """A fitted log-link GLM.

    Attributes
    ----------
    family : str
        ``"poisson"`` or ``"gamma"``.
    coefficients : ndarray of shape (p + 1,)
        Intercept first, then one coefficient per feature column.
    dispersion : float
        Pearson dispersion estimate. Fixed at 1.0 for Poisson.
    fitted : bool
        Always True for models produced by ``fit_glm``.
    n_iter : int
        IRLS iterations actually performed.
    converged : bool
        Whether the coefficient change or the relative deviance change
        dropped below tolerance.
    """

    family: str
    coefficients: np.ndarray
    dispersion: float
    fitted: bool
    n_iter: int
    converged: bool

    @property
    def n_features(self) -> int:
        return self.coefficients.size - 1

    def predict(self, X: "np.ndarray | FeatureMatrix") -> np.ndarray:
        return glm_predict(self, X)


def _pearson_dispersion(y: np.ndarray, mu: np.ndarray, n_params: int) -> float:
    dof = y.size - n_params
    if dof <= 0:
        return float("nan")
    return float(np.sum(((y - mu) / mu) ** 2) / dof)


def _deviance(family: str, y: np.ndarray, mu: np.ndarray) -> float:
    if family == "poisson":
        term = np.zeros_like(y)
        pos = y > 0
        term[pos] = y[pos] * np.log(y[pos] / mu[pos])
        return 2.0 * float(np.sum(term - (y - mu)))
    return 2.0 * float(np.sum(-np.log(y / mu) + (y - mu) / mu))


def fit_glm(
    X: "np.ndarray | FeatureMatrix",
    y: np.ndarray,
    family: str,
    max_iter: int = 50,
    tol: float = 1e-8,
) -> GlmModel:
    """Fit a log-link GLM by IRLS.

    Parameters
    ----------
    X : ndarray or FeatureMatrix of shape (n, p)
        Feature matrix without an intercept column; the intercept is added
        internally.
    y : ndarray of shape (n,)
        Response. Poisson requires ``y >= 0``. Gamma requires positive
        responses; zero values are clamped up to ``GAMMA_TARGET_FLOOR``
        with a logged warning rather than rejected, because absolute
        residual targets can legitimately be zero.
    family : str
        ``"poisson"`` or ``"gamma"``.
    max_iter : int
        Maximum IRLS iterations.
    tol : float
        Convergence threshold on the max absolute coefficient change.
        Iteration also stops once the relative deviance change falls
        below an internal threshold; steps that would worsen the
        deviance are halved first.

    Returns
    -------
    GlmModel

    Raises
    ------
    ValueError
        On an unknown family, invalid response values, or an
        underdetermined system (n <= p + 1).
    GlmFitError
        When the weighted design becomes singular or the working response
        stops being finite.
    """
    if family not in _FAMILIES:
        raise ValueError(f"family must be one of {_FAMILIES}, got {family!r}")
    X = as_matrix(X)
    y = as_target(y, X.shape[0])
    n, p = X.shape
    if n <= p + 1:
        raise ValueError(
            f"underdetermined GLM: {n} rows for {p + 1} coefficients (including intercept)"
        )
    if family == "poisson":
        if np.any(y < 0):
            raise ValueError("poisson responses must be non-negative")
    else:
        if np.any(y < 0):
            raise ValueError("gamma responses must be non-negative")
        n_zero = int(np.sum(y < GAMMA_TARGET_FLOOR))
        if n_zero:
            logger.warning(
                "gamma fit: clamping %d responses below %g up to the floor",
                n_zero,
                GAMMA_TARGET_FLOOR,
            )
            y = np.maximum(y, GAMMA_TARGET_FLOOR)

    design = np.hstack([np.ones((n, 1)), X])
    n_params = p + 1

    # Conventional IRLS start: shrink the response toward its mean so the
    # initial log is defined even with zero counts.
    mu = (y + max(float(np.mean(y)), GAMMA_TARGET_FLOOR)) / 2.0
    mu = np.maximum(mu, GAMMA_TARGET_FLOOR)
    eta = np.log(mu)
    beta = np.zeros(n_params)
    n_iter = 0
    converged = False

    dev = _deviance(family, y, mu)
    for n_iter in range(1, max_iter + 1):
        z = eta + (y - mu) / mu
        if family == "poisson":
            w = mu
        else:
            # Gamma with log link has constant IRLS weights; the dispersion
            # cancels out of the weighted normal equations.
            w = np.ones(n)
        sw = np.sqrt(w)
        lhs = design * sw[:, None]
        rhs = z * sw
        try:
            beta_new = np.linalg.solve(lhs.T @ lhs, lhs.T @ rhs)
        except np.linalg.LinAlgError as exc:
            raise GlmFitError(
                f"singular weighted design at IRLS iteration {n_iter}"
            ) from exc
        if not np.all(np.isfinite(beta_new)):
            raise GlmFitError(
                f"non-finite coefficients at IRLS iteration {n_iter}"
            )
        if n_iter > 1:
            # Halve any step that worsens the deviance. The first iteration
            # is exempt because beta is not a meaningful starting point; the
            # working response initialization plays that role.
            for _ in range(_MAX_HALVINGS):
                eta_new = np.clip(design @ beta_new, -_ETA_MAX, _ETA_MAX)
                dev_new = _deviance(family, y, np.exp(eta_new))
                if np.isfinite(dev_new) and dev_new <= dev:
                    break
                beta_new = 0.5 * (beta_new + beta)
        delta = float(np.max(np.abs(beta_new - beta)))
        beta = beta_new
        eta = np.clip(design @ beta, -_ETA_MAX, _ETA_MAX)
        mu = np.exp(eta)
        if not np.all(np.isfinite(mu)):
            raise GlmFitError(f"non-finite mean at IRLS iteration {n_iter}")
        dev_prev, dev = dev, _deviance(family, y, mu)
        if delta < tol:
            converged = True
            break
        if n_iter > 1 and abs(dev_prev - dev) <= _DEV_RTOL * (abs(dev) + 0.1):
            converged = True
            break

    if not converged:
        logger.warning(
            "IRLS did not converge in %d iterations (last max coefficient change %.3g)",
            max_iter,
            delta,
        )

    dispersion = 1.0 if family == "poisson" else _pearson_dispersion(y, mu, n_params)
    return GlmModel(
        family=family,
        coefficients=beta,
        dispersion=dispersion,
        fitted=True,
        n_iter=n_iter,
        converged=converged,
    )


def glm_predict(model: GlmModel, X: "np.ndarray | FeatureMatrix") -> np.ndarray:
    """Predicted means exp(intercept + X @ coefficients).

    Raises
    ------
    ValueError
        If the model is not fitted or the feature count disagrees with the
        coefficient vector.
    """
    if not model.fitted:
        raise ValueError("model is not fitted")
    X = as_matrix(X)
    if X.shape[1] != model.n_features:
        raise ValueError(
            f"feature count mismatch: model expects {model.n_features}, got {X.shape[1]}"
        )
    eta = model.coefficients[0] + X @ model.coefficients[1:]
    return np.exp(np.clip(eta, -_ETA_MAX, _ETA_MAX))
