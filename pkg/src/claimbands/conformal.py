"""Conformal calibration for single-stage and two-stage severity models.

Four calibration modes are provided. The single-stage modes wrap any
regression model of a numeric response: plain split conformal (constant
interval width) and a locally weighted variant whose width adapts through a
fitted variability model. The two-stage modes target claim severities built
on top of a claim frequency model: a split variant that calibrates on a
held-out sample and an out-of-bag variant that reuses the full training
sample through the forests' bootstrap bookkeeping.

All modes end the same way: nonconformity scores are reduced to a single
calibrated radius (an order statistic of the score set), so the resulting
intervals inherit the finite-sample coverage guarantee of split conformal
prediction whenever the scored rows are exchangeable with the target row.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from claimbands.core import (
    ClaimsDataset,
    MiscoverageLevel,
    PredictionInterval,
    ScoreSet,
    SplitIndices,
    calibration_rank,
    conformal_quantile,
)
from claimbands.ingest import Encoding, encode
from claimbands.models import FeatureMatrix, as_matrix, fit_forest, fit_glm
from claimbands.models.forest import Forest, forest_predict, oob_predict

__all__ = [
    "TwoStageScore",
    "ConformalPredictor",
    "single_stage_split",
    "single_stage_locally_weighted",
    "two_stage_split",
    "two_stage_oob",
    "predict_interval",
]

# Variability predictions are clamped below at
# max(_FLOOR_ABS, _FLOOR_REL * mean(training variability targets))
# before any division, so near-zero fitted scale cannot blow up a score.
_FLOOR_ABS = 1e-8
_FLOOR_REL = 1e-6

_MODES = (
    "single_split",
    "single_locally_weighted",
    "two_stage_split",
    "two_stage_oob",
)

ModelFactory = Callable[[np.ndarray, np.ndarray], object]


@dataclass(frozen=True)
class TwoStageScore:
    """One two-stage nonconformity score, kept for audit.

    ``index`` is the dataset row the score came from, ``numerator`` the
    absolute severity residual, ``denominator`` the floored variability
    prediction, and ``score`` their ratio.
    """

    index: int
    numerator: float
    denominator: float
    score: float


@dataclass(frozen=True, eq=False)
class ConformalPredictor:
    """A calibrated interval predictor.

    Holds the fitted stage models, the score set, and the calibrated
    radius. Use :func:`predict_interval` (or the method of the same name)
    to produce intervals, and :meth:`at_alpha` to re-calibrate the stored
    scores at a different miscoverage level without refitting.
    """

    mode: str
    alpha: float
    radius: float
    scores: ScoreSet
    clip_at_zero: bool
    center_model: object
    scale_model: object | None = None
    frequency_model: object | None = None
    encoding: Encoding | None = None
    variability_floor: float = _FLOOR_ABS
    score_details: tuple[TwoStageScore, ...] | None = None

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")

    def at_alpha(self, alpha: "float | MiscoverageLevel") -> "ConformalPredictor":
        """Re-calibrate at a different level, reusing the stored scores."""
        radius = conformal_quantile(self.scores, alpha)
        if isinstance(alpha, MiscoverageLevel):
            alpha = alpha.alpha
        return replace(self, alpha=float(alpha), radius=radius)

    def predict_interval(
        self, X: "np.ndarray | FeatureMatrix | ClaimsDataset"
    ) -> list[PredictionInterval]:
        return predict_interval(self, X)


def _as_alpha_float(alpha: "float | MiscoverageLevel") -> float:
    if isinstance(alpha, MiscoverageLevel):
        return alpha.alpha
    return MiscoverageLevel(float(alpha)).alpha


def _variability_floor(targets: np.ndarray) -> float:
    return max(_FLOOR_ABS, _FLOOR_REL * float(np.mean(targets)))


def _predict_vector(model: object, X: np.ndarray) -> np.ndarray:
    pred = model.predict(X)
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    if pred.size != X.shape[0]:
        raise ValueError(
            f"model returned {pred.size} predictions for {X.shape[0]} rows"
        )
    if not np.all(np.isfinite(pred)):
        raise ValueError("model returned non-finite predictions")
    return pred


def single_stage_split(
    X_train: "np.ndarray | FeatureMatrix",
    y_train: np.ndarray,
    X_cal: "np.ndarray | FeatureMatrix",
    y_cal: np.ndarray,
    model_factory: ModelFactory,
    alpha: "float | MiscoverageLevel",
) -> ConformalPredictor:
    """Split conformal calibration of any regression model.

    The model is fit on the training rows; absolute residuals on the
    calibration rows become the score set, and the interval at a new point
    is the point prediction plus or minus the calibrated radius, a constant
    width for every point.

    Parameters
    ----------
    X_train, y_train : training rows for the model fit.
    X_cal, y_cal : held-out calibration rows, disjoint from training.
    model_factory : callable (X, y) -> fitted model with ``predict``.
    alpha : miscoverage level in (0, 1).

    Returns
    -------
    ConformalPredictor
    """
    alpha = _as_alpha_float(alpha)
    X_train = as_matrix(X_train)
    X_cal = as_matrix(X_cal)
    y_train = np.asarray(y_train, dtype=np.float64)
    y_cal = np.asarray(y_cal, dtype=np.float64)
    calibration_rank(y_cal.size, alpha)

    model = model_factory(X_train, y_train)
    residuals = np.abs(y_cal - _predict_vector(model, X_cal))
    scores = ScoreSet(scores=residuals, provenance="calibration")
    return ConformalPredictor(
        mode="single_split",
        alpha=alpha,
        radius=conformal_quantile(scores, alpha),
        scores=scores,
        clip_at_zero=False,
        center_model=model,
    )


def single_stage_locally_weighted(
    X_train: "np.ndarray | FeatureMatrix",
    y_train: np.ndarray,
    X_cal: "np.ndarray | FeatureMatrix",
    y_cal: np.ndarray,
    model_factory: ModelFactory,
    variability_factory: ModelFactory,
    alpha: "float | MiscoverageLevel",
) -> ConformalPredictor:
    """Locally weighted split conformal calibration.

    A variability model is fit to the training absolute residuals, scores
    are residuals divided by the predicted variability, and interval width
    scales with the variability prediction at each new point. Scale does
    not matter: multiplying the variability model's output by any positive
    constant leaves every interval unchanged, because the radius rescales
    by the inverse constant.
    """
    alpha = _as_alpha_float(alpha)
    X_train = as_matrix(X_train)
    X_cal = as_matrix(X_cal)
    y_train = np.asarray(y_train, dtype=np.float64)
    y_cal = np.asarray(y_cal, dtype=np.float64)
    calibration_rank(y_cal.size, alpha)

    model = model_factory(X_train, y_train)
    delta_train = np.abs(y_train - _predict_vector(model, X_train))
    floor = _variability_floor(delta_train)
    scale_model = variability_factory(X_train, delta_train)

    num = np.abs(y_cal - _predict_vector(model, X_cal))
    den = np.maximum(_predict_vector(scale_model, X_cal), floor)
    scores = ScoreSet(scores=num / den, provenance="calibration")
    return ConformalPredictor(
        mode="single_locally_weighted",
        alpha=alpha,
        radius=conformal_quantile(scores, alpha),
        scores=scores,
        clip_at_zero=False,
        center_model=model,
        scale_model=scale_model,
        variability_floor=floor,
    )


def _resolve_factory(
    choice: "str | ModelFactory",
    stage: str,
    seed: int | None,
    forest_params: dict | None,
    glm_params: dict | None,
) -> ModelFactory:
    """Map a model choice name (or custom factory) to a fit callable."""
    if callable(choice):
        return choice
    forest_params = dict(forest_params or {})
    glm_params = dict(glm_params or {})
    if choice == "forest":
        forest_params.setdefault("seed", seed)

        def factory(X: np.ndarray, y: np.ndarray) -> Forest:
            return fit_forest(X, y, **forest_params)

        return factory
    if choice in ("poisson_glm", "gamma_glm"):
        family = choice.split("_")[0]

        def factory(X: np.ndarray, y: np.ndarray):
            return fit_glm(X, y, family=family, **glm_params)

        return factory
    raise ValueError(
        f"unknown {stage} model {choice!r}: expected 'forest', 'poisson_glm', "
        "'gamma_glm', or a callable (X, y) -> model"
    )


def _stage_seeds(seed: int | None) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(s) for s in ss.generate_state(3)]


def two_stage_split(
    dataset: ClaimsDataset,
    split: SplitIndices,
    alpha: "float | MiscoverageLevel",
    frequency_model: "str | ModelFactory" = "forest",
    severity_model: "str | ModelFactory" = "forest",
    variability_model: "str | ModelFactory | None" = None,
    seed: int | None = None,
    forest_params: dict | None = None,
    glm_params: dict | None = None,
) -> ConformalPredictor:
    """Two-stage split conformal prediction of claim severities.

    Stage one fits a frequency model on the training rows. Stage two fits
    a severity model on the positive-frequency training rows, using the
    observed claim count as an extra feature, and a variability model on
    the absolute severity residuals of those same rows. Every calibration
    row, including zero-frequency rows, is then scored with the predicted
    frequency plugged in for the unknown count:

        score = |severity - severity_hat(x, freq_hat(x))| /
                variability_hat(x, freq_hat(x))

    The calibrated radius is the usual conformal order statistic of these
    scores. Intervals at new points are centered at the plug-in severity
    prediction, scaled by the local variability prediction, and clipped
    below at zero since severities are non-negative.

    Parameters
    ----------
    dataset : ClaimsDataset
    split : SplitIndices
        Train and calibration rows are used here; test rows are ignored.
    alpha : miscoverage level in (0, 1).
    frequency_model, severity_model, variability_model :
        Either ``"forest"``, ``"poisson_glm"``, ``"gamma_glm"``, or a
        custom callable (X, y) -> fitted model. ``variability_model``
        defaults to the severity choice.
    seed : int or None
        Master seed for the per-stage forest streams.
    forest_params, glm_params : dict or None
        Hyperparameters passed to the stage fitters.

    Returns
    -------
    ConformalPredictor

    Raises
    ------
    ValueError
        If the calibration sample is too small for alpha, split indices
        fall outside the dataset, or no training row has a positive claim
        count.
    """
    alpha = _as_alpha_float(alpha)
    calibration_rank(split.n_calibration, alpha)
    all_idx = np.concatenate([split.train, split.calibration, split.test])
    if all_idx.max() >= dataset.n_rows:
        raise ValueError("split indices fall outside the dataset")
    if variability_model is None:
        variability_model = severity_model
    s_freq, s_sev, s_var = _stage_seeds(seed)
    freq_factory = _resolve_factory(frequency_model, "frequency", s_freq, forest_params, glm_params)
    sev_factory = _resolve_factory(severity_model, "severity", s_sev, forest_params, glm_params)
    var_factory = _resolve_factory(variability_model, "variability", s_var, forest_params, glm_params)

    enc = encode(dataset, split.train)
    X_all = enc.transform(dataset.predictors).values
    freq = dataset.frequency.astype(np.float64)
    sev = dataset.severity

    freq_model = freq_factory(X_all[split.train], freq[split.train])

    pos = split.train[dataset.frequency[split.train] > 0]
    if pos.size == 0:
        raise ValueError("no training row has a positive claim count; cannot fit a severity stage")
    X_sev_train = np.hstack([X_all[pos], freq[pos, None]])
    sev_model = sev_factory(X_sev_train, sev[pos])

    delta = np.abs(sev[pos] - _predict_vector(sev_model, X_sev_train))
    floor = _variability_floor(delta)
    var_model = var_factory(X_sev_train, delta)

    cal = split.calibration
    mu_cal = _predict_vector(freq_model, X_all[cal])
    X_sev_cal = np.hstack([X_all[cal], mu_cal[:, None]])
    num = np.abs(sev[cal] - _predict_vector(sev_model, X_sev_cal))
    den = np.maximum(_predict_vector(var_model, X_sev_cal), floor)
    raw = num / den
    details = tuple(
        TwoStageScore(index=int(i), numerator=float(a), denominator=float(b), score=float(r))
        for i, a, b, r in zip(cal, num, den, raw)
    )
    scores = ScoreSet(scores=raw, provenance="calibration")
    return ConformalPredictor(
        mode="two_stage_split",
        alpha=alpha,
        radius=conformal_quantile(scores, alpha),
        scores=scores,
        clip_at_zero=True,
        center_model=sev_model,
        scale_model=var_model,
        frequency_model=freq_model,
        encoding=enc,
        variability_floor=floor,
        score_details=details,
    )


def two_stage_oob(
    dataset: ClaimsDataset,
    alpha: "float | MiscoverageLevel",
    n_trees: int = 1000,
    mtry: int | None = None,
    min_leaf: int = 5,
    max_depth: int | None = None,
    seed: int | None = None,
    oob_positive_only: bool = False,
) -> ConformalPredictor:
    """Two-stage out-of-bag conformal prediction with forests.

    No data is held out. Three forests are fit on the full sample in
    sequence: frequency on the observed counts, severity on (features,
    OOB frequency prediction), and variability on the absolute OOB
    severity residuals. Each row's score uses only trees that never saw
    the row, so the scores behave like held-out scores while every row
    contributes to training:

        score_i = |severity_i - oob_severity_hat_i| / oob_variability_hat_i

    The radius is the conformal order statistic over all n scores.
    Prediction at new points uses the full forests.

    Parameters
    ----------
    dataset : ClaimsDataset
    alpha : miscoverage level in (0, 1).
    n_trees : int
        Trees per forest; all three stages use the same count. With few
        trees some rows may never be out-of-bag, which is an error
        (B >= 100 keeps that probability negligible).
    mtry, min_leaf, max_depth :
        Forest hyperparameters shared by the three stages.
    seed : int or None
        Master seed; per-stage streams are derived from it.
    oob_positive_only : bool
        When True, mirror the split algorithm by fitting the severity and
        variability forests only on rows with positive observed counts.
        Rows excluded from a forest's training sample are scored with the
        full forest, since every tree is out-of-bag for them. Default
        False fits on all rows.

    Returns
    -------
    ConformalPredictor
    """
    alpha = _as_alpha_float(alpha)
    n = dataset.n_rows
    calibration_rank(n, alpha)
    s_freq, s_sev, s_var = _stage_seeds(seed)
    common = dict(n_trees=n_trees, mtry=mtry, min_leaf=min_leaf, max_depth=max_depth)

    enc = encode(dataset, None)
    X_all = enc.transform(dataset.predictors).values
    freq = dataset.frequency.astype(np.float64)
    sev = dataset.severity

    freq_forest = fit_forest(X_all, freq, seed=s_freq, **common)
    d_hat = oob_predict(freq_forest, X_all)

    X_sev = np.hstack([X_all, d_hat[:, None]])
    if oob_positive_only:
        fit_rows = np.nonzero(dataset.frequency > 0)[0]
        if fit_rows.size == 0:
            raise ValueError("no row has a positive claim count; cannot fit a severity stage")
    else:
        fit_rows = np.arange(n)

    def _fit_and_oob(targets: np.ndarray, stage_seed: int) -> tuple[Forest, np.ndarray]:
        """Fit a stage forest on fit_rows; OOB-predict its own training rows
        and full-forest-predict the rest (every tree is OOB for them)."""
        forest = fit_forest(X_sev[fit_rows], targets[fit_rows], seed=stage_seed, **common)
        preds = np.empty(n)
        preds[fit_rows] = oob_predict(forest, X_sev[fit_rows])
        outside = np.setdiff1d(np.arange(n), fit_rows, assume_unique=True)
        if outside.size:
            preds[outside] = forest_predict(forest, X_sev[outside])
        return forest, preds

    sev_forest, psi_hat = _fit_and_oob(sev, s_sev)
    delta = np.abs(sev - psi_hat)
    floor = _variability_floor(delta)

    var_forest = fit_forest(X_sev[fit_rows], delta[fit_rows], seed=s_var, **common)
    sigma_hat = np.empty(n)
    sigma_hat[fit_rows] = oob_predict(var_forest, X_sev[fit_rows])
    outside = np.setdiff1d(np.arange(n), fit_rows, assume_unique=True)
    if outside.size:
        sigma_hat[outside] = forest_predict(var_forest, X_sev[outside])

    den = np.maximum(sigma_hat, floor)
    raw = delta / den
    details = tuple(
        TwoStageScore(index=int(i), numerator=float(a), denominator=float(b), score=float(r))
        for i, a, b, r in zip(range(n), delta, den, raw)
    )
    scores = ScoreSet(scores=raw, provenance="oob")
    return ConformalPredictor(
        mode="two_stage_oob",
        alpha=alpha,
        radius=conformal_quantile(scores, alpha),
        scores=scores,
        clip_at_zero=True,
        center_model=sev_forest,
        scale_model=var_forest,
        frequency_model=freq_forest,
        encoding=enc,
        variability_floor=floor,
        score_details=details,
    )


def predict_interval(
    predictor: ConformalPredictor,
    X: "np.ndarray | FeatureMatrix | ClaimsDataset",
) -> list[PredictionInterval]:
    """Prediction intervals at the predictor's calibrated level.

    For single-stage predictors ``X`` is the model's feature matrix. For
    two-stage predictors ``X`` is raw predictor rows in the original
    dataset column layout (or a ClaimsDataset), and the stored encoding
    and frequency model fill in the rest.

    Every interval reports its center and raw half width; two-stage
    intervals are clipped below at zero, with the flag recording whether
    the lower endpoint was clipped.
    """
    if predictor.mode in ("single_split", "single_locally_weighted"):
        Xm = as_matrix(X)
        center = _predict_vector(predictor.center_model, Xm)
        if predictor.mode == "single_split":
            eps = np.full(center.size, predictor.radius)
        else:
            sigma = np.maximum(
                _predict_vector(predictor.scale_model, Xm), predictor.variability_floor
            )
            eps = predictor.radius * sigma
    else:
        if isinstance(X, ClaimsDataset):
            X_raw = X.predictors
        elif isinstance(X, FeatureMatrix):
            X_raw = X.values
        else:
            X_raw = np.asarray(X, dtype=np.float64)
            if X_raw.ndim == 1:
                X_raw = X_raw.reshape(1, -1)
        X_enc = predictor.encoding.transform(X_raw).values
        mu = _predict_vector(predictor.frequency_model, X_enc)
        X_sev = np.hstack([X_enc, mu[:, None]])
        center = _predict_vector(predictor.center_model, X_sev)
        sigma = np.maximum(
            _predict_vector(predictor.scale_model, X_sev), predictor.variability_floor
        )
        eps = predictor.radius * sigma

    out: list[PredictionInterval] = []
    for c, e in zip(center, eps):
        lo_raw = c - e
        if predictor.clip_at_zero and lo_raw < 0:
            out.append(
                PredictionInterval(
                    lo=0.0, hi=c + e, center=c, half_width_raw=e, clipped_at_zero=True
                )
            )
        else:
            out.append(
                PredictionInterval(
                    lo=lo_raw, hi=c + e, center=c, half_width_raw=e, clipped_at_zero=False
                )
            )
    return out
