"""Experiment configs, the run/compare drivers, and the bootstrap baseline.

A run is fully described by an ExperimentConfig (JSON on disk): where the
data comes from, how it is split, which calibration method and stage models
to use, and the seeds. Running produces a Report whose numeric content is a
pure function of the config; wall-clock timings are carried alongside but
excluded from the canonical serialization so that byte-level comparisons of
two identically-seeded runs succeed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from claimbands.core import (
    ClaimsDataset,
    PredictionInterval,
    SplitIndices,
    average_width,
    empirical_coverage,
    random_split,
    rmse,
)
from claimbands.conformal import (
    ConformalPredictor,
    predict_interval,
    two_stage_oob,
    two_stage_split,
)
from claimbands.ingest import bundled_schema, encode, load_csv, load_schema
from claimbands.models import fit_forest, fit_glm
from claimbands.synth import SynthConfig, generate

logger = logging.getLogger(__name__)

__all__ = [
    "DatasetConfig",
    "SplitConfig",
    "ForestConfig",
    "GlmConfig",
    "ExperimentConfig",
    "ReportRow",
    "Report",
    "run",
    "compare",
    "bootstrap_baseline",
    "validate_coverage",
    "emit_plot_data",
]

_METHODS = ("two_stage_split", "two_stage_oob", "bootstrap")


def _check_keys(raw: dict, allowed: set[str], where: str) -> None:
    unknown = set(raw) - allowed
    if unknown:
        raise ValueError(f"unknown {where} config keys: {sorted(unknown)}")


@dataclass(frozen=True)
class DatasetConfig:
    """Data source: synthetic generator settings or a CSV path plus schema."""

    kind: str = "synthetic"
    n_rows: int = 10000
    seed: int = 0
    zero_inflation: float = 0.5
    n_features: int = 10
    path: str | None = None
    schema: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("synthetic", "csv"):
            raise ValueError(f"dataset kind must be 'synthetic' or 'csv', got {self.kind!r}")
        if self.kind == "csv" and (self.path is None or self.schema is None):
            raise ValueError("csv dataset config needs both 'path' and 'schema'")

    @classmethod
    def from_dict(cls, raw: dict) -> "DatasetConfig":
        _check_keys(raw, {f.name for f in dataclasses.fields(cls)}, "dataset")
        return cls(**raw)

    def load(self) -> ClaimsDataset:
        if self.kind == "synthetic":
            return generate(
                SynthConfig(
                    n_rows=self.n_rows,
                    seed=self.seed,
                    n_features=self.n_features,
                    zero_inflation=self.zero_inflation,
                )
            )
        schema_ref = str(self.schema)
        if "/" not in schema_ref and not schema_ref.endswith(".json"):
            schema = bundled_schema(schema_ref)
        else:
            schema = load_schema(schema_ref)
        return load_csv(self.path, schema)


@dataclass(frozen=True)
class SplitConfig:
    """Random split shares and seed."""

    proportions: tuple[float, float, float] = (0.5, 0.25, 0.25)
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "proportions", tuple(float(p) for p in self.proportions))
        if len(self.proportions) != 3:
            raise ValueError("split proportions must have 3 entries (train, calibration, test)")

    @classmethod
    def from_dict(cls, raw: dict) -> "SplitConfig":
        _check_keys(raw, {f.name for f in dataclasses.fields(cls)}, "split")
        return cls(**raw)

    def make(self, n: int) -> SplitIndices:
        return random_split(n, self.proportions, self.seed)


@dataclass(frozen=True)
class ForestConfig:
    """Forest hyperparameters shared by all forest stages of a run."""

    n_trees: int = 1000
    mtry: int | None = None
    min_leaf: int = 5
    max_depth: int | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "ForestConfig":
        _check_keys(raw, {f.name for f in dataclasses.fields(cls)}, "forest")
        return cls(**raw)

    def as_params(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class GlmConfig:
    """GLM fitting controls."""

    max_iter: int = 50
    tol: float = 1e-8

    @classmethod
    def from_dict(cls, raw: dict) -> "GlmConfig":
        _check_keys(raw, {f.name for f in dataclasses.fields(cls)}, "glm")
        return cls(**raw)

    def as_params(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one calibration experiment.

    The numeric content of the resulting Report is a deterministic
    function of this config.
    """

    label: str = "experiment"
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    method: str = "two_stage_split"
    alpha: float = 0.1
    models: dict = field(
        default_factory=lambda: {
            "frequency": "forest",
            "severity": "forest",
            "variability": "forest",
        }
    )
    forest: ForestConfig = field(default_factory=ForestConfig)
    glm: GlmConfig = field(default_factory=GlmConfig)
    seed: int = 0
    n_boot: int = 1000
    oob_positive_only: bool = False
    plot_rows: int = 50

    def __post_init__(self) -> None:
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")
        models = dict(self.models)
        _check_keys(models, {"frequency", "severity", "variability"}, "models")
        object.__setattr__(self, "models", models)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        _check_keys(raw, {f.name for f in dataclasses.fields(cls)}, "experiment")
        if "dataset" in raw:
            raw["dataset"] = DatasetConfig.from_dict(raw["dataset"])
        if "split" in raw:
            split = raw["split"]
            if isinstance(split, dict) and "proportions" in split:
                split = dict(split, proportions=tuple(split["proportions"]))
            raw["split"] = SplitConfig.from_dict(split)
        if "forest" in raw:
            raw["forest"] = ForestConfig.from_dict(raw["forest"])
        if "glm" in raw:
            raw["glm"] = GlmConfig.from_dict(raw["glm"])
        return cls(**raw)

    @classmethod
    def from_json(cls, path: "str | Path") -> "ExperimentConfig":
        with Path(path).open("r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError(f"config file {path} must hold a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def digest(self) -> str:
        """Stable sha256 of the canonical JSON form of this config."""
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def override(self, seed: int | None = None, alpha: float | None = None) -> "ExperimentConfig":
        """Return a copy with the master seed and/or alpha replaced."""
        out = self
        if seed is not None:
            out = dataclasses.replace(out, seed=int(seed))
        if alpha is not None:
            out = dataclasses.replace(out, alpha=float(alpha))
        return out


@dataclass(frozen=True)
class ReportRow:
    """Metrics for one method on one test sample."""

    label: str
    method: str
    n_test: int
    coverage: float
    avg_width: float
    rmse: float
    clip_rate: float
    seconds_fit: float
    seconds_predict: float

    _TIMING_FIELDS = ("seconds_fit", "seconds_predict")

    def to_dict(self, include_timings: bool = True) -> dict:
        out = dataclasses.asdict(self)
        if not include_timings:
            for key in self._TIMING_FIELDS:
                out.pop(key)
        return out


@dataclass(frozen=True)
class Report:
    """Metrics rows plus run metadata and the raw intervals behind them.

    ``intervals`` and ``truths`` are carried for plotting and auditing but
    never serialized. ``to_json(include_timings=False)`` (the canonical
    form) is byte-identical across repeated runs of the same config.
    """

    rows: tuple[ReportRow, ...]
    meta: dict
    intervals: dict = field(default_factory=dict, repr=False, compare=False)
    truths: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_dict(self, include_timings: bool = True) -> dict:
        return {
            "rows": [r.to_dict(include_timings=include_timings) for r in self.rows],
            "meta": dict(self.meta),
        }

    def to_json(self, include_timings: bool = True) -> str:
        return json.dumps(self.to_dict(include_timings=include_timings), indent=2, sort_keys=True)

    def to_text(self) -> str:
        """Fixed-width summary table, one line per method."""
        header = (
            f"{'label':<22} {'method':<16} {'n_test':>6} {'coverage':>9} "
            f"{'avg_width':>12} {'rmse':>12} {'clip_rate':>9}"
        )
        lines = [header, "-" * len(header)]
        for r in self.rows:
            lines.append(
                f"{r.label:<22} {r.method:<16} {r.n_test:>6d} {r.coverage:>9.4f} "
                f"{r.avg_width:>12.2f} {r.rmse:>12.2f} {r.clip_rate:>9.4f}"
            )
        return "\n".join(lines) + "\n"


def _fit_predictor(
    config: ExperimentConfig, dataset: ClaimsDataset, split: SplitIndices
) -> ConformalPredictor:
    if config.method == "two_stage_split":
        return two_stage_split(
            dataset,
            split,
            config.alpha,
            frequency_model=config.models.get("frequency", "forest"),
            severity_model=config.models.get("severity", "forest"),
            variability_model=config.models.get("variability"),
            seed=config.seed,
            forest_params=config.forest.as_params(),
            glm_params=config.glm.as_params(),
        )
    # OOB pools the training and calibration rows; the test rows stay
    # identical to the split methods so results are comparable.
    pool = np.concatenate([split.train, split.calibration])
    return two_stage_oob(
        dataset.take(pool),
        config.alpha,
        seed=config.seed,
        oob_positive_only=config.oob_positive_only,
        **config.forest.as_params(),
    )


def run(config: ExperimentConfig) -> Report:
    """Execute one experiment and collect metrics.

    Returns
    -------
    Report
        One row for the configured method. ``report.intervals[label]``
        holds the raw test-set intervals and ``report.truths`` the
        observed test severities.
    """
    dataset = config.dataset.load()
    split = config.split.make(dataset.n_rows)
    y_test = dataset.severity[split.test]

    t0 = time.perf_counter()
    if config.method == "bootstrap":
        intervals = bootstrap_baseline(
            dataset,
            split,
            config.alpha,
            n_boot=config.n_boot,
            forest_params=config.forest.as_params(),
            glm_params=config.glm.as_params(),
            seed=config.seed,
        )
        t1 = time.perf_counter()
        t2 = t1
    else:
        predictor = _fit_predictor(config, dataset, split)
        t1 = time.perf_counter()
        intervals = predict_interval(predictor, dataset.predictors[split.test])
        t2 = time.perf_counter()

    centers = np.array([iv.center for iv in intervals])
    row = ReportRow(
        label=config.label,
        method=config.method,
        n_test=int(split.test.size),
        coverage=empirical_coverage(intervals, y_test),
        avg_width=average_width(intervals),
        rmse=rmse(centers, y_test),
        clip_rate=float(np.mean([iv.clipped_at_zero for iv in intervals])),
        seconds_fit=t1 - t0,
        seconds_predict=t2 - t1,
    )
    meta = {
        "config_digest": config.digest,
        "alpha": config.alpha,
        "seed": config.seed,
        "n_rows": dataset.n_rows,
        "n_train": int(split.train.size),
        "n_calibration": int(split.calibration.size),
        "n_test": int(split.test.size),
        "zero_proportion": float(np.mean(dataset.frequency == 0)),
    }
    return Report(
        rows=(row,),
        meta=meta,
        intervals={config.label: intervals},
        truths=dataset.severity[split.test],
    )


def compare(configs: "list[ExperimentConfig]") -> Report:
    """Run several configs against the same data and split, merging rows.

    Every config must share the dataset and split sections so all methods
    score exactly the same test rows; anything else is an error, since the
    merged table would not be comparable.
    """
    if not configs:
        raise ValueError("compare needs at least one config")
    first = configs[0]
    for cfg in configs[1:]:
        if cfg.dataset != first.dataset or cfg.split != first.split:
            raise ValueError(
                f"config {cfg.label!r} has a different dataset or split section than "
                f"{first.label!r}; compared methods must score the same test rows"
            )
    labels = [cfg.label for cfg in configs]
    if len(set(labels)) != len(labels):
        raise ValueError(f"config labels must be unique, got {labels}")

    rows: list[ReportRow] = []
    intervals: dict = {}
    meta: dict = {}
    truths = None
    for cfg in configs:
        rep = run(cfg)
        rows.extend(rep.rows)
        intervals.update(rep.intervals)
        truths = rep.truths
        if not meta:
            meta = dict(rep.meta)
            meta["config_digest"] = [c.digest for c in configs]
    return Report(rows=tuple(rows), meta=meta, intervals=intervals, truths=truths)


def bootstrap_baseline(
    dataset: ClaimsDataset,
    split: SplitIndices,
    alpha: float,
    n_boot: int = 1000,
    forest_params: dict | None = None,
    glm_params: dict | None = None,
    seed: int | None = None,
) -> list[PredictionInterval]:
    """Parametric bootstrap intervals from a frequency forest plus gamma GLM.

    The classical two-stage baseline: fit a frequency forest on the
    training rows and a gamma severity GLM on the positive-frequency
    training rows (observed count as a feature). At each test point,
    simulate ``n_boot`` severities from the fitted gamma at the plug-in
    mean (using the forest's frequency prediction) and report the
    empirical alpha/2 and 1 - alpha/2 quantiles.

    These intervals are honest only when the gamma model is correct; under
    misspecification or zero inflation they undercover, which is exactly
    what the conformal methods guard against.

    Raises
    ------
    ValueError
        If ``n_boot < 2`` (insufficient bootstrap draws).
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    n_boot = int(n_boot)
    if n_boot < 2:
        raise ValueError(f"insufficient bootstrap draws: n_boot={n_boot}, need at least 2")
    forest_params = dict(forest_params or {})
    glm_params = dict(glm_params or {})

    ss = np.random.SeedSequence(seed)
    s_forest, s_draws = [int(s) for s in ss.generate_state(2)]
    forest_params.setdefault("seed", s_forest)

    enc = encode(dataset, split.train)
    X_all = enc.transform(dataset.predictors).values
    freq = dataset.frequency.astype(np.float64)

    freq_forest = fit_forest(X_all[split.train], freq[split.train], **forest_params)
    pos = split.train[dataset.frequency[split.train] > 0]
    if pos.size == 0:
        raise ValueError("no training row has a positive claim count; cannot fit a severity stage")
    X_sev_train = np.hstack([X_all[pos], freq[pos, None]])
    sev_glm = fit_glm(X_sev_train, dataset.severity[pos], family="gamma", **glm_params)

    mu_test = freq_forest.predict(X_all[split.test])
    X_sev_test = np.hstack([X_all[split.test], mu_test[:, None]])
    means = sev_glm.predict(X_sev_test)

    dispersion = sev_glm.dispersion
    if not np.isfinite(dispersion) or dispersion <= 0:
        raise ValueError(f"gamma dispersion estimate unusable: {dispersion!r}")
    shape = 1.0 / dispersion
    scale = means * dispersion

    rng = np.random.default_rng(s_draws)
    draws = rng.gamma(shape, scale[:, None], size=(means.size, n_boot))
    lo = np.quantile(draws, alpha / 2.0, axis=1)
    hi = np.quantile(draws, 1.0 - alpha / 2.0, axis=1)

    return [
        PredictionInterval(
            lo=float(a),
            hi=float(b),
            center=float(c),
            half_width_raw=float((b - a) / 2.0),
            clipped_at_zero=False,
        )
        for a, b, c in zip(lo, hi, means)
    ]


def validate_coverage(
    alpha: float = 0.2,
    n_calibration: int = 20,
    n_train: int = 40,
    replications: int = 1000,
    n_trees: int = 25,
    seed: int = 0,
) -> dict:
    """Monte Carlo check of the finite-sample coverage band.

    Each replication draws a fresh synthetic sample, runs the two-stage
    split method with small forests, predicts an interval for one held-out
    row, and records a hit or miss. Exchangeability puts the expected
    coverage inside [1 - alpha, 1 - alpha + 1/(n_calibration + 1)); the
    empirical coverage must land in that band widened by three binomial
    standard errors.

    Returns
    -------
    dict
        coverage, band_lo, band_hi, tolerance, passed, replications,
        n_calibration, alpha, seconds.
    """
    alpha = float(alpha)
    replications = int(replications)
    if replications < 1:
        raise ValueError("need at least one replication")
    t0 = time.perf_counter()
    children = np.random.SeedSequence(seed).spawn(replications)
    n_total = n_train + n_calibration + 1
    hits = 0
    for child in children:
        data_seed, model_seed = [int(s) for s in child.generate_state(2)]
        ds = generate(SynthConfig(n_rows=n_total, seed=data_seed))
        split = SplitIndices(
            train=np.arange(n_train),
            calibration=np.arange(n_train, n_train + n_calibration),
            test=np.array([n_total - 1]),
        )
        predictor = two_stage_split(
            ds,
            split,
            alpha,
            seed=model_seed,
            forest_params={"n_trees": n_trees},
        )
        iv = predict_interval(predictor, ds.predictors[split.test])[0]
        hits += iv.contains(float(ds.severity[n_total - 1]))
    coverage = hits / replications

    band_lo = 1.0 - alpha
    band_hi = 1.0 - alpha + 1.0 / (n_calibration + 1)
    tolerance = 3.0 * float(np.sqrt(band_lo * alpha / replications))
    passed = band_lo - tolerance <= coverage <= band_hi + tolerance
    return {
        "coverage": coverage,
        "band_lo": band_lo,
        "band_hi": band_hi,
        "tolerance": tolerance,
        "passed": bool(passed),
        "replications": replications,
        "n_calibration": int(n_calibration),
        "alpha": alpha,
        "seconds": time.perf_counter() - t0,
    }


def emit_plot_data(
    report: Report,
    intervals: "list[PredictionInterval]",
    truths: np.ndarray,
    sample_size: int,
    path: "str | Path",
) -> Path:
    """Write plot-ready interval data as CSV plus a metrics JSON alongside.

    The CSV holds the first ``sample_size`` test units
    (unit, truth, center, lo, hi, clipped) with full-precision floats; the
    metrics file is the canonical (timing-free) report JSON at the same
    path with a ``.metrics.json`` suffix. Output bytes are deterministic.
    No chart is rendered here; see :mod:`claimbands.harness.figures`.
    """
    path = Path(path)
    truths = np.asarray(truths, dtype=np.float64)
    if truths.size != len(intervals):
        raise ValueError(f"got {len(intervals)} intervals but {truths.size} truths")
    sample_size = int(sample_size)
    if sample_size < 1:
        raise ValueError("sample_size must be at least 1")
    take = min(sample_size, len(intervals))

    buf = io.StringIO()
    buf.write("unit,truth,center,lo,hi,clipped\n")
    for i in range(take):
        iv = intervals[i]
        buf.write(
            f"{i},{float(truths[i])!r},{iv.center!r},{iv.lo!r},{iv.hi!r},"
            f"{int(iv.clipped_at_zero)}\n"
        )
    path.write_text(buf.getvalue(), encoding="utf-8")

    metrics_path = path.with_suffix(".metrics.json")
    metrics_path.write_text(report.to_json(include_timings=False) + "\n", encoding="utf-8")
    return path
