"""CSV ingestion, schema-driven parsing and one-hot feature encoding.

A schema file (JSON) names every column of a delimited file and assigns
each a role: numeric or categorical predictor, the claim frequency, either
a per-claim severity or a policy total amount, or ignore. Loading yields an
immutable ClaimsDataset; writing reproduces a file that loads back to the
same dataset. Feature encoding (drop-first one-hot) is frozen on a chosen
row subset so that downstream models never leak calibration or test levels.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from claimbands.core import ClaimsDataset, ColumnSpec
from claimbands.models import FeatureMatrix

logger = logging.getLogger(__name__)

__all__ = [
    "SchemaColumn",
    "SchemaConfig",
    "Encoding",
    "load_schema",
    "write_schema",
    "bundled_schema",
    "load_csv",
    "write_csv",
    "encode",
]

_ROLES = ("numeric", "categorical", "frequency", "severity", "total_amount", "ignore")

# Bundled example schemas live here; see claimbands/schemas/.
SCHEMA_DIR = Path(__file__).parent / "schemas"


@dataclass(frozen=True)
class SchemaColumn:
    """One file column: its name and role."""

    name: str
    kind: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("column name must be non-empty")
        if self.kind not in _ROLES:
            raise ValueError(
                f"column {self.name!r}: kind must be one of {_ROLES}, got {self.kind!r}"
            )


@dataclass(frozen=True)
class SchemaConfig:
    """Schema for a delimited claims file.

    Attributes
    ----------
    columns : tuple of SchemaColumn
        File columns in order. Exactly one must have kind ``frequency``
        and exactly one must be either ``severity`` (average claim amount)
        or ``total_amount`` (total claimed; severity is derived as
        total / frequency on load).
    delimiter : str
        Single-character field delimiter.
    header : bool
        Whether the file starts with a header row of column names.
    missing_tokens : tuple of str
        Cell values recognized as missing. Missing values are hard errors,
        named by row and column, never imputed.
    """

    columns: tuple[SchemaColumn, ...]
    delimiter: str = ","
    header: bool = True
    missing_tokens: tuple[str, ...] = ("", "NA")

    def __post_init__(self) -> None:
        cols = tuple(self.columns)
        if not cols:
            raise ValueError("schema needs at least one column")
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise ValueError("schema column names must be unique")
        n_freq = sum(1 for c in cols if c.kind == "frequency")
        if n_freq != 1:
            raise ValueError(f"schema must have exactly one frequency column, got {n_freq}")
        n_target = sum(1 for c in cols if c.kind in ("severity", "total_amount"))
        if n_target != 1:
            raise ValueError(
                "schema must have exactly one severity or total_amount column, "
                f"got {n_target}"
            )
        if len(self.delimiter) != 1:
            raise ValueError(f"delimiter must be a single character, got {self.delimiter!r}")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "missing_tokens", tuple(self.missing_tokens))

    @property
    def predictor_columns(self) -> tuple[SchemaColumn, ...]:
        return tuple(c for c in self.columns if c.kind in ("numeric", "categorical"))

    @property
    def frequency_column(self) -> SchemaColumn:
        return next(c for c in self.columns if c.kind == "frequency")

    @property
    def target_column(self) -> SchemaColumn:
        return next(c for c in self.columns if c.kind in ("severity", "total_amount"))


def load_schema(path: "str | Path") -> SchemaConfig:
    """Read a SchemaConfig from a JSON file.

    Unknown top-level or column keys are rejected so that typos fail loudly.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"schema file {path} must hold a JSON object")
    allowed = {"columns", "delimiter", "header", "missing_tokens"}
    unknown = set(raw) - allowed
    if unknown:
        raise ValueError(f"schema file {path}: unknown keys {sorted(unknown)}")
    if "columns" not in raw:
        raise ValueError(f"schema file {path}: missing 'columns'")
    columns = []
    for i, item in enumerate(raw["columns"]):
        if not isinstance(item, dict) or set(item) - {"name", "kind"}:
            raise ValueError(f"schema file {path}: column {i} must map name and kind only")
        columns.append(SchemaColumn(name=item["name"], kind=item["kind"]))
    return SchemaConfig(
        columns=tuple(columns),
        delimiter=raw.get("delimiter", ","),
        header=raw.get("header", True),
        missing_tokens=tuple(raw.get("missing_tokens", ("", "NA"))),
    )


def write_schema(schema: SchemaConfig, path: "str | Path") -> None:
    """Write a SchemaConfig as a JSON file readable by ``load_schema``."""
    payload = {
        "delimiter": schema.delimiter,
        "header": schema.header,
        "missing_tokens": list(schema.missing_tokens),
        "columns": [{"name": c.name, "kind": c.kind} for c in schema.columns],
    }
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=4)
        fh.write("\n")


def bundled_schema(name: str) -> SchemaConfig:
    """Load one of the schemas shipped with the package ('mtpl' or 'crop')."""
    path = SCHEMA_DIR / f"{name}.json"
    if not path.exists():
        available = sorted(p.stem for p in SCHEMA_DIR.glob("*.json"))
        raise ValueError(f"no bundled schema {name!r}; available: {available}")
    return load_schema(path)


def _parse_float(token: str, row: int, col: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ValueError(
            f"unparseable numeric value {token!r} at data row {row}, column {col!r}"
        ) from None


def _parse_count(token: str, row: int, col: str) -> int:
    v = _parse_float(token, row, col)
    if v != int(v):
        raise ValueError(
            f"frequency must be an integer count, got {token!r} at data row {row}, column {col!r}"
        )
    return int(v)


def load_csv(path: "str | Path", schema: SchemaConfig) -> ClaimsDataset:
    """Load a delimited claims file into a ClaimsDataset.

    Categorical levels are assigned integer codes in order of first
    appearance in the file. When the schema names a ``total_amount``
    column, severity is derived as total / frequency (zero when both are
    zero). With a direct ``severity`` column, rows where frequency is zero
    but severity is positive are internally inconsistent; they are dropped,
    counted, and reported through the module logger rather than aborting
    the load.

    Raises
    ------
    ValueError
        On a header mismatch, wrong field count, missing or unparseable
        cells, negative frequency, severity or total amount, or a zero
        frequency paired with a positive total amount.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        names = [c.name for c in schema.columns]
        if schema.header:
            try:
                header = next(reader)
            except StopIteration:
                raise ValueError(f"{path}: file is empty, expected a header row") from None
            if [h.strip() for h in header] != names:
                raise ValueError(
                    f"{path}: header mismatch: expected {names}, found {header}"
                )

        pred_cols = schema.predictor_columns
        pred_pos = [schema.columns.index(c) for c in pred_cols]
        freq_pos = schema.columns.index(schema.frequency_column)
        target = schema.target_column
        target_pos = schema.columns.index(target)
        derive = target.kind == "total_amount"

        levels: dict[str, dict[str, int]] = {
            c.name: {} for c in pred_cols if c.kind == "categorical"
        }
        rows_x: list[list[float]] = []
        rows_f: list[int] = []
        rows_y: list[float] = []
        rejected: list[int] = []

        for ridx, record in enumerate(reader, start=1):
            if len(record) != len(schema.columns):
                raise ValueError(
                    f"{path}: data row {ridx} has {len(record)} fields, expected {len(schema.columns)}"
                )
            for pos, name in ((freq_pos, schema.frequency_column.name), (target_pos, target.name)):
                if record[pos].strip() in schema.missing_tokens:
                    raise ValueError(
                        f"{path}: missing value at data row {ridx}, column {name!r}"
                    )

            freq = _parse_count(record[freq_pos].strip(), ridx, schema.frequency_column.name)
            if freq < 0:
                raise ValueError(
                    f"{path}: negative frequency {freq} at data row {ridx}"
                )
            tval = _parse_float(record[target_pos].strip(), ridx, target.name)
            if tval < 0:
                raise ValueError(
                    f"{path}: negative {target.kind} {tval} at data row {ridx}"
                )
            if derive:
                if freq == 0:
                    if tval > 0:
                        raise ValueError(
                            f"{path}: zero frequency with positive total amount at data row {ridx}"
                        )
                    sev = 0.0
                else:
                    sev = tval / freq
            else:
                sev = tval
                if freq == 0 and sev > 0:
                    rejected.append(ridx)
                    continue

            xrow: list[float] = []
            for col, pos in zip(pred_cols, pred_pos):
                token = record[pos].strip()
                if token in schema.missing_tokens:
                    raise ValueError(
                        f"{path}: missing value at data row {ridx}, column {col.name!r}"
                    )
                if col.kind == "numeric":
                    xrow.append(_parse_float(token, ridx, col.name))
                else:
                    lut = levels[col.name]
                    if token not in lut:
                        lut[token] = len(lut)
                    xrow.append(float(lut[token]))
            rows_x.append(xrow)
            rows_f.append(freq)
            rows_y.append(sev)

    if rejected:
        logger.warning(
            "%s: dropped %d row(s) with zero frequency but positive severity (data rows %s%s)",
            path,
            len(rejected),
            rejected[:20],
            ", ..." if len(rejected) > 20 else "",
        )
    if not rows_x:
        raise ValueError(f"{path}: no usable data rows")

    specs = tuple(
        ColumnSpec(name=c.name, kind=c.kind, levels=tuple(levels.get(c.name, {})))
        for c in pred_cols
    )
    return ClaimsDataset(
        predictors=np.asarray(rows_x, dtype=np.float64),
        frequency=np.asarray(rows_f, dtype=np.int64),
        severity=np.asarray(rows_y, dtype=np.float64),
        columns=specs,
    )


def _format_value(v: float) -> str:
    """Shortest decimal string that parses back to the same float."""
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def write_csv(dataset: ClaimsDataset, path: "str | Path", schema: SchemaConfig) -> None:
    """Write a ClaimsDataset to a delimited file described by ``schema``.

    Numbers are written with full round-trip precision, so loading the file
    back reproduces predictors, frequency and severity bit for bit when the
    schema stores severity directly. With a ``total_amount`` schema the
    file stores severity * frequency, and the division on reload can move
    the last bit of severity.

    Raises
    ------
    ValueError
        If the schema's predictor columns do not match the dataset's.
    """
    path = Path(path)
    pred_cols = schema.predictor_columns
    if tuple((c.name, c.kind) for c in pred_cols) != tuple(
        (c.name, c.kind) for c in dataset.columns
    ):
        raise ValueError(
            "schema predictor columns do not match the dataset's "
            f"(schema: {[(c.name, c.kind) for c in pred_cols]}, "
            f"dataset: {[(c.name, c.kind) for c in dataset.columns]})"
        )
    derive = schema.target_column.kind == "total_amount"

    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=schema.delimiter, lineterminator="\n")
        if schema.header:
            writer.writerow([c.name for c in schema.columns])
        pred_idx = {c.name: j for j, c in enumerate(dataset.columns)}
        for i in range(dataset.n_rows):
            record: list[str] = []
            for col in schema.columns:
                if col.kind == "frequency":
                    record.append(str(int(dataset.frequency[i])))
                elif col.kind == "severity":
                    record.append(_format_value(float(dataset.severity[i])))
                elif col.kind == "total_amount":
                    total = float(dataset.severity[i]) * int(dataset.frequency[i])
                    record.append(_format_value(total))
                elif col.kind == "ignore":
                    record.append("")
                else:
                    j = pred_idx[col.name]
                    spec = dataset.columns[j]
                    if spec.kind == "categorical":
                        record.append(spec.levels[int(dataset.predictors[i, j])])
                    else:
                        record.append(_format_value(float(dataset.predictors[i, j])))
            writer.writerow(record)


@dataclass(frozen=True)
class Encoding:
    """A drop-first one-hot encoding frozen on a reference row subset.

    For each categorical column, the levels seen among the fit rows are
    recorded; the first seen level (lowest code) becomes the baseline and
    every remaining seen level gets one indicator column. Level codes never
    seen in the fit rows, including codes introduced later, transform to
    the all-zeros block, the same pattern as the baseline.
    """

    columns: tuple[ColumnSpec, ...]
    seen: tuple[tuple[int, ...], ...]
    names: tuple[str, ...]

    def transform(self, X: "np.ndarray | ClaimsDataset") -> FeatureMatrix:
        """Encode raw predictor rows (dataset column layout) to features."""
        if isinstance(X, ClaimsDataset):
            X = X.predictors
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != len(self.columns):
            raise ValueError(
                f"expected {len(self.columns)} raw predictor columns, got {X.shape[1]}"
            )
        blocks: list[np.ndarray] = []
        for j, spec in enumerate(self.columns):
            col = X[:, j]
            if spec.kind == "numeric":
                blocks.append(col.reshape(-1, 1))
            else:
                indicators = self.seen[j][1:]
                block = np.zeros((X.shape[0], len(indicators)))
                for k, code in enumerate(indicators):
                    block[:, k] = col == code
                blocks.append(block)
        values = np.hstack(blocks) if blocks else np.zeros((X.shape[0], 0))
        return FeatureMatrix(values=values, names=self.names)

    @property
    def n_features(self) -> int:
        return len(self.names)


def encode(dataset: ClaimsDataset, fit_rows: np.ndarray | None = None) -> Encoding:
    """Build a drop-first one-hot encoding from a dataset's fit rows.

    Parameters
    ----------
    dataset : ClaimsDataset
    fit_rows : ndarray or None
        Row indices whose categorical levels define the encoding (None
        means all rows). Freezing on the training rows keeps calibration
        and test levels out of the feature space.

    Returns
    -------
    Encoding
    """
    if fit_rows is None:
        fit_rows = np.arange(dataset.n_rows)
    fit_rows = np.asarray(fit_rows, dtype=np.int64)
    if fit_rows.ndim != 1 or fit_rows.size == 0:
        raise ValueError("fit_rows must be a non-empty 1-d index array")
    if fit_rows.min() < 0 or fit_rows.max() >= dataset.n_rows:
        raise ValueError("fit_rows contain indices outside the dataset")

    seen: list[tuple[int, ...]] = []
    names: list[str] = []
    for j, spec in enumerate(dataset.columns):
        if spec.kind == "numeric":
            seen.append(())
            names.append(spec.name)
        else:
            codes = tuple(
                int(c) for c in np.unique(dataset.predictors[fit_rows, j])
            )
            seen.append(codes)
            for code in codes[1:]:
                names.append(f"{spec.name}={spec.levels[code]}")
    return Encoding(columns=dataset.columns, seen=tuple(seen), names=tuple(names))
