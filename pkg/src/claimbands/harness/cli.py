"""Command line interface.

Subcommands:

* ``synth``             generate a synthetic claims CSV plus its schema file
* ``run``               run one experiment config, writing the report, plot
                        data and figures to an output directory
* ``compare``           run several configs against the same data and split
                        and merge them into one comparison report
* ``validate-coverage`` Monte Carlo check that empirical coverage lands in
                        the finite-sample band

Every subcommand exits 0 on success. Usage errors exit 2 (argparse);
runtime failures print a one-line diagnostic to stderr and exit 1;
``validate-coverage`` exits 1 when the check fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from claimbands.harness.experiment import (
    ExperimentConfig,
    Report,
    compare,
    emit_plot_data,
    run,
    validate_coverage,
)
from claimbands.ingest import SchemaColumn, SchemaConfig, write_csv, write_schema
from claimbands.synth import SynthConfig, generate

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="claimbands",
        description="Distribution-free prediction intervals for insurance claim severities.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic claims CSV")
    p_synth.add_argument("--n", type=int, required=True, help="number of rows")
    p_synth.add_argument("--seed", type=int, default=0, help="generator seed")
    p_synth.add_argument("--out", type=Path, required=True, help="output CSV path")
    p_synth.add_argument("--zero-inflation", type=float, default=0.5,
                         help="extra probability mass on zero claim counts")
    p_synth.add_argument("--features", type=int, default=10, help="number of predictors")

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("--config", type=Path, required=True, help="experiment config JSON")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--alpha", type=float, default=None, help="override the miscoverage level")
    p_run.add_argument("--out", type=Path, default=Path("claimbands_out"),
                       help="output directory")
    p_run.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p_cmp = sub.add_parser("compare", help="run several configs on the same data and split")
    p_cmp.add_argument("--config", type=Path, action="append", required=True,
                       help="experiment config JSON (repeat per method)")
    p_cmp.add_argument("--seed", type=int, default=None, help="override every config seed")
    p_cmp.add_argument("--alpha", type=float, default=None, help="override every alpha")
    p_cmp.add_argument("--out", type=Path, default=Path("claimbands_out"),
                       help="output directory")
    p_cmp.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p_val = sub.add_parser("validate-coverage",
                           help="Monte Carlo check of the finite-sample coverage band")
    p_val.add_argument("--alpha", type=float, default=0.2, help="miscoverage level")
    p_val.add_argument("--n2", type=int, default=20, help="calibration rows per replication")
    p_val.add_argument("--train", type=int, default=40, help="training rows per replication")
    p_val.add_argument("--replications", type=int, default=1000, help="Monte Carlo replications")
    p_val.add_argument("--trees", type=int, default=25, help="trees per forest stage")
    p_val.add_argument("--seed", type=int, default=0, help="master seed")
    p_val.add_argument("--out", type=Path, default=None,
                       help="optional path for the JSON result")
    return parser


def _synth_schema(n_features: int) -> SchemaConfig:
    columns = [SchemaColumn(name=f"x{j + 1}", kind="numeric") for j in range(n_features)]
    columns.append(SchemaColumn(name="frequency", kind="frequency"))
    columns.append(SchemaColumn(name="severity", kind="severity"))
    return SchemaConfig(columns=tuple(columns))


def _cmd_synth(args: argparse.Namespace) -> int:
    config = SynthConfig(
        n_rows=args.n,
        seed=args.seed,
        n_features=args.features,
        zero_inflation=args.zero_inflation,
    )
    dataset = generate(config)
    schema = _synth_schema(args.features)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(dataset, args.out, schema)
    schema_path = args.out.with_suffix(".schema.json")
    write_schema(schema, schema_path)
    zero_prop = float((dataset.frequency == 0).mean())
    print(f"wrote {dataset.n_rows} rows to {args.out} (zero proportion {zero_prop:.4f})")
    print(f"wrote schema to {schema_path}")
    return 0


def _write_report_outputs(
    report: Report, out_dir: Path, plot_rows: int, figures: bool
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    (out_dir / "report.txt").write_text(report.to_text(), encoding="utf-8")
    for label, intervals in report.intervals.items():
        stem = label.replace(" ", "_").replace("/", "_")
        emit_plot_data(
            report, intervals, report.truths, plot_rows, out_dir / f"{stem}_intervals.csv"
        )
        if figures:
            from claimbands.harness.figures import render_intervals

            render_intervals(
                intervals,
                report.truths,
                out_dir / f"{stem}_intervals.png",
                title=label,
                max_units=plot_rows,
            )
    if figures and len(report.rows) > 1:
        from claimbands.harness.figures import render_comparison

        render_comparison(report, out_dir / "comparison.png")


def _cmd_run(args: argparse.Namespace) -> int:
    config = ExperimentConfig.from_json(args.config).override(seed=args.seed, alpha=args.alpha)
    report = run(config)
    _write_report_outputs(report, args.out, config.plot_rows, not args.no_figures)
    print(report.to_text(), end="")
    print(f"outputs written to {args.out}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    configs = [
        ExperimentConfig.from_json(p).override(seed=args.seed, alpha=args.alpha)
        for p in args.config
    ]
    report = compare(configs)
    plot_rows = max(c.plot_rows for c in configs)
    _write_report_outputs(report, args.out, plot_rows, not args.no_figures)
    print(report.to_text(), end="")
    print(f"outputs written to {args.out}")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    result = validate_coverage(
        alpha=args.alpha,
        n_calibration=args.n2,
        n_train=args.train,
        replications=args.replications,
        n_trees=args.trees,
        seed=args.seed,
    )
    verdict = "PASS" if result["passed"] else "FAIL"
    print(
        f"coverage validation {verdict}: coverage={result['coverage']:.4f} "
        f"target [{result['band_lo']:.4f}, {result['band_hi']:.4f}] "
        f"+/- {result['tolerance']:.4f} "
        f"({result['replications']} replications, {result['seconds']:.1f}s)"
    )
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
        print(f"result written to {args.out}")
    return 0 if result["passed"] else 1


def main(argv: "list[str] | None" = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "synth": _cmd_synth,
        "run": _cmd_run,
        "compare": _cmd_compare,
        "validate-coverage": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
