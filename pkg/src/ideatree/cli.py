"""Command-line entry points: run, sweep, report, diversity, validate-dataset."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .corpus import load_dataset
from .errors import HarnessError
from .report import diversity_for_run, gain_report_for_runs, report
from .runner import load_config, run_experiment, run_sweep

logger = logging.getLogger(__name__)


def _add_run_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="experiment config JSON")
    parser.add_argument("--run-dir", help="run directory (overrides config run_dir)")
    parser.add_argument(
        "--mock-script",
        help="select the scripted provider with this response script",
    )


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config, run_dir=args.run_dir, mock_script=args.mock_script)
    artifacts = run_experiment(config, stop_after=args.max_problems)
    if artifacts.completed:
        print(f"run complete: {artifacts.run_dir}")
        print(f"curves: {artifacts.curves_path}")
    else:
        print(f"run stopped early; rerun to resume: {artifacts.run_dir}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = load_config(
        args.config, run_dir=str(Path(args.sweep_dir) / "base"), mock_script=args.mock_script
    )
    values = [float(v) for v in args.values.split(",") if v.strip()]
    results = run_sweep(config, args.param, values, args.sweep_dir)
    print(f"sweep complete: {len(results)} run(s) under {args.sweep_dir}")
    print(f"combined curves: {Path(args.sweep_dir) / 'sweep.csv'}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    paths = report(args.runs, args.out, relative=not args.no_relative)
    print((Path(args.out) / "summary_table.txt").read_text(encoding="utf-8"), end="")
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return 0


def _cmd_diversity(args: argparse.Namespace) -> int:
    reports = []
    for run_dir in args.runs:
        result = diversity_for_run(
            run_dir,
            mock_script=args.mock_script,
            max_pool=args.max_pool,
            word_budget=args.word_budget,
        )
        reports.append(result)
        print(f"{run_dir}: diversity={result.dataset_diversity:.4f}")
    if len(reports) >= 3:
        out = args.out or args.runs[0]
        gain = gain_report_for_runs(reports, out)
        correlation = (
            "undefined" if gain.rank_correlation is None else f"{gain.rank_correlation:.4f}"
        )
        print(f"diversity-vs-gain rank correlation: {correlation}")
    elif args.out:
        logger.warning("gain report needs >= 3 runs; skipped")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.path)
    tests = sum(len(p.tests) for p in dataset.problems)
    undated = sum(1 for p in dataset.problems if p.release_date is None)
    print(
        f"{dataset.name}: {len(dataset.problems)} problem(s), {tests} test(s), "
        f"{undated} undated"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ideatree",
        description="Plan-search orchestration and pass@k evaluation for LLM code generation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment (resumable)")
    _add_run_args(run_p)
    run_p.add_argument(
        "--max-problems",
        type=int,
        default=None,
        help="process at most this many incomplete problems, then stop",
    )
    run_p.set_defaults(fn=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="run a parameter grid of experiments")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--mock-script")
    sweep_p.add_argument("--param", default="temperature")
    sweep_p.add_argument("--values", required=True, help="comma-separated grid values")
    sweep_p.add_argument("--sweep-dir", required=True)
    sweep_p.set_defaults(fn=_cmd_sweep)

    report_p = sub.add_parser("report", help="emit tables and curve CSVs over runs")
    report_p.add_argument("--runs", nargs="+", required=True)
    report_p.add_argument("--out", required=True)
    report_p.add_argument("--no-relative", action="store_true")
    report_p.set_defaults(fn=_cmd_report)

    div_p = sub.add_parser("diversity", help="score idea diversity of finished runs")
    div_p.add_argument("--runs", nargs="+", required=True)
    div_p.add_argument("--out", help="directory for the gain report (3+ runs)")
    div_p.add_argument("--mock-script")
    div_p.add_argument("--max-pool", type=int, default=40)
    div_p.add_argument("--word-budget", type=int, default=60)
    div_p.set_defaults(fn=_cmd_diversity)

    val_p = sub.add_parser("validate-dataset", help="check a dataset file")
    val_p.add_argument("path")
    val_p.set_defaults(fn=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
