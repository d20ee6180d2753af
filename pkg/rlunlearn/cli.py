"""CLI interface for rlunlearn."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from rlunlearn.config import ExperimentConfig, TrainingMode, config_schema, load_config
from rlunlearn.errors import AcceptanceFailed, ConfigError, MissingArtifact, StageFailed
from rlunlearn.oracle.sweep import LemmaSummary
from rlunlearn.pipeline.acceptance import CheckResult, run_acceptance
from rlunlearn.pipeline.runner import run_pipeline, run_stage
from rlunlearn.pipeline.stages import REPORT

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3
EXIT_ACCEPTANCE = 4

STAGE_COMMANDS = {
    "gen-env": "Generate the synthetic environment (env.json)",
    "coldstart": "Pretrain the base policy and run the cold-start stage",
    "train": "Run group-relative policy optimization from the cold-start policy",
    "eval": "Sample from the trained policy and compute metrics",
    "lemma-verify": "Check the hallucination bound on the reference policy and random instances",
    "report": "Render metrics.json and lemma.json to report.txt",
}


def build_config(args) -> ExperimentConfig:
    """Load --config and apply the command-line overrides."""
    overrides = {
        "seed": args.seed,
        "output_dir": args.out,
        "concurrency": args.concurrency,
        "train.mode": args.mode,
    }
    return load_config(args.config, **overrides)


def run_all(args) -> int:
    config = build_config(args)
    run_pipeline(config)
    report = Path(config.output_dir) / REPORT
    if report.exists():
        print(report.read_text(encoding="utf-8"))
    return EXIT_OK


def run_single_stage(args) -> int:
    config = build_config(args)
    result = run_stage(args.command, config)
    if args.command == "lemma-verify" and isinstance(result, dict):
        print(LemmaSummary.model_validate(result["sweep"]).line())
    elif args.command == "report" and result:
        print(result)
    else:
        print(f"Stage {args.command} finished, artifacts in {config.output_dir}")
    return EXIT_OK


def _print_checks(results: Sequence[CheckResult]) -> None:
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}")


def verify(args) -> int:
    """Run the acceptance checks; run-level checks only when --run-dir is given."""
    config = build_config(args)
    run_dir = Path(args.run_dir) if args.run_dir else None
    baseline = Path(args.baseline) if args.baseline else None
    try:
        results = run_acceptance(config, run_dir, baseline)
    except AcceptanceFailed as e:
        _print_checks(e.results)
        raise
    _print_checks(results)
    return EXIT_OK


def print_schema(args) -> int:
    print(json.dumps(config_schema(), indent=2, sort_keys=True))
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="Experiment config JSON (default: built-in)")
    parser.add_argument("--seed", type=int, default=None, help="Master seed (overrides config)")
    parser.add_argument("--out", default=None, help="Run directory (overrides output_dir)")
    parser.add_argument(
        "--mode",
        choices=[m.value for m in TrainingMode],
        default=None,
        help="Training reward mode (overrides train.mode)",
    )
    parser.add_argument(
        "--concurrency",
        type=int,
        default=None,
        help="Worker threads for parallel stages (default: 1, env: RLUNLEARN_CONCURRENCY)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="rlunlearn CLI - reinforcement unlearning with hallucination-aware rewards"
    )

    # Global logging level option
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default="INFO",
        help="Set logging level (default: INFO)",
    )

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    run_parser = subparsers.add_parser("run", help="Run the whole pipeline")
    _add_common(run_parser)
    run_parser.set_defaults(func=run_all)

    for name, help_text in STAGE_COMMANDS.items():
        stage_parser = subparsers.add_parser(name, help=help_text)
        _add_common(stage_parser)
        stage_parser.set_defaults(func=run_single_stage)

    verify_parser = subparsers.add_parser("verify", help="Run the built-in acceptance checks")
    _add_common(verify_parser)
    verify_parser.add_argument(
        "--run-dir", default=None, help="Finished run directory to check as well"
    )
    verify_parser.add_argument(
        "--baseline",
        default=None,
        help="Penalty-only run directory for the paired hallucination comparison",
    )
    verify_parser.set_defaults(func=verify)

    schema_parser = subparsers.add_parser("schema", help="Print the config JSON schema")
    schema_parser.set_defaults(func=print_schema)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    if not args.command:
        parser.print_help()
        return EXIT_OK

    try:
        return args.func(args)
    except ConfigError as e:
        print(f"Config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (StageFailed, MissingArtifact) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_STAGE
    except AcceptanceFailed as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_ACCEPTANCE


if __name__ == "__main__":
    sys.exit(main())
