"""Command-line entry point.

Every subcommand runs the pipeline from a JSON experiment configuration up
to (and including) its own stage; ``run`` executes everything. Stages are
deterministic, so partial commands recompute earlier stages instead of
depending on previous invocations.

Exit codes: 0 success, 2 configuration/validation error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, KgPromptError, StageError
from .pipeline import ExperimentConfig, run_experiment

_COMMANDS = {
    "ingest": "ingest",
    "link": "link",
    "extract": "extract",
    "verbalize": "verbalize",
    "build-prompts": "build-prompts",
    "split": "split",
    "predict": "predict",
    "eval": "eval",
    "run": "eval",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgprompt",
        description=(
            "Extract knowledge-graph structures for variable pairs, verbalize them, "
            "build prompts, and run the few-shot evaluation protocol."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command in _COMMANDS:
        p = sub.add_parser(command, help=f"run the pipeline through the {command} stage")
        p.add_argument("--config", required=True, help="experiment configuration JSON file")
        p.add_argument("--seed", type=int, default=None, help="override every stage seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--cache", default=None, help="override the remote query cache directory")
        p.add_argument(
            "--offline",
            action="store_true",
            help="serve remote queries from the cache only (read_only policy)",
        )
    return parser


def _apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    import dataclasses

    updates: dict = {}
    if args.seed is not None:
        updates["fold_seed"] = args.seed
        updates["selection_seed"] = args.seed
        updates["few_shot"] = dataclasses.replace(config.few_shot, seed=args.seed)
        updates["mock_seed"] = args.seed
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.cache is not None:
        updates["cache_dir"] = args.cache
    return dataclasses.replace(config, **updates) if updates else config


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _apply_overrides(ExperimentConfig.from_json(args.config), args)
        out = run_experiment(config, offline=args.offline, until=_COMMANDS[args.command])
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except KgPromptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
