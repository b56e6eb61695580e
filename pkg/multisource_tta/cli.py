#  Copyright (c) 2024. multisource-tta developers. See the LICENSE
"""Command line entry point with the ``run`` and ``sweep`` subcommands."""

# System imports
import argparse
import sys
from collections import defaultdict
from typing import Any, Dict, List, Optional, Sequence

# Third party imports
import yaml
from loguru import logger
from tabulate import tabulate

# Application imports
from multisource_tta import LOG_LEVEL, SPARSE_SKILLS, __version__
from multisource_tta.errors import ConfigError, OutputError
from multisource_tta.harness import (
    ExperimentConfig,
    PolicyKind,
    RunResult,
    SweepParameter,
    SweepSpec,
    run_and_evaluate,
    run_sweep,
)
from multisource_tta.utils.utilities import load_yaml_config, logging_level, number_table_rows
from multisource_tta.writers import write_outputs

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_OUTPUT = 2

_SWEEP_TYPES = {
    SweepParameter.NOISE_RATE: float,
    SweepParameter.NUM_SOURCES: int,
    SweepParameter.SEED: int,
}

# CLI destination -> (section, key) in the config mapping; section None is top level
_OVERRIDES = {
    "policy": (None, "policy"),
    "learning_gain": (None, "learning_gain"),
    "perturb_width": (None, "perturb_width"),
    "top2_degradation": (None, "top2_degradation"),
    "policy_only": (None, "policy_only"),
    "literal_total_count": (None, "literal_total_count"),
    "static_regret": (None, "static_regret"),
    "dynamic_regret": (None, "dynamic_regret"),
    "probe_size": (None, "probe_size"),
    "probe_interval": (None, "probe_interval"),
    "preference_samples": (None, "preference_samples"),
    "skills": ("profile", "initial_skills"),
    "stream_length": ("profile", "stream_length"),
    "batch_size": ("profile", "batch_size"),
    "seed": ("profile", "seed"),
    "passage_length_range": ("profile", "passage_length_range"),
    "max_answer_length": ("profile", "max_answer_length"),
    "noise_rate": ("noise", "rate"),
}


def _experiment_arguments(parser: argparse.ArgumentParser):
    """Flags for every experiment config field; unset flags keep the config file value."""
    group = parser.add_argument_group("experiment")
    group.add_argument("--config", help="YAML experiment config file")
    group.add_argument("--out", default="results", help="Output folder (default: results)")
    group.add_argument(
        "--policy",
        choices=[p.value for p in PolicyKind],
        type=str.upper,
        help="Model selection policy",
    )
    group.add_argument("--skills", nargs="+", type=float, help="Initial skill of each source")
    group.add_argument(
        "--sparse", action="store_true", help="Use the feedback-sparse source skills"
    )
    group.add_argument("--stream-length", type=int, help="Test instances in the stream")
    group.add_argument("--batch-size", type=int, help="Instances per step")
    group.add_argument("--seed", type=int, help="Run seed")
    group.add_argument("--noise-rate", type=float, help="Preference noise rate")
    group.add_argument("--learning-gain", type=float, help="Skill update gain")
    group.add_argument("--perturb-width", type=int, help="Largest index shift of a wrong span")
    group.add_argument("--top2-degradation", type=float, help="Skill factor of the second candidate")
    group.add_argument(
        "--passage-length-range", nargs=2, type=int, metavar=("LOW", "HIGH"), help="Passage lengths"
    )
    group.add_argument("--max-answer-length", type=int, help="Longest annotated span")
    group.add_argument("--probe-size", type=int, help="Fresh instances per held-out probe")
    group.add_argument("--probe-interval", type=int, help="Instances between probes, 0 disables")
    group.add_argument("--preference-samples", type=int, help="Monte Carlo samples for regret")
    group.add_argument(
        "--policy-only",
        action="store_true",
        default=None,
        help="Update the selection policy only, keep the models frozen",
    )
    group.add_argument(
        "--literal-total-count",
        action="store_true",
        default=None,
        help="Set the dueling total count to the batch size instead of accumulating",
    )
    group.add_argument(
        "--no-static-regret", dest="static_regret", action="store_false", default=None
    )
    group.add_argument(
        "--no-dynamic-regret", dest="dynamic_regret", action="store_false", default=None
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multisource-tta",
        description="Simulate multi-source test-time adaptation with bandit model selection.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level", default=LOG_LEVEL, help=f"Logging level (default: {LOG_LEVEL})"
    )
    commands = parser.add_subparsers(dest="command", required=True)
    run = commands.add_parser("run", help="Run one experiment")
    _experiment_arguments(run)
    sweep = commands.add_parser("sweep", help="Run an experiment for each value of a parameter")
    _experiment_arguments(sweep)
    sweep.add_argument(
        "--parameter",
        required=True,
        choices=[p.value for p in SweepParameter],
        help="The swept parameter",
    )
    sweep.add_argument("--values", nargs="+", required=True, help="The parameter values")
    sweep.add_argument("--repeats", type=int, default=1, help="Runs per value (default: 1)")
    sweep.add_argument("--workers", type=int, default=1, help="Parallel runs (default: 1)")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """The experiment config of the file in ``--config`` with the set flags applied on top."""
    data: Dict[str, Any] = {}
    if args.config:
        try:
            data = load_yaml_config(args.config)
        except FileNotFoundError as e:
            raise ConfigError(f"Config file not found: {e.filename}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"Config file {args.config} is not valid YAML: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {args.config} does not hold a mapping")
    if args.sparse:
        data.setdefault("profile", {})["initial_skills"] = list(SPARSE_SKILLS)
    for dest, (section, key) in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        target = data if section is None else data.setdefault(section, {})
        target[key] = value
    return ExperimentConfig.from_dict(data).validate()


def sweep_from_args(args: argparse.Namespace) -> SweepSpec:
    parameter = SweepParameter(args.parameter)
    try:
        values = tuple(_SWEEP_TYPES[parameter](v) for v in args.values)
    except ValueError as e:
        raise ConfigError(f"Invalid {parameter.value} value: {e}") from e
    return SweepSpec(parameter, values, args.repeats)


def summary_table(results: Sequence[RunResult]) -> Dict[str, List]:
    tbl = defaultdict(list)
    for result in results:
        summary = result.summary
        tbl["Policy"].append(summary.policy)
        tbl["Value"].append(result.value)
        tbl["Seed"].append(summary.seed)
        tbl["Best Arm"].append(summary.best_arm)
        tbl["Best Skill"].append(round(summary.best_arm_skill, 4))
        tbl["Overall Reward"].append(summary.overall_reward)
        tbl["Static Regret"].append(summary.static_regret)
        tbl["Dynamic Regret"].append(summary.dynamic_regret)
    return number_table_rows(tbl)


def _configure_logging(level: str):
    logger.remove()
    logger.add(sys.stderr, level=logging_level(level))
    logger.enable("multisource_tta")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run and write outputs; returns the process exit code."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.log_level)
    try:
        config = config_from_args(args)
        if args.command == "sweep":
            sweep = sweep_from_args(args)
            results = run_sweep(config, sweep, args.workers)
            write_outputs(results, args.out, sweep.parameter.value)
        else:
            results = [run_and_evaluate(config, config.policy.value)]
            write_outputs(results, args.out)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except OutputError as e:
        logger.error(str(e))
        return EXIT_OUTPUT
    print(tabulate(summary_table(results), headers="keys"))
    return EXIT_OK
