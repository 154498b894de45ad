"""
Command line entry point: ``deltaspec <subcommand> --config run.json``.

Exit codes: 0 on success, 1 on configuration errors (and failed
computations), 2 when a spectrum search finds no root, 3 when any check is
violated.
"""
import argparse
import logging
import sys
from dataclasses import replace
from typing import List, Optional, TextIO

from deltaspec.configuration import LOG_LEVELS, OUTPUT_FORMATS, RunConfig, load_config
from deltaspec.constants import EXIT_CONFIG_ERROR
from deltaspec.errors import ConfigurationError
from deltaspec.runner import Runner, TaskFailure, get_main_runner
from deltaspec.setup import logger
import deltaspec.tasks  # noqa: F401  registers the subcommands


def make_parser(runner: Runner) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deltaspec",
                                     description="Spectra and resolvent checks for point interactions on manifolds")
    parser.add_argument("subcommand", choices=sorted(runner.tasks), help="What to compute")
    parser.add_argument("--config", help="Path to the JSON run configuration (defaults apply when omitted)")
    parser.add_argument("--output", help="Write the result here instead of standard output")
    parser.add_argument("--format", choices=OUTPUT_FORMATS, help="Output format")
    parser.add_argument("--threads", type=int, help="Worker threads for sweeps")
    parser.add_argument("--seed", type=int, help="Seed of the randomized test functions")
    parser.add_argument("--plot-data", action="store_true", help="Also write two-column plot-data files")
    parser.add_argument("--log-level", type=str.upper, choices=LOG_LEVELS, help="Level of the deltaspec logger")
    return parser


def apply_arguments(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Command line flags override the configuration file."""
    output = config.output
    if args.output is not None:
        output = replace(output, path=args.output)
    if args.format is not None:
        output = replace(output, format=args.format)
    if args.plot_data:
        output = replace(output, plot_data=True)
    task = config.task if args.seed is None else replace(config.task, seed=args.seed)
    config = replace(config, output=output, task=task)
    if args.threads is not None:
        config = replace(config, threads=args.threads)
    if args.log_level is not None:
        config = replace(config, log_level=args.log_level)
    return config


def main(argv: Optional[List[str]] = None, stdout: TextIO = sys.stdout, stderr: TextIO = sys.stderr) -> int:
    """
    Runs one subcommand.

    :return: The exit code.
    """
    runner = get_main_runner()
    args = make_parser(runner).parse_args(argv)
    try:
        config = apply_arguments(load_config(args.config), args)
    except ConfigurationError as error:
        stderr.write(f"deltaspec: {error}\n")
        return EXIT_CONFIG_ERROR
    logging.basicConfig(level=config.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    logger.setLevel(config.log_level.upper())
    runner.update_config(**vars(config))
    try:
        output = runner.run_task(args.subcommand)
    except ConfigurationError as error:
        stderr.write(f"deltaspec: {error}\n")
        return EXIT_CONFIG_ERROR
    except TaskFailure as failure:
        stderr.write(f"{failure}\n")
        return EXIT_CONFIG_ERROR
    text = runner.write(output)
    if text is not None:
        stdout.write(text)
    return output.exit_code


if __name__ == "__main__":
    sys.exit(main())
