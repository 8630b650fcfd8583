"""
Spherical robot simulator - Main Application
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

# Add the src directory to the Python path
sys.path.append(str(Path(__file__).parent))

from src.config import BASELINE_MODES, load_config
from src.exceptions import ConfigError
from src.utils import create_directory, setup_logger

CONTROL_ALIASES = {"gt": "ground_truth", "lio": "estimator_in_loop"}


def setup_logging(config) -> logging.Logger:
    """
    Set up logging configuration.

    Args:
        config: Experiment configuration

    Returns:
        Configured logger instance
    """
    # Create log directory if it doesn't exist
    create_directory(config.log_dir)

    # Configure the root logger so every module logger writes to the same file
    return setup_logger("", config.log_file_path, config.log_level, config.log_format)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sphere-sim",
        description="Simulate a pendulum-driven spherical robot and evaluate LiDAR coverage per sensor baseline.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment file with 'section.key = value' lines")
    common.add_argument("--seed", type=int, help="base seed (repeat k uses seed + k)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--mode", choices=BASELINE_MODES, help="sensor baseline")
    common.add_argument("--control", choices=sorted(CONTROL_ALIASES), help="gt: ground-truth state, lio: estimator in the loop")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key, e.g. --set experiment.duration=10")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run one configuration")
    compare = sub.add_parser("compare", parents=[common], help="run every baseline and tabulate")
    compare.add_argument("--reports", type=Path, help="compare existing report.csv files below this directory instead")
    sweep = sub.add_parser("sweep", parents=[common], help="vary one config key over a list of values")
    sweep.add_argument("--key", required=True, help="dotted config key, e.g. control.oscillation_amplitude")
    sweep.add_argument("--values", required=True, help="comma-separated values")
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, str]:
    """
    Turn CLI flags into dotted config overrides.

    Raises:
        ConfigError: for a malformed ``--set`` entry
    """
    overrides: Dict[str, str] = {}
    errors: List[str] = []
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            errors.append(f"--set {item}: expected KEY=VALUE")
            continue
        overrides[key.strip()] = value.strip()
    if errors:
        raise ConfigError(errors)
    if args.seed is not None:
        overrides["experiment.seed"] = str(args.seed)
    if args.out is not None:
        overrides["experiment.output_dir"] = str(args.out)
    if args.mode is not None:
        overrides["experiment.mode"] = args.mode
    if args.control is not None:
        overrides["experiment.control_mode"] = CONTROL_ALIASES[args.control]
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for the application.

    Returns:
        int: Exit code (0 for success, 1 for error)
    """
    args = build_parser().parse_args(argv)
    config = None
    try:
        config = load_config(args.config, overrides=collect_overrides(args))

        logger = setup_logging(config)
        logger.info(f"Starting '{args.command}' (config hash {config.config_hash()[:12]})")
        logger.debug(f"Configuration: {config.to_dict()}")

        # Import here so a bad configuration fails before the heavy modules load
        from src.processors import ComparisonProcessor, compare, read_reports, run_experiment

        if args.command == "run":
            reports = run_experiment(config)
            for report in reports:
                logger.info(f"repeat {report.repeat}: completeness={report.completeness:.4f} "
                            f"tracking error={report.mean_tracking_error:.4f} m")
        elif args.command == "compare":
            processor = ComparisonProcessor(config)
            if args.reports is not None:
                table = compare(read_reports(args.reports))
                processor.write_table(table)
            else:
                table = processor.compare_modes()
            logger.info("Comparison:\n" + table.to_string(index=False))
        elif args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            table = ComparisonProcessor(config).sweep(args.key, values)
            logger.info("Sweep:\n" + table.to_string(index=False))

        logger.info("Finished")
        return 0

    except ConfigError as e:
        logging.error(str(e))
        print(f"\nERROR: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        error_msg = f"A fatal error occurred: {str(e)}"
        logging.exception(error_msg)
        print(f"\nERROR: {error_msg}", file=sys.stderr)
        print(f"See the log file for details: {getattr(config, 'log_file_path', 'unknown')}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
