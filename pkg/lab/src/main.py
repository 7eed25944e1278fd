import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import src.experiments as experiments
import src.utils as utils
from pydantic import ValidationError
from src.config import ExperimentConfig, load_experiment, settings, with_overrides
from src.doc import CONFIG_GRAMMAR, DESCRIPTION
from src.errors import ConfigurationError, NlsLabError
from src.monitoring import logger

COMMANDS = {
    "run": "Evolve one trajectory and write its diagnostics.",
    "sweep-n": "Sweep the I-operator cutoff and fit the increment decay.",
    "morawetz": "Check the interaction Morawetz inequalities for u and Iu.",
    "regions": "Sample the four-region multiplier bounds.",
    "plan": "Print the scaling plan for (s, T0, m0).",
    "oracle-validate": "Compare every fast path against its brute-force counterpart.",
}

PLAN_FLAGS = {
    "s": float,
    "T0": float,
    "m0": float,
    "epsilon": float,
    "C0": float,
    "C_prime": float,
    "delta_exp": float,
}


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises instead of printing usage and exiting with status 2."""

    def error(self, message: str):
        raise ConfigurationError(message, usage=self.format_usage().strip())


def _unsigned_64(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError(
            f"seed must be an unsigned 64-bit integer: {value}"
        )
    return seed


def _positive_int(value: str) -> int:
    count = int(value)
    if count < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer: {value}")
    return count


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="nls-lab",
        description=DESCRIPTION,
        epilog=CONFIG_GRAMMAR,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment file (KEY=value lines)")
    common.add_argument("--out", help="artifact directory, overrides OUTPUT__DIRECTORY")
    common.add_argument("--seed", type=_unsigned_64, help="overrides DATA__SEED")
    common.add_argument(
        "--threads",
        type=_positive_int,
        default=settings.threads,
        help="worker pool size for sweeps and checks",
    )
    commands = parser.add_subparsers(
        dest="command", required=True, parser_class=ArgumentParser
    )
    for name, text in COMMANDS.items():
        sub = commands.add_parser(name, parents=[common], help=text, description=text)
        if name == "plan":
            for flag, kind in PLAN_FLAGS.items():
                sub.add_argument(
                    f"--{flag}", type=kind, help=f"overrides PLANNER__{flag.upper()}"
                )
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_experiment(args.config) if args.config else ExperimentConfig()
    config = with_overrides(config, seed=args.seed, out=args.out)
    if args.command == "plan":
        update = {
            flag: getattr(args, flag)
            for flag in PLAN_FLAGS
            if getattr(args, flag) is not None
        }
        config = config.copy(update={"planner": config.planner.copy(update=update)})
    return config


def _artifacts(command: str, paths: Dict[str, Path]) -> Dict[str, Any]:
    return {"command": command, "artifacts": {k: str(v) for k, v in paths.items()}}


def run_command(args: argparse.Namespace) -> Any:
    if args.command == "oracle-validate":
        reports = experiments.cmd_oracle_validate(args.out)
        return {"command": args.command, "reports": len(reports), "failed": 0}

    config = load_config(args)
    if args.command == "plan":
        return experiments.cmd_plan(config, args.out)
    drivers = {
        "run": experiments.cmd_run,
        "sweep-n": experiments.cmd_sweep_n,
        "morawetz": experiments.cmd_morawetz,
        "regions": experiments.cmd_regions,
    }
    return _artifacts(args.command, drivers[args.command](config, args.threads))


def _emit(obj: Any):
    sys.stdout.write(utils.dumps(obj).decode() + "\n")
    sys.stdout.flush()


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; every outcome is a single JSON object on stdout."""
    try:
        args = build_parser().parse_args(argv)
        logger.append_keys(command=args.command)
        result = run_command(args)
    except NlsLabError as e:
        logger.error(e.message, extra={"kind": e.kind})
        _emit(e.to_dict())
        return e.exit_code
    except ValidationError as e:
        _emit(
            {
                "error": ConfigurationError.kind,
                "message": "Invalid configuration",
                "problems": e.errors(),
            }
        )
        return ConfigurationError.exit_code
    except Exception as e:
        logger.exception("Unhandled error")
        _emit({"error": "internal", "message": str(e), "type": type(e).__name__})
        return 1
    _emit(result)
    return 0
