"""Command-line entry point: python -m app.main <command> [options]."""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from app.commands import COMMANDS
from app.config import Settings, load_settings
from models.errors import (
    InvalidArgumentError,
    NumericError,
    ParseError,
    UndefinedMetricError,
    UsageError,
)
from utils.logger import set_level, setup_logger

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="key=value settings file")
    common.add_argument("--seed", type=int, default=None, help="master random seed")
    common.add_argument("--log-level", dest="log_level", default=None,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--n-init", dest="n_init", type=int, default=None,
                        help="hits before a tracklet is confirmed")
    common.add_argument("--max-age", dest="max_age", type=int, default=None,
                        help="missed frames before a confirmed tracklet is deleted")
    common.add_argument("--iou-threshold", dest="iou_threshold", type=float, default=None)
    return common


def _scenario_options() -> argparse.ArgumentParser:
    scenario = argparse.ArgumentParser(add_help=False)
    scenario.add_argument("--identities", type=int, default=8)
    scenario.add_argument("--cameras", type=int, default=3)
    scenario.add_argument("--frames", type=int, default=200)
    scenario.add_argument("--view-noise", dest="view_noise", type=float, default=0.05)
    scenario.add_argument("--view-distortion", dest="view_distortion", type=float, default=0.3)
    scenario.add_argument("--miss-rate", dest="miss_rate", type=float, default=0.0)
    scenario.add_argument("--orthogonal", action="store_true", help="unit-basis identity latents")
    scenario.add_argument("--malfunction", default=None, help="cameras emitting nothing, e.g. 0,2")
    scenario.add_argument("--misalign", default=None, help="cameras cropped and rescaled, e.g. 1")
    scenario.add_argument("--crop-area", dest="crop_area", type=float, default=0.9,
                          help="area fraction kept by --misalign")
    return scenario


def _training_options() -> argparse.ArgumentParser:
    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--objective", choices=["full", "distill-only", "recon-only"], default=None)
    training.add_argument("--epochs", type=int, default=None)
    training.add_argument("--lr", type=float, default=None)
    training.add_argument("--mask-ratio", dest="mask_ratio", type=float, default=None)
    return training


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="calibfree",
        description="Calibration-free multi-camera multi-object tracking toolkit",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common, scenario, training = _common_options(), _scenario_options(), _training_options()

    def add_command(name: str, parents: List[argparse.ArgumentParser], summary: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=parents, help=summary, formatter_class=argparse.ArgumentDefaultsHelpFormatter)

    simulate = add_command("simulate", [common, scenario], "generate a synthetic scenario")
    simulate.add_argument("--out", required=True, help="output directory")

    track = add_command("track", [common], "track detections across cameras")
    track.add_argument("--detections", type=Path, required=True)
    track.add_argument("--embeddings", type=Path, required=True)
    track.add_argument("--cameras", type=int, default=None, help="camera count when some cameras have no rows")
    track.add_argument("--out", type=Path, required=True, help="results CSV")

    evaluate = add_command("eval", [common], "score results against ground truth")
    evaluate.add_argument("--gt", type=Path, required=True)
    evaluate.add_argument("--results", type=Path, required=True)
    evaluate.add_argument("--cameras", type=int, default=None)
    evaluate.add_argument("--name", default="scenario")
    evaluate.add_argument("--out", type=Path, required=True, help="report path prefix (.csv and .json)")

    train = add_command("train-toy", [common, scenario, training], "train the toy encoder")
    train.add_argument("--out", required=True, help="output directory")

    probe = add_command("probe", [common, scenario, training], "camera-sensitivity table")
    probe.add_argument("--params", type=Path, default=None, help="trained parameters; trains when absent")
    probe.add_argument("--out", type=Path, required=True)

    sweep = add_command("sweep", [common, scenario, training], "mask-ratio sweep")
    sweep.add_argument("--ratios", default="0.5,0.75,0.9")
    sweep.add_argument("--out", type=Path, required=True)
    return parser


def _settings(args: argparse.Namespace) -> Settings:
    overrides = {name: getattr(args, name) for name in Settings.model_fields if hasattr(args, name)}
    return load_settings(args.config, overrides)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run one command and map failures to exit codes.

    Returns:
        0 success, 2 usage error, 3 data error, 4 numeric failure
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        settings = _settings(args)
    except (ValidationError, FileNotFoundError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE
    set_level(settings.log_level)

    try:
        return COMMANDS[args.command](args, settings)
    except UsageError as e:
        logger.error(f"Usage error: {e}")
        return EXIT_USAGE
    except (ParseError, InvalidArgumentError, UndefinedMetricError, OSError) as e:
        logger.error(f"Data error: {e}")
        return EXIT_DATA
    except NumericError as e:
        logger.error(f"Numeric failure in {e.component}: {e}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
