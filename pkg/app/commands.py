"""Subcommand handlers; each takes parsed arguments and settings and returns an exit status."""
import argparse
from pathlib import Path
from typing import Callable, Dict

from pydantic import ValidationError

from app.config import Settings
from models.errors import UsageError
from models.schemas import Scenario, SynthConfig, ToyTrainConfig
from services.metrics_service import evaluate
from services.objective_service import weights_for
from services.pipeline_service import mask_ratio_sweep, probe_table, track_scene
from services.synth_service import generate, perturb_malfunction, perturb_misalign
from services.toytrain_service import ToyTrainer
from utils.logger import setup_logger
from utils.parsers import (
    attach_embeddings,
    parse_detections,
    parse_embeddings,
    parse_ground_truth,
    parse_results,
    read_params,
    write_detections,
    write_embeddings,
    write_ground_truth,
    write_loss_curve,
    write_params,
    write_probe_table,
    write_report_csv,
    write_report_json,
    write_results,
    write_sweep,
)
from utils.validators import ArgumentValidator

logger = setup_logger(__name__)


def _require(ok_error) -> None:
    ok, error = ok_error
    if not ok:
        raise UsageError(error)


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _scenario(args: argparse.Namespace, settings: Settings, with_crops: bool = False) -> Scenario:
    """Generate the scenario described by the shared scenario flags, perturbations included."""
    try:
        cfg = SynthConfig(
            num_identities=args.identities,
            num_cameras=args.cameras,
            num_frames=args.frames,
            view_noise=args.view_noise,
            view_distortion=args.view_distortion,
            miss_rate=args.miss_rate,
            orthogonal_latents=args.orthogonal,
            with_crops=with_crops,
            seed=settings.seed,
        )
    except ValidationError as e:
        raise UsageError(f"invalid scenario: {e.errors()[0]['msg']}") from None

    _require(ArgumentValidator.validate_camera_list(args.malfunction, cfg.num_cameras))
    _require(ArgumentValidator.validate_camera_list(args.misalign, cfg.num_cameras))
    _require(ArgumentValidator.validate_fraction(args.crop_area, "--crop-area"))

    scenario = generate(cfg)
    for camera in ArgumentValidator.parse_camera_list(args.misalign):
        scenario = perturb_misalign(scenario, camera, args.crop_area, seed=settings.seed)
    return perturb_malfunction(scenario, ArgumentValidator.parse_camera_list(args.malfunction))


def _toy_config(args: argparse.Namespace, settings: Settings) -> ToyTrainConfig:
    overrides = {}
    if getattr(args, "objective", None):
        overrides["weights"] = weights_for(args.objective)
    return ToyTrainConfig.from_settings(settings, **overrides)


def simulate(args: argparse.Namespace, settings: Settings) -> int:
    """Write detections, embeddings and ground truth of a seeded scenario."""
    scenario = _scenario(args, settings)
    out = _out_dir(args.out)
    write_detections(scenario.scene, out / "detections.csv")
    write_embeddings(scenario.scene, out / "embeddings.csv")
    write_ground_truth(scenario.truth, out / "gt.csv")
    logger.info(f"Scenario written to {out}")
    return 0


def track(args: argparse.Namespace, settings: Settings) -> int:
    """Run per-camera tracking and cross-view association on detection files."""
    _require(ArgumentValidator.validate_input_file(args.detections, "detections"))
    _require(ArgumentValidator.validate_input_file(args.embeddings, "embeddings"))
    scene = parse_detections(args.detections, num_cameras=args.cameras)
    scene = attach_embeddings(scene, parse_embeddings(args.embeddings))
    result = track_scene(scene, settings)
    write_results(result, args.out)
    return 0


def eval_command(args: argparse.Namespace, settings: Settings) -> int:
    """Score a results file against ground truth and write CSV and JSON reports."""
    _require(ArgumentValidator.validate_input_file(args.gt, "gt"))
    _require(ArgumentValidator.validate_input_file(args.results, "results"))
    truth = parse_ground_truth(args.gt)
    result = parse_results(args.results)
    cameras = range(args.cameras) if args.cameras is not None else sorted(set(truth.cameras) | set(result.cameras))
    report = evaluate(truth, result, settings.iou_threshold, name=args.name, cameras=cameras)

    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    write_report_csv([report], prefix.with_suffix(".csv"))
    write_report_json([report], prefix.with_suffix(".json"))
    logger.info(f"Report written to {prefix.with_suffix('.csv')} and {prefix.with_suffix('.json')}")
    return 0


def train_toy(args: argparse.Namespace, settings: Settings) -> int:
    """Train the toy encoder on a synthetic scenario with crops."""
    scenario = _scenario(args, settings, with_crops=True)
    params, curve = ToyTrainer(_toy_config(args, settings)).train(scenario.scene)
    out = _out_dir(args.out)
    write_params(params, out / "params.json")
    write_loss_curve(curve, out / "loss_curve.csv")
    return 0


def probe(args: argparse.Namespace, settings: Settings) -> int:
    """Camera probe and tracking quality of each embedding variant."""
    scenario = _scenario(args, settings, with_crops=True)
    cfg = _toy_config(args, settings)
    if args.params is not None:
        _require(ArgumentValidator.validate_input_file(args.params, "params"))
        params = read_params(args.params)
    else:
        params, _ = ToyTrainer(cfg).train(scenario.scene)
    rows = probe_table(scenario.scene, scenario.truth, params, settings, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_probe_table(rows, out)
    return 0


def sweep(args: argparse.Namespace, settings: Settings) -> int:
    """Retrain and evaluate over a grid of mask ratios."""
    try:
        ratios = [float(x) for x in args.ratios.split(",")]
    except ValueError:
        raise UsageError(f"mask ratios '{args.ratios}' must be comma-separated numbers") from None
    _require(ArgumentValidator.validate_ratios(ratios))
    scenario = _scenario(args, settings, with_crops=True)
    rows = mask_ratio_sweep(scenario.scene, scenario.truth, _toy_config(args, settings), settings, ratios)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_sweep(rows, out)
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace, Settings], int]] = {
    "simulate": simulate,
    "track": track,
    "eval": eval_command,
    "train-toy": train_toy,
    "probe": probe,
    "sweep": sweep,
}
