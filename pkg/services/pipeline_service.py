"""Orchestration of per-camera tracking, cross-view association and evaluation runs."""
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from models.errors import InvalidArgumentError, UndefinedMetricError
from models.schemas import (
    CrossViewConfig,
    Detection,
    EmbeddingPair,
    GlobalBank,
    LossReport,
    MetricReport,
    ProbeRow,
    Scene,
    SweepRow,
    ToyEncoderParams,
    ToyTrainConfig,
    TrackerConfig,
    TrackingRecord,
    TrackingResult,
)
from services.cross_view_service import associate_views, resolve_conflicts
from services.metrics_service import cross_view_scores, evaluate, id_scores
from services.motion_service import KalmanFilter
from services.toytrain_service import ToyTrainer, camera_probe, embed_scene, teacher_embed_scene
from services.tracking_service import SingleViewTracker
from utils.logger import setup_logger

logger = setup_logger(__name__)

SWEEP_RATIOS = (0.5, 0.75, 0.9)
TEACHER_ROW = "teacher"


class MultiCameraTracker:
    """
    One single-view tracker per camera plus a shared global bank.

    Every frame waits for all cameras before cross-view association, so a
    frame's global ids depend on every camera's tracklets of that frame.
    """

    def __init__(
        self,
        num_cameras: int,
        tracker_config: Optional[TrackerConfig] = None,
        cross_config: Optional[CrossViewConfig] = None,
        kf: Optional[KalmanFilter] = None,
    ):
        if num_cameras < 1:
            raise InvalidArgumentError("at least one camera is required")
        self.cross_config = cross_config or CrossViewConfig()
        self.trackers = [SingleViewTracker(v, tracker_config, kf) for v in range(num_cameras)]
        self.bank = GlobalBank()

    def step(self, frame: int, per_camera: Sequence[List[Detection]]) -> List[TrackingRecord]:
        if len(per_camera) != len(self.trackers):
            raise InvalidArgumentError(f"expected {len(self.trackers)} camera lists, got {len(per_camera)}")
        active = [tracker.step(list(dets), frame=frame) for tracker, dets in zip(self.trackers, per_camera)]
        assignment, self.bank = associate_views(active, self.bank, self.cross_config, frame)
        tracklets = [t for per_cam in active for t in per_cam]
        resolve_conflicts(tracklets, assignment)
        return [
            TrackingRecord(frame=frame, camera=t.camera, global_id=t.global_id, box=t.last_box, local_id=t.local_id)
            for t in sorted(tracklets, key=lambda t: t.key)
        ]

    def run(self, scene: Scene) -> TrackingResult:
        if scene.num_cameras != len(self.trackers):
            raise InvalidArgumentError(f"scene has {scene.num_cameras} cameras, tracker has {len(self.trackers)}")
        records: List[TrackingRecord] = []
        for frame in scene.frame_indices:
            records.extend(self.step(frame, scene.at(frame)))
        logger.info(
            f"Tracked {scene.num_frames} frames over {scene.num_cameras} cameras: "
            f"{len(records)} records, {self.bank.next_global_id - 1} global ids"
        )
        return TrackingResult(records=records)


def track_scene(scene: Scene, settings) -> TrackingResult:
    tracker = MultiCameraTracker(
        scene.num_cameras,
        TrackerConfig.from_settings(settings),
        CrossViewConfig.from_settings(settings),
    )
    return tracker.run(scene)


def map_embeddings(scene: Scene, mapper: Callable[[EmbeddingPair], EmbeddingPair]) -> Scene:
    """Rebuild a scene with every embedding passed through mapper."""
    frames = [
        [
            [det.model_copy(update={"embedding": mapper(det.embedding)}) if det.embedding is not None else det
             for det in detections]
            for detections in per_camera
        ]
        for per_camera in scene.frames
    ]
    return Scene(num_cameras=scene.num_cameras, start_frame=scene.start_frame, frames=frames)


# Embedding variants of the camera-sensitivity table: (probe vector, tracker pair).
EMBEDDING_VARIANTS: Dict[str, Callable[[EmbeddingPair], Tuple[Optional[np.ndarray], EmbeddingPair]]] = {
    "f_a": lambda p: (p.f_a, EmbeddingPair(f_a=p.f_a, f_s=p.f_a)),
    "f_s": lambda p: (p.f_s, EmbeddingPair(f_a=p.f_s, f_s=p.f_s)),
    "merged": lambda p: (p.as_vector(), EmbeddingPair(f_a=p.as_vector(), f_s=p.as_vector())),
    "f_a+f_s": lambda p: (None, p),
}


def mean_intra_idf1(truth: TrackingResult, result: TrackingResult, iou_threshold: float, cameras: Sequence[int]) -> float:
    """Per-camera IDF1 of local ids, averaged over cameras with ground truth."""
    scores = []
    for camera in cameras:
        if not any(r.camera == camera for r in truth.records):
            continue
        scores.append(id_scores(truth, result, iou_threshold, camera=camera, use_local_ids=True)[2])
    return float(np.mean(scores)) if scores else 0.0


def _probe_row(name: str, embedded: Scene, variant, truth: TrackingResult, settings) -> ProbeRow:
    pairs = [(camera, det.embedding) for _, camera, _, det in embedded.iter_detections() if det.embedding is not None]
    cameras = [camera for camera, _ in pairs]
    probe_vectors = [variant(pair)[0] for _, pair in pairs]
    accuracy = None
    if probe_vectors and probe_vectors[0] is not None:
        accuracy = camera_probe(probe_vectors, cameras, seed=settings.seed)

    result = track_scene(map_embeddings(embedded, lambda p: variant(p)[1]), settings)
    intra = mean_intra_idf1(truth, result, settings.iou_threshold, range(embedded.num_cameras))
    try:
        aidf1 = cross_view_scores(truth, result, settings.iou_threshold, range(embedded.num_cameras))[2]
    except UndefinedMetricError:
        aidf1 = None
    logger.info(f"Probe {name}: camera accuracy {accuracy}, intra IDF1 {intra:.3f}, AIDF1 {aidf1}")
    return ProbeRow(embedding=name, camera_accuracy=accuracy, intra_idf1=intra, cross_aidf1=aidf1)


def probe_table(scene: Scene, truth: TrackingResult, params: ToyEncoderParams, settings,
                cfg: Optional[ToyTrainConfig] = None) -> List[ProbeRow]:
    """Camera-ID accuracy and tracking quality of each embedding variant, then of raw teacher features."""
    cfg = cfg or ToyTrainConfig()
    embedded = embed_scene(scene, params, cfg.pixel_center)
    rows = [_probe_row(name, embedded, variant, truth, settings) for name, variant in EMBEDDING_VARIANTS.items()]
    rows.append(_probe_row(TEACHER_ROW, teacher_embed_scene(scene, cfg), EMBEDDING_VARIANTS["f_a"], truth, settings))
    return rows


def train_and_evaluate(
    scene: Scene, truth: TrackingResult, cfg: ToyTrainConfig, settings, name: str = "toy"
) -> Tuple[ToyEncoderParams, List[LossReport], MetricReport]:
    params, curve = ToyTrainer(cfg).train(scene)
    result = track_scene(embed_scene(scene, params, cfg.pixel_center), settings)
    report = evaluate(truth, result, settings.iou_threshold, name=name, cameras=range(scene.num_cameras))
    return params, curve, report


def mask_ratio_sweep(
    scene: Scene,
    truth: TrackingResult,
    cfg: ToyTrainConfig,
    settings,
    ratios: Sequence[float] = SWEEP_RATIOS,
    include_teacher: bool = True,
) -> List[SweepRow]:
    """Retrain and evaluate once per mask ratio; the teacher baseline row comes last."""
    rows = []
    for rho in ratios:
        _, curve, report = train_and_evaluate(
            scene, truth, cfg.model_copy(update={"rho": rho}), settings, name=f"rho={rho}"
        )
        final = curve[-1].total if curve else 0.0
        rows.append(SweepRow(rho=rho, final_total=final, report=report))
    if include_teacher:
        result = track_scene(teacher_embed_scene(scene, cfg), settings)
        report = evaluate(truth, result, settings.iou_threshold, name=TEACHER_ROW, cameras=range(scene.num_cameras))
        rows.append(SweepRow(features=TEACHER_ROW, report=report))
    return rows
