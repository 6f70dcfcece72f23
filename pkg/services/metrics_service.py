"""Over-time, cross-view and overall tracking metrics."""
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from models.errors import UndefinedMetricError
from models.schemas import INFEASIBLE, CostMatrix, MetricCounts, MetricReport, TrackingRecord, TrackingResult
from services.assignment_service import solve_assignment
from utils.logger import setup_logger
from utils.similarity import iou_matrix

logger = setup_logger(__name__)

HOTA_ALPHAS = tuple(round(0.05 * k, 2) for k in range(1, 20))


@dataclass
class FrameMatch:
    """Correspondence between the GT and predicted records of one (frame, camera) slice."""
    matches: List[Tuple[int, int, float]] = field(default_factory=list)
    unmatched_gt: List[int] = field(default_factory=list)
    unmatched_pred: List[int] = field(default_factory=list)


def match_frame(
    gt: Sequence[TrackingRecord], pred: Sequence[TrackingRecord], iou_threshold: float = 0.5
) -> FrameMatch:
    """Minimum 1-IoU assignment; pairs below the IoU threshold are infeasible."""
    if not gt or not pred:
        return FrameMatch(unmatched_gt=list(range(len(gt))), unmatched_pred=list(range(len(pred))))

    ious = iou_matrix([r.box for r in gt], [r.box for r in pred])
    cost = np.where(ious >= iou_threshold, 1.0 - ious, INFEASIBLE)
    matching = solve_assignment(CostMatrix(cost=cost))
    matched_gt = {g for g, _ in matching.pairs}
    matched_pred = {p for _, p in matching.pairs}
    return FrameMatch(
        matches=[(g, p, float(ious[g, p])) for g, p in matching.pairs],
        unmatched_gt=[g for g in range(len(gt)) if g not in matched_gt],
        unmatched_pred=[p for p in range(len(pred)) if p not in matched_pred],
    )


def _slices(gt: TrackingResult, pred: TrackingResult):
    """Yield (frame, camera, gt records, pred records) in frame then camera order."""
    gt_slices, pred_slices = gt.by_slice(), pred.by_slice()
    for key in sorted(set(gt_slices) | set(pred_slices)):
        yield key[0], key[1], gt_slices.get(key, []), pred_slices.get(key, [])


def _require_gt(gt: TrackingResult) -> int:
    total = len(gt.records)
    if total == 0:
        raise UndefinedMetricError("no ground-truth boxes")
    return total


def mota(gt: TrackingResult, pred: TrackingResult, iou_threshold: float = 0.5) -> Tuple[float, MetricCounts]:
    """
    1 - (FP + FN + IDSW) / GT with counts pooled over cameras.

    An identity switch is counted when a GT identity's matched predicted id
    differs from the one at its previous matched frame in the same camera.
    """
    total_gt = _require_gt(gt)
    fp = fn = idsw = 0
    last_pred_for_gt: Dict[Tuple[int, int], int] = {}
    for _, camera, gt_recs, pred_recs in _slices(gt, pred):
        result = match_frame(gt_recs, pred_recs, iou_threshold)
        fn += len(result.unmatched_gt)
        fp += len(result.unmatched_pred)
        for g, p, _ in result.matches:
            key = (camera, gt_recs[g].global_id)
            pred_id = pred_recs[p].global_id
            if key in last_pred_for_gt and last_pred_for_gt[key] != pred_id:
                idsw += 1
            last_pred_for_gt[key] = pred_id

    counts = MetricCounts(fp=fp, fn=fn, idsw=idsw, total_gt=total_gt)
    return 1.0 - (fp + fn + idsw) / total_gt, counts


def _restrict(result: TrackingResult, camera: Optional[int], use_local_ids: bool) -> TrackingResult:
    if camera is None:
        return result
    return result.for_camera(camera, use_local_ids=use_local_ids)


def identity_overlaps(
    gt: TrackingResult, pred: TrackingResult, iou_threshold: float = 0.5
) -> Dict[Tuple[int, int], int]:
    """Number of slices in which a GT id and a predicted id overlap at the threshold."""
    overlaps: Dict[Tuple[int, int], int] = defaultdict(int)
    for _, _, gt_recs, pred_recs in _slices(gt, pred):
        if not gt_recs or not pred_recs:
            continue
        ious = iou_matrix([r.box for r in gt_recs], [r.box for r in pred_recs])
        for g, p in zip(*np.nonzero(ious >= iou_threshold)):
            overlaps[(gt_recs[g].global_id, pred_recs[p].global_id)] += 1
    return dict(overlaps)


def id_scores(
    gt: TrackingResult,
    pred: TrackingResult,
    iou_threshold: float = 0.5,
    camera: Optional[int] = None,
    use_local_ids: bool = False,
) -> Tuple[float, float, float, MetricCounts]:
    """
    Identity precision, recall and F1 under the best one-to-one id matching.

    Args:
        gt: Ground truth
        pred: Tracker output
        iou_threshold: Box overlap needed for a slice to count
        camera: Restrict both sides to one camera
        use_local_ids: With camera set, score predicted local ids instead of global ids

    Returns:
        Tuple of (IDP, IDR, IDF1, counts)
    """
    gt = _restrict(gt, camera, False)
    pred = _restrict(pred, camera, use_local_ids)
    total_gt = _require_gt(gt)
    total_pred = len(pred.records)

    overlaps = identity_overlaps(gt, pred, iou_threshold)
    gt_ids = sorted({r.global_id for r in gt.records})
    pred_ids = sorted({r.global_id for r in pred.records})
    idtp = 0
    if gt_ids and pred_ids:
        weights = np.array([[overlaps.get((g, p), 0) for p in pred_ids] for g in gt_ids], dtype=float)
        cost = np.where(weights > 0, -weights, INFEASIBLE)
        matching = solve_assignment(CostMatrix(cost=cost))
        idtp = int(sum(weights[g, p] for g, p in matching.pairs))

    idfp, idfn = total_pred - idtp, total_gt - idtp
    idp = idtp / total_pred if total_pred else 0.0
    idr = idtp / total_gt
    idf1 = 2 * idtp / (total_gt + total_pred)
    return idp, idr, idf1, MetricCounts(idtp=idtp, idfp=idfp, idfn=idfn, total_gt=total_gt)


@dataclass
class HotaResult:
    hota: float
    det_a: float
    ass_a: float
    per_alpha: List[float]


def hota(gt: TrackingResult, pred: TrackingResult, alphas: Sequence[float] = HOTA_ALPHAS) -> HotaResult:
    """
    Higher-order tracking accuracy averaged over IoU thresholds.

    At each alpha, AssA averages TPA / (TPA + FNA + FPA) over true positives,
    where the counts come from whole-sequence id co-occurrence.
    """
    _require_gt(gt)
    gt_count: Dict[int, int] = defaultdict(int)
    pred_count: Dict[int, int] = defaultdict(int)
    for r in gt.records:
        gt_count[r.global_id] += 1
    for r in pred.records:
        pred_count[r.global_id] += 1
    slices = list(_slices(gt, pred))

    hotas, det_as, ass_as = [], [], []
    for alpha in alphas:
        tp = fn = fp = 0
        pair_tp: Dict[Tuple[int, int], int] = defaultdict(int)
        for _, _, gt_recs, pred_recs in slices:
            result = match_frame(gt_recs, pred_recs, alpha)
            tp += len(result.matches)
            fn += len(result.unmatched_gt)
            fp += len(result.unmatched_pred)
            for g, p, _ in result.matches:
                pair_tp[(gt_recs[g].global_id, pred_recs[p].global_id)] += 1

        det_a = tp / (tp + fn + fp) if tp + fn + fp else 0.0
        ass_a = 0.0
        if tp:
            ass_a = sum(
                tpa * tpa / (gt_count[g] + pred_count[p] - tpa) for (g, p), tpa in pair_tp.items()
            ) / tp
        det_as.append(det_a)
        ass_as.append(ass_a)
        hotas.append(float(np.sqrt(det_a * ass_a)))

    return HotaResult(
        hota=float(np.mean(hotas)),
        det_a=float(np.mean(det_as)),
        ass_a=float(np.mean(ass_as)),
        per_alpha=hotas,
    )


@dataclass
class CrossViewCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def gt_pairs(self) -> int:
        return self.tp + self.fn


def cross_view_counts(
    gt: TrackingResult,
    pred: TrackingResult,
    iou_threshold: float = 0.5,
    cameras: Optional[Sequence[int]] = None,
) -> CrossViewCounts:
    """
    Compare GT and predicted cross-camera identity links per frame and camera pair.

    A predicted link joins the two GT detections its boxes are matched to;
    links with an unmatched end carry no GT identity and are skipped.
    """
    cameras = sorted(set(cameras) if cameras is not None else set(gt.cameras) | set(pred.cameras))
    if len(cameras) < 2:
        raise UndefinedMetricError(f"cross-view metrics need two cameras, got {len(cameras)}")

    gt_slices, pred_slices = gt.by_slice(), pred.by_slice()
    frames = sorted({f for f, _ in gt_slices} | {f for f, _ in pred_slices})
    counts = CrossViewCounts()
    for frame in frames:
        gt_ids: Dict[int, set] = {}
        pred_links: Dict[int, Dict[int, int]] = {}
        for camera in cameras:
            gt_recs = gt_slices.get((frame, camera), [])
            pred_recs = pred_slices.get((frame, camera), [])
            gt_ids[camera] = {r.global_id for r in gt_recs}
            result = match_frame(gt_recs, pred_recs, iou_threshold)
            pred_links[camera] = {pred_recs[p].global_id: gt_recs[g].global_id for g, p, _ in result.matches}

        for cam_a, cam_b in combinations(cameras, 2):
            truth = {(g, g) for g in gt_ids[cam_a] & gt_ids[cam_b]}
            shared = set(pred_links[cam_a]) & set(pred_links[cam_b])
            claimed = {(pred_links[cam_a][p], pred_links[cam_b][p]) for p in shared}
            counts.tp += len(truth & claimed)
            counts.fp += len(claimed - truth)
            counts.fn += len(truth - claimed)
    return counts


def cross_view_scores(
    gt: TrackingResult,
    pred: TrackingResult,
    iou_threshold: float = 0.5,
    cameras: Optional[Sequence[int]] = None,
) -> Tuple[float, float, float, CrossViewCounts]:
    """Returns (AIDP, AIDR, AIDF1, counts)."""
    counts = cross_view_counts(gt, pred, iou_threshold, cameras)
    if counts.gt_pairs == 0:
        raise UndefinedMetricError("no ground-truth cross-view pairs")
    aidp = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    aidr = counts.tp / counts.gt_pairs
    aidf1 = 2 * counts.tp / (2 * counts.tp + counts.fp + counts.fn)
    return aidp, aidr, aidf1, counts


def mhaa_from_counts(counts: CrossViewCounts) -> float:
    if counts.gt_pairs == 0:
        raise UndefinedMetricError("no ground-truth cross-view pairs")
    return max(0.0, 1.0 - (counts.fp + counts.fn) / counts.gt_pairs)


def mhaa(
    gt: TrackingResult,
    pred: TrackingResult,
    iou_threshold: float = 0.5,
    cameras: Optional[Sequence[int]] = None,
) -> float:
    """max(0, 1 - (spurious + missed links) / GT links)."""
    return mhaa_from_counts(cross_view_counts(gt, pred, iou_threshold, cameras))


def overall(idf1: float, mota_value: float, aidf1: Optional[float], mhaa_value: Optional[float]):
    """Returns (A, F); a side is None when its cross-view component is undefined."""
    overall_a = None if mhaa_value is None else (mota_value + mhaa_value) / 2.0
    overall_f = None if aidf1 is None else (idf1 + aidf1) / 2.0
    return overall_a, overall_f


def evaluate(
    gt: TrackingResult,
    pred: TrackingResult,
    iou_threshold: float = 0.5,
    name: str = "scenario",
    cameras: Optional[Sequence[int]] = None,
) -> MetricReport:
    """Compute every metric; undefined cross-view metrics are left as None."""
    mota_value, mota_counts = mota(gt, pred, iou_threshold)
    idp, idr, idf1, id_counts = id_scores(gt, pred, iou_threshold)
    hota_result = hota(gt, pred)

    aidp = aidr = aidf1 = mhaa_value = None
    cross = CrossViewCounts()
    try:
        aidp, aidr, aidf1, cross = cross_view_scores(gt, pred, iou_threshold, cameras)
        mhaa_value = mhaa_from_counts(cross)
    except UndefinedMetricError as e:
        logger.warning(f"{name}: cross-view metrics undefined ({e})")

    overall_a, overall_f = overall(idf1, mota_value, aidf1, mhaa_value)
    counts = MetricCounts(
        fp=mota_counts.fp,
        fn=mota_counts.fn,
        idsw=mota_counts.idsw,
        total_gt=mota_counts.total_gt,
        idtp=id_counts.idtp,
        idfp=id_counts.idfp,
        idfn=id_counts.idfn,
        cross_tp=cross.tp,
        cross_fp=cross.fp,
        cross_fn=cross.fn,
    )
    logger.info(f"{name}: MOTA {mota_value:.4f}, IDF1 {idf1:.4f}, HOTA {hota_result.hota:.4f}, AIDF1 {aidf1}")
    return MetricReport(
        name=name,
        idp=idp,
        idr=idr,
        idf1=idf1,
        mota=mota_value,
        hota=hota_result.hota,
        det_a=hota_result.det_a,
        ass_a=hota_result.ass_a,
        aidp=aidp,
        aidr=aidr,
        aidf1=aidf1,
        mhaa=mhaa_value,
        overall_a=overall_a,
        overall_f=overall_f,
        counts=counts,
    )
