"""Tests for the over-time, cross-view and overall metrics."""
from itertools import permutations

import numpy as np
import pytest

from models.errors import UndefinedMetricError
from models.schemas import TrackingResult
from services.metrics_service import (
    cross_view_scores,
    evaluate,
    hota,
    id_scores,
    match_frame,
    mhaa,
    mota,
    overall,
)
from tests.conftest import record
from utils.similarity import iou_matrix


def _result(records):
    return TrackingResult(records=records)


def _two_track_gt(frames=50):
    """Two identities in one camera, 100 boxes for 50 frames."""
    return [record(t, 0, gid, left) for t in range(frames) for gid, left in ((1, 0.0), (2, 100.0))]


def test_match_frame_identical_boxes():
    """Identical boxes match one-to-one."""
    gt = [record(0, 0, 1, 0.0), record(0, 0, 2, 50.0)]
    result = match_frame(gt, gt)
    assert sorted((g, p) for g, p, _ in result.matches) == [(0, 0), (1, 1)]
    assert not result.unmatched_gt and not result.unmatched_pred


def test_match_frame_disjoint_boxes():
    """Disjoint boxes give no correspondence."""
    gt = [record(0, 0, 1, 0.0)]
    pred = [record(0, 0, 1, 500.0)]
    result = match_frame(gt, pred)
    assert result.matches == []
    assert result.unmatched_gt == [0] and result.unmatched_pred == [0]


def test_match_frame_matches_brute_force():
    """3x3 slices agree with an exhaustive search over permutations."""
    rng = np.random.default_rng(0)
    for _ in range(50):
        gt = [record(0, 0, i + 1, float(x)) for i, x in enumerate(rng.uniform(0, 20, 3))]
        pred = [record(0, 0, i + 1, float(x)) for i, x in enumerate(rng.uniform(0, 20, 3))]
        ious = iou_matrix([r.box for r in gt], [r.box for r in pred])

        best = (-1, 0.0)
        for perm in permutations(range(3)):
            pairs = [(g, p) for g, p in enumerate(perm) if ious[g, p] >= 0.5]
            key = (len(pairs), -sum(1.0 - ious[g, p] for g, p in pairs))
            best = max(best, key)

        result = match_frame(gt, pred, 0.5)
        assert len(result.matches) == best[0]
        assert sum(1.0 - iou for _, _, iou in result.matches) == pytest.approx(-best[1], abs=1e-12)


def test_mota_perfect():
    """Predictions equal to the ground truth score 1."""
    gt = _result(_two_track_gt())
    value, counts = mota(gt, gt)
    assert value == 1.0
    assert counts.idsw == 0 and counts.total_gt == 100


def test_mota_hand_counted():
    """100 GT boxes with 3 misses, 2 false positives and 1 switch give 0.94."""
    gt_records = _two_track_gt()
    pred_records = []
    for r in gt_records:
        if r.global_id == 2 and r.frame in (10, 11, 12):
            continue
        pred_id = r.global_id
        if r.global_id == 1 and r.frame >= 25:
            pred_id = 7
        pred_records.append(record(r.frame, 0, pred_id, r.box.left))
    pred_records += [record(3, 0, 50, 300.0), record(4, 0, 51, 300.0)]

    value, counts = mota(_result(gt_records), _result(pred_records))
    assert (counts.fn, counts.fp, counts.idsw) == (3, 2, 1)
    assert value == pytest.approx(0.94)


def test_mota_empty_predictions():
    """Missing every box scores 0."""
    value, counts = mota(_result(_two_track_gt()), _result([]))
    assert value == 0.0
    assert counts.fn == 100


def test_mota_switches_counted_per_camera():
    """An identity seen under different ids in two cameras is not a switch."""
    gt = _result([record(t, cam, 1, 0.0) for t in range(5) for cam in (0, 1)])
    pred = _result([record(t, cam, 10 + cam, 0.0) for t in range(5) for cam in (0, 1)])
    _, counts = mota(gt, pred)
    assert counts.idsw == 0


def test_metrics_need_ground_truth():
    """An empty ground truth is undefined."""
    empty = _result([])
    with pytest.raises(UndefinedMetricError):
        mota(empty, empty)
    with pytest.raises(UndefinedMetricError):
        id_scores(empty, empty)
    with pytest.raises(UndefinedMetricError):
        hota(empty, empty)


def test_id_scores_perfect():
    """Perfect tracking gives (1, 1, 1)."""
    gt = _result(_two_track_gt(10))
    idp, idr, idf1, counts = id_scores(gt, gt)
    assert (idp, idr, idf1) == (1.0, 1.0, 1.0)
    assert counts.idtp == 20


def test_id_scores_split_track():
    """A 10-frame track split into two 5-frame ids has IDF1 0.5."""
    gt = _result([record(t, 0, 1, 0.0) for t in range(10)])
    pred = _result([record(t, 0, 1 if t < 5 else 2, 0.0) for t in range(10)])
    idp, idr, idf1, counts = id_scores(gt, pred)
    assert (counts.idtp, counts.idfp, counts.idfn) == (5, 5, 5)
    assert idf1 == pytest.approx(0.5)
    assert idp == pytest.approx(0.5) and idr == pytest.approx(0.5)


def _random_pair(rng, max_ids=5, cameras=2, frames=6):
    """GT on disjoint slots and a noisy prediction sharing some of them."""
    slots = 100.0 * np.arange(max_ids)
    n_gt = int(rng.integers(1, max_ids + 1))
    gt, pred = [], []
    for t in range(frames):
        for cam in range(cameras):
            for gid in range(1, n_gt + 1):
                if rng.random() < 0.8:
                    gt.append(record(t, cam, gid, slots[gid - 1]))
            used = set()
            for slot in rng.permutation(max_ids)[: int(rng.integers(0, max_ids + 1))]:
                pid = int(rng.integers(1, max_ids + 1))
                if pid in used:
                    continue
                used.add(pid)
                pred.append(record(t, cam, pid, slots[slot]))
    return _result(gt), _result(pred)


def _brute_force_idtp(gt, pred):
    gt_ids = sorted({r.global_id for r in gt.records})
    pred_ids = sorted({r.global_id for r in pred.records})
    overlap = {}
    pred_at = {(r.frame, r.camera, r.box.left): r.global_id for r in pred.records}
    for r in gt.records:
        pid = pred_at.get((r.frame, r.camera, r.box.left))
        if pid is not None:
            overlap[(r.global_id, pid)] = overlap.get((r.global_id, pid), 0) + 1

    options = pred_ids + [None] * len(gt_ids)
    best = 0
    for choice in set(permutations(options, len(gt_ids))):
        score = sum(overlap.get((g, p), 0) for g, p in zip(gt_ids, choice) if p is not None)
        best = max(best, score)
    return best


def test_id_scores_matches_brute_force():
    """IDTP equals the best of every GT to predicted id matching."""
    rng = np.random.default_rng(11)
    for _ in range(40):
        gt, pred = _random_pair(rng)
        _, _, idf1, counts = id_scores(gt, pred)
        idtp = _brute_force_idtp(gt, pred)
        assert counts.idtp == idtp
        assert idf1 == pytest.approx(2 * idtp / (len(gt.records) + len(pred.records)))


def _brute_force_hota(gt, pred):
    """HOTA when every IoU is 0 or 1, so every alpha gives the same matching."""
    pred_at = {(r.frame, r.camera, r.box.left): r.global_id for r in pred.records}
    gt_count, pred_count, pair_tp = {}, {}, {}
    for r in gt.records:
        gt_count[r.global_id] = gt_count.get(r.global_id, 0) + 1
    for r in pred.records:
        pred_count[r.global_id] = pred_count.get(r.global_id, 0) + 1
    tp = 0
    for r in gt.records:
        pid = pred_at.get((r.frame, r.camera, r.box.left))
        if pid is not None:
            tp += 1
            pair_tp[(r.global_id, pid)] = pair_tp.get((r.global_id, pid), 0) + 1
    if tp == 0:
        return 0.0
    fn = len(gt.records) - tp
    fp = len(pred.records) - tp
    det_a = tp / (tp + fn + fp)
    ass_a = sum(
        n * n / (gt_count[g] + pred_count[p] - n) for (g, p), n in pair_tp.items()
    ) / tp
    return float(np.sqrt(det_a * ass_a))


def test_hota_matches_brute_force():
    """HOTA agrees with a direct count of TPA, FNA and FPA."""
    rng = np.random.default_rng(5)
    for _ in range(40):
        gt, pred = _random_pair(rng)
        assert hota(gt, pred).hota == pytest.approx(_brute_force_hota(gt, pred), abs=1e-12)


def test_hota_perfect_and_empty():
    """Perfect prediction scores 1; no prediction scores 0."""
    gt = _result(_two_track_gt(5))
    perfect = hota(gt, gt)
    assert perfect.hota == pytest.approx(1.0)
    assert perfect.det_a == pytest.approx(1.0) and perfect.ass_a == pytest.approx(1.0)
    assert hota(gt, _result([])).hota == 0.0


def test_hota_swap_hand_value():
    """Two objects swapping ids halfway give sqrt(1/3)."""
    gt = _result([record(t, 0, gid, left) for t in range(4) for gid, left in ((1, 0.0), (2, 100.0))])
    pred = _result([
        record(t, 0, (gid if t < 2 else 3 - gid), left)
        for t in range(4)
        for gid, left in ((1, 0.0), (2, 100.0))
    ])
    result = hota(gt, pred)
    assert result.det_a == pytest.approx(1.0)
    assert result.ass_a == pytest.approx(1.0 / 3.0)
    assert result.hota == pytest.approx(np.sqrt(1.0 / 3.0))


def _cross_view_gt(frames=10, identities=3):
    return [
        record(t, cam, gid, 100.0 * gid)
        for t in range(frames)
        for cam in (0, 1)
        for gid in range(1, identities + 1)
    ]


def test_cross_view_perfect():
    """Consistent global ids across cameras give (1, 1, 1) and MHAA 1."""
    gt = _result(_cross_view_gt())
    aidp, aidr, aidf1, counts = cross_view_scores(gt, gt)
    assert (aidp, aidr, aidf1) == (1.0, 1.0, 1.0)
    assert counts.tp == 30
    assert mhaa(gt, gt) == 1.0


def test_cross_view_no_links():
    """Disjoint id sets per camera never link views."""
    gt = _result(_cross_view_gt())
    pred = _result([record(r.frame, r.camera, r.global_id + 10 * r.camera, r.box.left) for r in gt.records])
    _, aidr, aidf1, counts = cross_view_scores(gt, pred)
    assert aidr == 0.0 and aidf1 == 0.0
    assert counts.fp == 0 and counts.fn == 30


def test_cross_view_swapped_link():
    """Swapping two identities in one camera leaves one correct link per frame."""
    gt = _result(_cross_view_gt())
    swap = {1: 1, 2: 3, 3: 2}
    pred = _result([
        record(r.frame, r.camera, swap[r.global_id] if r.camera == 1 else r.global_id, r.box.left)
        for r in gt.records
    ])
    aidp, aidr, aidf1, counts = cross_view_scores(gt, pred)
    assert (counts.tp, counts.fp, counts.fn) == (10, 20, 20)
    assert aidp == pytest.approx(1 / 3) and aidr == pytest.approx(1 / 3)
    assert aidf1 == pytest.approx(1 / 3)
    assert mhaa(gt, pred) == 0.0


def test_mhaa_hand_counted():
    """10 GT pairs with 2 missed and 1 spurious give 0.7."""
    gt_records = [record(t, cam, 1, 0.0) for t in range(10) for cam in (0, 1)]
    gt_records += [record(2, 0, 2, 200.0), record(2, 1, 3, 400.0)]
    pred_records = [
        record(r.frame, r.camera, 5 if (r.camera == 1 and r.frame < 2) else 1, 0.0)
        for r in gt_records
        if r.global_id == 1
    ]
    pred_records += [record(2, 0, 9, 200.0), record(2, 1, 9, 400.0)]
    assert mhaa(_result(gt_records), _result(pred_records)) == pytest.approx(0.7)


def test_cross_view_needs_two_cameras():
    """A single camera leaves the cross-view metrics undefined."""
    gt = _result(_two_track_gt(5))
    with pytest.raises(UndefinedMetricError):
        cross_view_scores(gt, gt)
    with pytest.raises(UndefinedMetricError):
        mhaa(gt, gt)


def test_overall_means():
    """A and F are plain means; undefined components propagate."""
    assert overall(0.673, 0.95, 0.504, 0.406) == pytest.approx((0.678, 0.5885))
    assert overall(0.0, 0.0, 0.0, 0.0) == (0.0, 0.0)
    assert overall(0.5, 0.5, None, None) == (None, None)


def test_evaluate_perfect_report():
    """pred = gt scores 1 everywhere."""
    gt = _result(_cross_view_gt(5))
    report = evaluate(gt, gt)
    for value in (report.idf1, report.mota, report.aidf1, report.mhaa, report.overall_a, report.overall_f):
        assert value == pytest.approx(1.0)
    assert report.hota == pytest.approx(1.0)
    assert report.counts.idsw == 0


def test_evaluate_single_camera_leaves_cross_view_undefined():
    """Cross-view fields are None with one camera; over-time ones are present."""
    gt = _result(_two_track_gt(5))
    report = evaluate(gt, gt)
    assert report.aidf1 is None and report.mhaa is None
    assert report.overall_a is None and report.overall_f is None
    assert report.mota == 1.0


def test_metrics_invariant_under_relabeling():
    """Permuting predicted ids leaves every score unchanged."""
    rng = np.random.default_rng(3)
    for _ in range(10):
        gt, pred = _random_pair(rng)
        mapping = {pid: 100 + int(new) for pid, new in zip(range(1, 6), rng.permutation(5))}
        relabeled = _result([r.model_copy(update={'global_id': mapping[r.global_id]}) for r in pred.records])
        a, b = evaluate(gt, pred), evaluate(gt, relabeled)
        for field in ("idp", "idr", "idf1", "mota", "hota", "aidp", "aidr", "aidf1", "mhaa"):
            assert getattr(a, field) == pytest.approx(getattr(b, field))


def test_metric_ranges_on_random_scenarios():
    """Rates stay in range on fuzzed inputs."""
    rng = np.random.default_rng(17)
    for _ in range(20):
        gt, pred = _random_pair(rng)
        report = evaluate(gt, pred)
        assert report.mota <= 1.0
        for value in (report.idp, report.idr, report.idf1, report.hota, report.det_a, report.ass_a):
            assert 0.0 <= value <= 1.0
        for value in (report.aidp, report.aidr, report.aidf1, report.mhaa):
            assert value is None or 0.0 <= value <= 1.0
