"""Tests for the synthetic scenario generator and camera perturbations."""
import numpy as np
import pytest

from models.errors import InvalidArgumentError
from models.schemas import SynthConfig, Window
from services.synth_service import (
    default_windows,
    generate,
    overlap_fraction,
    perturb_malfunction,
    perturb_misalign,
)


def _detection_rows(scene, camera=None):
    return [
        (f, c, det.identity, det.box.left, det.box.top, det.box.width, det.box.height)
        for f, c, _, det in scene.iter_detections()
        if camera is None or c == camera
    ]


def test_generate_is_deterministic():
    """The same seed reproduces the scenario exactly."""
    cfg = SynthConfig(num_frames=30, with_crops=True)
    a, b = generate(cfg), generate(cfg)
    assert _detection_rows(a.scene) == _detection_rows(b.scene)
    for (_, _, _, da), (_, _, _, db) in zip(a.scene.iter_detections(), b.scene.iter_detections()):
        assert np.array_equal(da.embedding.f_a, db.embedding.f_a)
        assert np.array_equal(da.crop.values, db.crop.values)
    assert a.truth == b.truth


def test_different_seeds_differ():
    """Changing the seed changes the trajectories."""
    a = generate(SynthConfig(num_frames=10, seed=1))
    b = generate(SynthConfig(num_frames=10, seed=2))
    assert _detection_rows(a.scene) != _detection_rows(b.scene)


def test_default_overlap_statistics():
    """On the standard seed at least 30% of visible entries are seen twice."""
    scenario = generate(SynthConfig())
    assert overlap_fraction(scenario) >= 0.30


def test_default_windows_overlap():
    """Default windows intersect pairwise and stay on the plane."""
    windows = default_windows(3)
    for i, a in enumerate(windows):
        assert 0.0 <= a.x0 and a.x1 <= 100.0
        for b in windows[i + 1:]:
            assert a.intersects(b)


def test_visible_identity_detected_in_both_cameras():
    """With no misses an identity inside two windows is in both cameras every frame."""
    cfg = SynthConfig(
        num_identities=1,
        num_cameras=2,
        num_frames=20,
        camera_windows=[Window(x0=0, y0=0, x1=100, y1=100), Window(x0=0, y0=0, x1=100, y1=100)],
    )
    scene = generate(cfg).scene
    for frame in scene.frame_indices:
        assert [len(d) for d in scene.at(frame)] == [1, 1]


def test_undistorted_views_share_embeddings():
    """Without noise or distortion an identity looks the same in every camera."""
    cfg = SynthConfig(num_frames=20, view_noise=0.0, view_distortion=0.0)
    scenario = generate(cfg)
    by_identity = {}
    for _, _, _, det in scenario.scene.iter_detections():
        by_identity.setdefault(det.identity, []).append(det.embedding.f_a)
    for identity, vectors in by_identity.items():
        for vector in vectors:
            assert np.array_equal(vector, scenario.latents[identity])


def test_orthogonal_latents():
    """Orthogonal latents are unit basis vectors."""
    scenario = generate(SynthConfig(num_identities=4, identity_dim=8, orthogonal_latents=True, num_frames=5))
    stacked = np.stack([scenario.latents[i] for i in sorted(scenario.latents)])
    assert np.allclose(stacked @ stacked.T, np.eye(4))


def test_labels_are_consistent():
    """Every detection carries a label that also appears in the ground truth."""
    scenario = generate(SynthConfig(num_frames=30, miss_rate=0.2))
    truth = {(r.frame, r.camera, r.global_id) for r in scenario.truth.records}
    for frame, camera, _, det in scenario.scene.iter_detections():
        assert (frame, camera, det.identity) in truth
    assert scenario.scene.count() < len(scenario.truth.records)


def test_crops_are_valid_patch_tensors():
    """Crops stay in [0, 1] and use the toy grid."""
    scenario = generate(SynthConfig(num_frames=5, with_crops=True))
    for _, _, _, det in scenario.scene.iter_detections():
        assert det.crop.values.shape == (det.crop.grid.M, det.crop.grid.P)
        assert det.crop.values.min() >= 0.0 and det.crop.values.max() <= 1.0


def test_camera_shift_shows_in_crop_means():
    """Mean pixel value separates cameras more than identities."""
    scenario = generate(SynthConfig(num_frames=20, with_crops=True))
    means = {}
    for _, camera, _, det in scenario.scene.iter_detections():
        means.setdefault(camera, []).append(det.crop.values.mean())
    per_camera = [np.mean(v) for v in means.values()]
    within = max(np.std(v) for v in means.values())
    assert np.std(per_camera) > within


def test_misalign_full_area_is_identity():
    """A crop area of 1 leaves the scenario unchanged."""
    scenario = generate(SynthConfig(num_frames=20))
    assert perturb_misalign(scenario, 0, crop_area=1.0) is scenario


def test_misalign_affects_one_camera():
    """Misalignment can only drop boxes and leaves other cameras untouched."""
    scenario = generate(SynthConfig(num_frames=50))
    moved = perturb_misalign(scenario, 1, crop_area=0.9, seed=4)
    assert moved.scene.count(1) <= scenario.scene.count(1)
    for camera in (0, 2):
        assert _detection_rows(moved.scene, camera) == _detection_rows(scenario.scene, camera)
    assert moved.windows[1].width == pytest.approx(scenario.windows[1].width * np.sqrt(0.9))


def test_misalign_rescales_boxes():
    """Surviving boxes grow by the inverse side ratio."""
    scenario = generate(SynthConfig(num_frames=20))
    moved = perturb_misalign(scenario, 0, crop_area=0.81)
    widths = {det.identity: det.box.width for _, c, _, det in moved.scene.iter_detections() if c == 0}
    originals = {det.identity: det.box.width for _, c, _, det in scenario.scene.iter_detections() if c == 0}
    for identity, width in widths.items():
        assert width == pytest.approx(originals[identity] / 0.9)


@pytest.mark.parametrize("area", [0.0, -0.5, 1.5])
def test_misalign_rejects_bad_area(area):
    """Crop areas outside (0, 1] are rejected."""
    scenario = generate(SynthConfig(num_frames=5))
    with pytest.raises(InvalidArgumentError):
        perturb_misalign(scenario, 0, crop_area=area)


def test_malfunction_silences_cameras():
    """Selected cameras emit nothing; the rest and the ground truth are kept."""
    scenario = generate(SynthConfig(num_cameras=4, num_frames=30))
    broken = perturb_malfunction(scenario, {2})
    assert broken.scene.count(2) == 0
    for camera in (0, 1, 3):
        assert _detection_rows(broken.scene, camera) == _detection_rows(scenario.scene, camera)
    assert broken.truth == scenario.truth


def test_malfunction_edge_sets():
    """No cameras changes nothing; all cameras empty the scene."""
    scenario = generate(SynthConfig(num_frames=10))
    assert perturb_malfunction(scenario, set()) is scenario
    assert perturb_malfunction(scenario, {0, 1, 2}).scene.count() == 0
    with pytest.raises(InvalidArgumentError):
        perturb_malfunction(scenario, {3})
