"""Tests for masking and the loss kernels."""
import numpy as np
import pytest

from models.errors import InvalidArgumentError
from models.schemas import PatchGrid, PatchTensor
from services.objective_service import (
    FULL_EMBED_DIM,
    nmi_loss,
    masked_mse,
    sample_shared_mask,
    separation_penalty,
    smooth_l1,
    split_features,
    total_loss,
    weights_for,
)

DEFAULT_GRID = PatchGrid()
TOY_GRID = PatchGrid(H=8, W=8, h=2, w=2)


def test_default_mask_keeps_49_patches():
    """Test 75% masking of 196 patches leaves 49 visible."""
    assert sample_shared_mask(DEFAULT_GRID, 0.75, frame=0, seed=0).m_vis == 49


def test_zero_ratio_masks_nothing():
    """Test rho=0 keeps every patch."""
    plan = sample_shared_mask(DEFAULT_GRID, 0.0, frame=3, seed=1)
    assert plan.masked_idx == ()
    assert plan.m_vis == 196


def test_mask_rejects_full_ratio():
    """Test rho must stay below 1."""
    with pytest.raises(InvalidArgumentError):
        sample_shared_mask(DEFAULT_GRID, 1.0, frame=0, seed=0)


@pytest.mark.parametrize("rho,visible", [(0.5, 98), (0.75, 49), (0.9, 20)])
def test_mask_shared_across_cameras(rho, visible):
    """Test every camera of a frame draws the same mask of the right size."""
    rng = np.random.default_rng(0)
    for _ in range(1000):
        frame, seed = int(rng.integers(0, 10_000)), int(rng.integers(0, 2 ** 31))
        plans = [sample_shared_mask(DEFAULT_GRID, rho, frame, seed) for _camera in range(4)]
        assert all(p.masked_idx == plans[0].masked_idx for p in plans)
        assert plans[0].m_vis == visible
        assert len(plans[0].masked_idx) == round(rho * 196)


def test_mask_differs_between_frames():
    """Test different frames draw different masks."""
    a = sample_shared_mask(DEFAULT_GRID, 0.75, frame=0, seed=7)
    b = sample_shared_mask(DEFAULT_GRID, 0.75, frame=1, seed=7)
    assert a.masked_idx != b.masked_idx


def test_split_full_width():
    """Test a 768-wide embedding splits into two 384 halves."""
    f_a, f_s = split_features(np.zeros((3, FULL_EMBED_DIM)))
    assert f_a.shape == f_s.shape == (3, 384)


def test_split_definition_and_partition():
    """Test the split is the column partition."""
    f_a, f_s = split_features(np.array([[3.0, 7.0]]))
    assert f_a.tolist() == [[3.0]] and f_s.tolist() == [[7.0]]
    x = np.random.default_rng(0).normal(size=(5, 6))
    assert np.array_equal(np.hstack(split_features(x)), x)


def test_split_rejects_odd_width():
    """Test odd embedding widths are rejected."""
    with pytest.raises(InvalidArgumentError):
        split_features(np.zeros((2, 5)))


def test_nmi_identical_streams():
    """Test identical non-constant streams give 1."""
    x = np.random.default_rng(0).normal(size=(200, 4))
    assert nmi_loss(x, x) == pytest.approx(1.0)


def test_nmi_independent_streams():
    """Test independent uniform streams give almost 0."""
    rng = np.random.default_rng(1)
    assert nmi_loss(rng.random((10_000, 1)), rng.random((10_000, 1)), bins=8) < 0.05


def test_nmi_constant_stream():
    """Test a constant stream has zero entropy and zero loss."""
    x = np.random.default_rng(2).normal(size=(50, 3))
    assert nmi_loss(np.ones((50, 3)), x) == 0.0


def test_nmi_symmetric_and_scale_invariant():
    """Test symmetry and invariance to rescaling one stream."""
    rng = np.random.default_rng(3)
    a = rng.normal(size=(300, 2))
    s = a + rng.normal(scale=0.5, size=(300, 2))
    assert nmi_loss(a, s) == pytest.approx(nmi_loss(s, a))
    assert nmi_loss(a, 4.0 * s) == pytest.approx(nmi_loss(a, s))


def test_nmi_batch_mismatch():
    """Test batch sizes must agree."""
    with pytest.raises(InvalidArgumentError):
        nmi_loss(np.zeros((3, 2)), np.zeros((4, 2)))


@pytest.mark.parametrize("d,expected", [(0.0, 0.0), (0.5, 0.125), (2.0, 1.5)])
def test_smooth_l1_hand_values(d, expected):
    """Test the two branches of the Huber loss."""
    assert smooth_l1(np.array([d]), np.array([0.0])) == expected


def test_smooth_l1_continuous_at_one():
    """Test both branches meet at |d| = 1."""
    below = smooth_l1(np.array([1 - 1e-9]), np.array([0.0]))
    above = smooth_l1(np.array([1 + 1e-9]), np.array([0.0]))
    assert below == pytest.approx(0.5, abs=1e-8)
    assert above == pytest.approx(0.5, abs=1e-8)


def test_smooth_l1_shape_mismatch():
    """Test shapes must agree."""
    with pytest.raises(InvalidArgumentError):
        smooth_l1(np.zeros(2), np.zeros(3))


def patches(values):
    return PatchTensor(grid=TOY_GRID, values=values)


def test_masked_mse_ignores_visible_patches():
    """Test changes on visible patches do not count."""
    plan = sample_shared_mask(TOY_GRID, 0.5, frame=0, seed=0)
    original = np.full((16, 12), 0.5)
    recon = original.copy()
    recon[list(plan.visible_idx)] = 0.9
    assert masked_mse(patches(recon), patches(original), plan) == 0.0
    assert masked_mse(patches(original), patches(original), plan) == 0.0


def test_masked_mse_hand_value():
    """Test one masked patch of four unit differences gives 1."""
    grid = PatchGrid(H=4, W=4, h=2, w=2, channels=1)
    plan = sample_shared_mask(grid, 0.25, frame=0, seed=0)
    assert len(plan.masked_idx) == 1
    original = np.zeros((4, 4))
    recon = original.copy()
    recon[plan.masked_idx[0]] = 1.0
    report = masked_mse(PatchTensor(grid=grid, values=recon), PatchTensor(grid=grid, values=original), plan)
    assert report == 1.0


def test_masked_mse_grid_mismatch():
    """Test tensors must share the plan's grid."""
    plan = sample_shared_mask(TOY_GRID, 0.5, frame=0, seed=0)
    other = PatchGrid(H=4, W=4, h=2, w=2)
    tensor = PatchTensor(grid=other, values=np.zeros((4, 12)))
    with pytest.raises(InvalidArgumentError):
        masked_mse(tensor, tensor, plan)


def test_total_loss_weighting():
    """Test the weighted sum."""
    assert total_loss(0.2, 0.3, 0.5).total == pytest.approx(1.0)
    assert total_loss(0.0, 0.0, 0.0).total == 0.0
    assert total_loss(0.2, 0.3, 0.5, weights=(0, 0, 1)).total == 0.5


def test_weight_presets():
    """Test the ablation presets."""
    assert weights_for("full") == (1.0, 1.0, 1.0)
    assert weights_for("distill-only") == (0.0, 1.0, 0.0)
    assert weights_for("recon-only") == (0.0, 0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        weights_for("nothing")


def test_separation_penalty_gradient():
    """Test the analytic gradient against central differences."""
    rng = np.random.default_rng(4)
    a, s = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    _, grad_a, grad_s = separation_penalty(a, s)
    eps = 1e-6
    for array, grad in ((a, grad_a), (s, grad_s)):
        numeric = np.zeros_like(array)
        for idx in np.ndindex(array.shape):
            array[idx] += eps
            plus = separation_penalty(a, s)[0]
            array[idx] -= 2 * eps
            minus = separation_penalty(a, s)[0]
            array[idx] += eps
            numeric[idx] = (plus - minus) / (2 * eps)
        assert np.allclose(grad, numeric, atol=1e-7)


def test_separation_penalty_zero_for_uncorrelated():
    """Test independent coordinates give zero penalty."""
    a = np.array([[1.0], [-1.0], [1.0], [-1.0]])
    s = np.array([[1.0], [1.0], [-1.0], [-1.0]])
    assert separation_penalty(a, s)[0] == pytest.approx(0.0, abs=1e-12)


def test_separation_penalty_is_a_mean_over_feature_pairs():
    """Test fully correlated halves score about 1 whatever their width."""
    a = np.array([[1.0], [-1.0], [2.0], [-2.0]])
    narrow = separation_penalty(a, 3.0 * a)[0]
    wide = separation_penalty(np.hstack([a] * 4), np.hstack([a] * 6))[0]
    assert narrow == pytest.approx(1.0, abs=1e-2)
    assert wide == pytest.approx(narrow)
