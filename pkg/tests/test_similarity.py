"""Tests for cosine similarity and IoU."""
import numpy as np
import pytest

from models.errors import InvalidArgumentError
from models.schemas import BoundingBox, PatchGrid
from utils.similarity import cosine_matrix, cosine_similarity, iou


def test_cosine_identical_vectors():
    """Test identical vectors score 1."""
    assert cosine_similarity([1, 0], [1, 0]) == 1.0


def test_cosine_orthogonal_vectors():
    """Test orthogonal vectors score 0."""
    assert cosine_similarity([1, 0], [0, 1]) == 0.0


def test_cosine_scale_invariance():
    """Test positive scaling does not change the score."""
    assert cosine_similarity([3, 4], [6, 8]) == pytest.approx(1.0)


def test_cosine_zero_vector_is_zero():
    """Test a zero vector carries no appearance evidence."""
    assert cosine_similarity([0, 0], [1, 2]) == 0.0


def test_cosine_dimension_mismatch():
    """Test vectors of different length are rejected."""
    with pytest.raises(InvalidArgumentError):
        cosine_similarity([1, 0], [1, 0, 0])


def test_cosine_symmetric_random():
    """Test symmetry and self-similarity on random vectors."""
    rng = np.random.default_rng(0)
    for _ in range(50):
        a, b = rng.normal(size=5), rng.normal(size=5)
        assert cosine_similarity(a, b) == pytest.approx(cosine_similarity(b, a))
        assert cosine_similarity(a, a) == pytest.approx(1.0)


def test_cosine_matrix_matches_scalar():
    """Test the pairwise matrix agrees with the scalar function."""
    rng = np.random.default_rng(1)
    rows, cols = rng.normal(size=(3, 4)), rng.normal(size=(2, 4))
    matrix = cosine_matrix(rows, cols)
    assert matrix.shape == (3, 2)
    assert matrix[2, 1] == pytest.approx(cosine_similarity(rows[2], cols[1]))


def test_iou_identical_and_disjoint():
    """Test IoU extremes."""
    box = BoundingBox(left=0, top=0, width=2, height=2)
    far = BoundingBox(left=10, top=10, width=2, height=2)
    assert iou(box, box) == 1.0
    assert iou(box, far) == 0.0


def test_iou_half_overlap():
    """Test the hand-computed overlap of two shifted squares."""
    a = BoundingBox(left=0, top=0, width=2, height=2)
    b = BoundingBox(left=1, top=0, width=2, height=2)
    assert iou(a, b) == pytest.approx(1 / 3)
    assert iou(a, b) == iou(b, a)


def test_box_rejects_non_positive_size():
    """Test box invariants are enforced."""
    with pytest.raises(ValueError):
        BoundingBox(left=0, top=0, width=0, height=2)


def test_default_patch_grid():
    """Test the default crop grid has 196 patches."""
    assert PatchGrid().M == 196
