"""Appearance and box similarity primitives."""
import numpy as np

from models.errors import InvalidArgumentError
from models.schemas import BoundingBox


def cosine_similarity(a, b) -> float:
    """
    Cosine of the angle between two vectors.

    Args:
        a: First vector
        b: Second vector of the same length

    Returns:
        <a,b>/(|a||b|) in [-1, 1]; 0 when either vector has zero norm
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size or a.size == 0:
        raise InvalidArgumentError(f"cannot compare vectors of length {a.size} and {b.size}")

    norm = np.linalg.norm(a) * np.linalg.norm(b)
    if norm == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / norm, -1.0, 1.0))


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Scale rows to unit length; zero rows stay zero."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return np.divide(matrix, norms, out=np.zeros_like(matrix), where=norms > 0)


def cosine_matrix(rows, cols) -> np.ndarray:
    """Pairwise cosine similarity between two stacks of vectors."""
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64)
    if rows.size == 0 or cols.size == 0:
        return np.zeros((len(rows), len(cols)))
    if rows.shape[1] != cols.shape[1]:
        raise InvalidArgumentError(f"cannot compare vectors of length {rows.shape[1]} and {cols.shape[1]}")
    return np.clip(normalize_rows(rows) @ normalize_rows(cols).T, -1.0, 1.0)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    inter_w = min(a.right, b.right) - max(a.left, b.left)
    inter_h = min(a.bottom, b.bottom) - max(a.top, b.top)
    if inter_w <= 0 or inter_h <= 0:
        return 0.0
    intersection = inter_w * inter_h
    return intersection / (a.area + b.area - intersection)


def iou_matrix(gt_boxes, pred_boxes) -> np.ndarray:
    """IoU for every (gt, pred) pair."""
    out = np.zeros((len(gt_boxes), len(pred_boxes)))
    for i, g in enumerate(gt_boxes):
        for j, p in enumerate(pred_boxes):
            out[i, j] = iou(g, p)
    return out
