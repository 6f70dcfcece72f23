"""Shared masking, feature splitting and the three training losses."""
import math
from typing import Dict, Optional, Tuple

import numpy as np
from sklearn.metrics import normalized_mutual_info_score

from models.errors import InvalidArgumentError
from models.schemas import LossReport, LossWeights, MaskPlan, PatchGrid, PatchTensor
from utils.logger import setup_logger

logger = setup_logger(__name__)

# Reference dimensions of the full-scale encoder, kept for documentation.
FULL_EMBED_DIM = 768
FULL_DECODER_DIM = 512
FULL_TEACHER_DIM = 1024

WEIGHT_PRESETS: Dict[str, LossWeights] = {
    "full": (1.0, 1.0, 1.0),
    "distill-only": (0.0, 1.0, 0.0),
    "recon-only": (0.0, 0.0, 1.0),
}


def weights_for(preset: str) -> LossWeights:
    try:
        return WEIGHT_PRESETS[preset]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown objective '{preset}', expected one of {sorted(WEIGHT_PRESETS)}"
        ) from None


def masked_count(grid: PatchGrid, rho: float) -> int:
    """round(rho*M) with halves rounded up."""
    return int(math.floor(rho * grid.M + 0.5))


def sample_shared_mask(grid: PatchGrid, rho: float, frame: int, seed: int) -> MaskPlan:
    """
    Draw the masked patch set for one frame.

    The draw depends only on (frame, seed), so every camera and detection of a
    frame shares it.
    """
    if not 0.0 <= rho < 1.0:
        raise InvalidArgumentError(f"mask ratio {rho} outside [0, 1)")
    k = masked_count(grid, rho)
    if k >= grid.M:
        raise InvalidArgumentError(f"mask ratio {rho} leaves no visible patch out of {grid.M}")

    rng = np.random.default_rng([seed % 2 ** 32, frame])
    masked = np.sort(rng.choice(grid.M, size=k, replace=False))
    keep = np.ones(grid.M, dtype=bool)
    keep[masked] = False
    return MaskPlan(
        grid=grid,
        rho=rho,
        masked_idx=tuple(int(i) for i in masked),
        visible_idx=tuple(int(i) for i in np.flatnonzero(keep)),
    )


def split_features(patch_features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """First half of the columns is f_a, second half f_s."""
    patch_features = np.atleast_2d(np.asarray(patch_features, dtype=np.float64))
    width = patch_features.shape[1]
    if width % 2:
        raise InvalidArgumentError(f"embedding width {width} is odd")
    half = width // 2
    return patch_features[:, :half], patch_features[:, half:]


def _quantize(values: np.ndarray, bins: int) -> Optional[np.ndarray]:
    lo, hi = values.min(), values.max()
    if hi == lo:
        return None
    labels = np.floor((values - lo) / (hi - lo) * bins).astype(int)
    labels = np.clip(labels, 0, bins - 1)
    if np.unique(labels).size < 2:
        return None
    return labels


def nmi_loss(f_a, f_s, bins: int = 8) -> float:
    """
    Normalized mutual information between the two halves of a batch.

    Each vector is reduced to its mean, each scalar stream is binned into equal
    width bins over its own range, and NMI uses the geometric mean of the two
    entropies. A stream occupying a single bin gives 0.
    """
    f_a = np.atleast_2d(np.asarray(f_a, dtype=np.float64))
    f_s = np.atleast_2d(np.asarray(f_s, dtype=np.float64))
    if f_a.shape[0] != f_s.shape[0]:
        raise InvalidArgumentError(f"batch sizes differ: {f_a.shape[0]} vs {f_s.shape[0]}")
    if f_a.shape[0] < 2 or bins < 2:
        raise InvalidArgumentError("nmi needs at least two samples and two bins")

    x = _quantize(f_a.mean(axis=1), bins)
    y = _quantize(f_s.mean(axis=1), bins)
    if x is None or y is None:
        return 0.0
    return float(normalized_mutual_info_score(x, y, average_method="geometric"))


def smooth_l1(pred, target) -> float:
    """Mean elementwise Huber loss with unit threshold."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise InvalidArgumentError(f"shape mismatch {pred.shape} vs {target.shape}")
    if pred.size == 0:
        return 0.0
    d = np.abs(pred - target)
    return float(np.mean(np.where(d < 1.0, 0.5 * d * d, d - 0.5)))


def smooth_l1_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Gradient of smooth_l1 with respect to pred."""
    d = pred - target
    return np.clip(d, -1.0, 1.0) / d.size


def masked_mse(recon: PatchTensor, original: PatchTensor, plan: MaskPlan) -> float:
    """Mean squared error over the masked patches only."""
    if recon.grid != plan.grid or original.grid != plan.grid:
        raise InvalidArgumentError("reconstruction, original and mask plan use different grids")
    if not plan.masked_idx:
        return 0.0
    idx = list(plan.masked_idx)
    diff = recon.values[idx] - original.values[idx]
    return float(np.mean(diff * diff))


def _standardize(x: np.ndarray, eps: float) -> Tuple[np.ndarray, np.ndarray]:
    centered = x - x.mean(axis=0)
    scale = np.sqrt(np.mean(centered * centered, axis=0) + eps)
    return centered / scale, scale


def _standardize_backward(grad: np.ndarray, standardized: np.ndarray, scale: np.ndarray) -> np.ndarray:
    grad = (grad - standardized * np.mean(grad * standardized, axis=0)) / scale
    return grad - grad.mean(axis=0)


def separation_penalty(f_a: np.ndarray, f_s: np.ndarray, eps: float = 1e-3) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Mean squared entry of the batch cross-correlation of pooled halves.

    Smooth stand-in for the histogram NMI when gradients are needed; zero iff
    the halves are linearly uncorrelated across the batch, at most 1. eps
    keeps the per-feature scale away from zero.

    Returns:
        Tuple of (value, gradient wrt f_a, gradient wrt f_s)
    """
    n = f_a.shape[0]
    a, scale_a = _standardize(f_a, eps)
    s, scale_s = _standardize(f_s, eps)
    corr = a.T @ s / n
    value = float(np.mean(corr * corr))
    grad_a = 2.0 / (n * corr.size) * s @ corr.T
    grad_s = 2.0 / (n * corr.size) * a @ corr
    return value, _standardize_backward(grad_a, a, scale_a), _standardize_backward(grad_s, s, scale_s)


def total_loss(
    l_sep: float,
    l_distill: float,
    l_recon: float,
    weights: LossWeights = (1.0, 1.0, 1.0),
    objective: Optional[float] = None,
) -> LossReport:
    """Combine the three components into a report."""
    for name, value in (("l_sep", l_sep), ("l_distill", l_distill), ("l_recon", l_recon)):
        if not math.isfinite(value) or value < 0:
            raise InvalidArgumentError(f"{name} must be finite and non-negative, got {value}")
    w_sep, w_distill, w_recon = weights
    return LossReport(
        l_sep=l_sep,
        l_distill=l_distill,
        l_recon=l_recon,
        total=w_sep * l_sep + w_distill * l_distill + w_recon * l_recon,
        weights=tuple(weights),
        objective=objective,
    )
