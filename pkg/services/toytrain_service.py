"""Desk-scale encoder, fixed teacher, cross-view mixer and decoders with analytic gradients."""
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import ortho_group
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import StandardScaler

from models.errors import InvalidArgumentError, NumericError
from models.schemas import (
    Detection,
    EmbeddingPair,
    LossReport,
    MaskPlan,
    PatchGrid,
    Scene,
    ToyEncoderParams,
    ToyTrainConfig,
)
from services.objective_service import (
    nmi_loss,
    sample_shared_mask,
    separation_penalty,
    smooth_l1,
    smooth_l1_grad,
    split_features,
    total_loss,
)
from utils.logger import setup_logger

logger = setup_logger(__name__)

TOY_GRID = PatchGrid(H=8, W=8, h=2, w=2, channels=3)
NORM_PIX_EPS = 1e-6


@lru_cache(maxsize=None)
def teacher_matrix(patch_dim: int, teacher_dim: int, seed: int) -> np.ndarray:
    """
    Fixed projection with orthonormal rows or columns, whichever side is smaller.

    Patch norms are preserved whenever teacher_dim >= patch_dim.
    """
    q = ortho_group.rvs(max(patch_dim, teacher_dim, 2), random_state=seed)
    matrix = np.array(q[:patch_dim, :teacher_dim])
    matrix.setflags(write=False)
    return matrix


def teacher_features(det: Detection, teacher_seed: int, teacher_dim: int = 16, pixel_center: float = 0.5) -> np.ndarray:
    """Teacher patch features of the full, unmasked crop (M × teacher_dim)."""
    if det.crop is None:
        raise InvalidArgumentError(f"detection at frame {det.frame}, camera {det.camera} has no crop")
    return (det.crop.values - pixel_center) @ teacher_matrix(det.crop.grid.P, teacher_dim, teacher_seed)


def positional_codes(grid: PatchGrid, dim: int) -> np.ndarray:
    """2-D sine-cosine code per patch: half the width for the row, half for the column."""
    quarter = dim // 4
    omega = 1.0 / 10000 ** (np.arange(quarter) / quarter)
    rows, cols = np.divmod(np.arange(grid.M), grid.cols)

    def axis(position: np.ndarray) -> np.ndarray:
        angles = np.outer(position, omega)
        return np.hstack([np.sin(angles), np.cos(angles)])

    return np.hstack([axis(rows), axis(cols)])


def init_params(cfg: ToyTrainConfig, grid: PatchGrid = TOY_GRID) -> ToyEncoderParams:
    """Seeded Gaussian initialisation scaled by fan-in."""
    rng = np.random.default_rng(cfg.seed)
    d, ed, et = cfg.embed_dim // 2, cfg.decoder_dim, cfg.teacher_dim
    rec_in = d + ed + cfg.pos_dim

    def normal(rows: int, cols: int) -> np.ndarray:
        return rng.normal(0.0, 1.0 / np.sqrt(rows), size=(rows, cols))

    return ToyEncoderParams(
        W_enc=normal(grid.P, cfg.embed_dim),
        W_q=normal(d, d),
        W_k=normal(d, d),
        W_v=normal(d, d),
        W_o=normal(d, d),
        W_dist=normal(d, ed),
        mask_token=rng.normal(0.0, 0.02, size=d),
        W_rec=normal(rec_in, grid.P),
        W_proj=normal(ed, et),
    )


def encode(
    det: Detection, plan: MaskPlan, params: ToyEncoderParams, pixel_center: float = 0.5
) -> Tuple[EmbeddingPair, np.ndarray, np.ndarray]:
    """
    Encode the visible patches of one detection.

    Returns:
        Tuple of (pooled embedding, per-patch f_a, per-patch f_s)
    """
    if det.crop is None:
        raise InvalidArgumentError(f"detection at frame {det.frame}, camera {det.camera} has no crop")
    if det.crop.grid != plan.grid:
        raise InvalidArgumentError("crop grid does not match the mask plan")
    visible = det.crop.values[list(plan.visible_idx)] - pixel_center
    f_a, f_s = split_features(visible @ params.W_enc)
    return EmbeddingPair(f_a=f_a.mean(axis=0), f_s=f_s.mean(axis=0)), f_a, f_s


def _attention(pooled: np.ndarray, params: ToyEncoderParams):
    d = pooled.shape[1]
    q, k, v = pooled @ params.W_q, pooled @ params.W_k, pooled @ params.W_v
    scores = q @ k.T / np.sqrt(d)
    scores = scores - scores.max(axis=1, keepdims=True)
    att = np.exp(scores)
    att = att / att.sum(axis=1, keepdims=True)
    h = att @ v
    return h @ params.W_o, (q, k, v, att, h)


def cross_view_mix(pooled: Sequence[np.ndarray], params: ToyEncoderParams) -> np.ndarray:
    """One scaled dot-product attention layer over every detection of a frame."""
    if len(pooled) == 0:
        raise InvalidArgumentError("cross-view mixing needs at least one detection")
    mixed, _ = _attention(np.stack([np.asarray(g, dtype=np.float64) for g in pooled]), params)
    return mixed


def cross_view_encode(pooled: Sequence[np.ndarray], params: ToyEncoderParams) -> np.ndarray:
    """Residual cross-view block: each g_a plus its attention mix. The output is the ĝ_a fed to reconstruction."""
    mixed = cross_view_mix(pooled, params)
    return np.stack([np.asarray(g, dtype=np.float64) for g in pooled]) + mixed


def camera_averaging(cameras: Sequence[int]) -> np.ndarray:
    """Row-stochastic matrix averaging over the detections that share each detection's camera."""
    cameras = np.asarray(cameras)
    same = (cameras[:, None] == cameras[None, :]).astype(np.float64)
    return same / same.sum(axis=1, keepdims=True)


def refine_view_features(
    f_s: np.ndarray, context: np.ndarray, plan: MaskPlan, params: ToyEncoderParams
) -> np.ndarray:
    """
    Per-patch f̂_s of one detection (M × Ed).

    Visible patches carry their own f_s. Masked patches carry the mask token
    plus the view context, the mean pooled f_s of the camera's detections in
    the frame.
    """
    seq = np.empty((plan.grid.M, f_s.shape[1]))
    seq[:] = params.mask_token + context
    seq[list(plan.visible_idx)] = f_s
    return seq @ params.W_dist


def reconstruct(
    g_hat: np.ndarray,
    f_hat_s: np.ndarray,
    plan: MaskPlan,
    params: ToyEncoderParams,
    pos: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Predict masked patches from the broadcast aligned embedding, refined features and position."""
    idx = list(plan.masked_idx)
    if pos is None:
        pos = positional_codes(plan.grid, params.W_rec.shape[0] - g_hat.size - f_hat_s.shape[1])
    inputs = np.hstack([np.tile(g_hat, (len(idx), 1)), f_hat_s[idx], pos[idx]])
    return inputs @ params.W_rec


def norm_pix_target(values: np.ndarray) -> np.ndarray:
    """Normalise each patch to zero mean and unit variance."""
    mean = values.mean(axis=-1, keepdims=True)
    var = values.var(axis=-1, keepdims=True)
    return (values - mean) / np.sqrt(var + NORM_PIX_EPS)


def _check_finite(value: float, component: str) -> None:
    if not np.isfinite(value):
        logger.error(f"Non-finite {component} loss: {value}")
        raise NumericError(f"{component} loss is not finite ({value})", component=component)


class ToyTrainer:
    """Forward pass, analytic backward pass and gradient descent for the toy stack."""

    def __init__(self, cfg: Optional[ToyTrainConfig] = None, grid: PatchGrid = TOY_GRID):
        self.cfg = cfg or ToyTrainConfig()
        self.grid = grid
        self.pos = positional_codes(grid, self.cfg.pos_dim)
        self.teacher = teacher_matrix(grid.P, self.cfg.teacher_dim, self.cfg.teacher_seed)

    def frame_loss(
        self,
        params: ToyEncoderParams,
        detections: Sequence[Detection],
        plan: MaskPlan,
        with_grads: bool = True,
    ) -> Tuple[LossReport, Optional[Dict[str, np.ndarray]]]:
        """
        Loss report and parameter gradients for the detections of one frame.

        The differentiated objective replaces the histogram NMI by the
        separation penalty; the report keeps the NMI as l_sep. Masked
        distillation slots see only camera-level f_s, so detection identity
        reaches reconstruction through ĝ_a alone.
        """
        cfg = self.cfg
        w_sep, w_distill, w_recon = cfg.weights
        n, d = len(detections), cfg.embed_dim // 2
        vis, masked = list(plan.visible_idx), list(plan.masked_idx)

        x = np.stack([det.crop.values for det in detections])
        xc = x - cfg.pixel_center
        xv = xc[:, vis]
        z = xv @ params.W_enc
        a, s = z[..., :d], z[..., d:]
        pooled_a, pooled_s = a.mean(axis=1), s.mean(axis=1)

        averaging = camera_averaging([det.camera for det in detections])
        context = averaging @ pooled_s
        seq = np.empty((n, self.grid.M, d))
        seq[:] = params.mask_token + context[:, None, :]
        seq[:, vis] = s
        f_hat = seq @ params.W_dist
        proj = f_hat @ params.W_proj
        target_t = xc @ self.teacher
        l_distill = smooth_l1(proj, target_t)

        mixed, (q, k, v, att, h) = _attention(pooled_a, params)
        g_hat = pooled_a + mixed

        l_recon = 0.0
        if masked:
            k_masked = len(masked)
            u = np.concatenate(
                [
                    np.broadcast_to(g_hat[:, None, :], (n, k_masked, d)),
                    f_hat[:, masked],
                    np.broadcast_to(self.pos[masked], (n, k_masked, self.pos.shape[1])),
                ],
                axis=2,
            )
            recon = u @ params.W_rec
            target_x = norm_pix_target(x[:, masked]) if cfg.norm_pix_loss else x[:, masked]
            diff = recon - target_x
            l_recon = float(np.mean(diff * diff))

        penalty, l_sep = 0.0, 0.0
        grad_sep_a = np.zeros_like(pooled_a)
        grad_sep_s = np.zeros_like(pooled_s)
        if n >= 2:
            penalty, grad_sep_a, grad_sep_s = separation_penalty(pooled_a, pooled_s)
            l_sep = nmi_loss(pooled_a, pooled_s, cfg.nmi_bins)

        _check_finite(penalty, "separation")
        _check_finite(l_distill, "distillation")
        _check_finite(l_recon, "reconstruction")
        objective = w_sep * penalty + w_distill * l_distill + w_recon * l_recon
        report = total_loss(l_sep, l_distill, l_recon, cfg.weights, objective=objective)
        if not with_grads:
            return report, None

        d_proj = w_distill * smooth_l1_grad(proj, target_t)
        grad_proj = np.einsum('nme,nmt->et', f_hat, d_proj)
        d_f_hat = d_proj @ params.W_proj.T

        grad_rec = np.zeros_like(params.W_rec)
        d_g_hat = np.zeros_like(g_hat)
        if masked:
            d_recon = w_recon * 2.0 * diff / diff.size
            grad_rec = np.einsum('nku,nkp->up', u, d_recon)
            d_u = d_recon @ params.W_rec.T
            d_g_hat = d_u[..., :d].sum(axis=1)
            d_f_hat[:, masked] += d_u[..., d:d + cfg.decoder_dim]

        grad_dist = np.einsum('nmd,nme->de', seq, d_f_hat)
        d_seq = d_f_hat @ params.W_dist.T
        grad_mask = d_seq[:, masked].sum(axis=(0, 1)) if masked else np.zeros(d)
        d_context = d_seq[:, masked].sum(axis=1) if masked else np.zeros((n, d))
        d_s = d_seq[:, vis]

        grad_o = h.T @ d_g_hat
        d_h = d_g_hat @ params.W_o.T
        d_att = d_h @ v.T
        d_v = att.T @ d_h
        d_scores = att * (d_att - np.sum(d_att * att, axis=1, keepdims=True)) / np.sqrt(d)
        d_q = d_scores @ k
        d_k = d_scores.T @ q
        d_pooled_a = (
            d_g_hat + d_q @ params.W_q.T + d_k @ params.W_k.T + d_v @ params.W_v.T + w_sep * grad_sep_a
        )
        d_pooled_s = w_sep * grad_sep_s + averaging.T @ d_context

        m_vis = len(vis)
        d_a = np.broadcast_to(d_pooled_a[:, None, :] / m_vis, (n, m_vis, d))
        d_s = d_s + d_pooled_s[:, None, :] / m_vis
        d_z = np.concatenate([d_a, d_s], axis=2)

        grads = {
            'W_enc': np.einsum('nvp,nve->pe', xv, d_z),
            'W_q': pooled_a.T @ d_q,
            'W_k': pooled_a.T @ d_k,
            'W_v': pooled_a.T @ d_v,
            'W_o': grad_o,
            'W_dist': grad_dist,
            'mask_token': grad_mask,
            'W_rec': grad_rec,
            'W_proj': grad_proj,
        }
        return report, grads

    def _frames(self, scene: Scene) -> List[Tuple[int, List[Detection]]]:
        frames = []
        for frame in scene.frame_indices:
            dets = [det for per_camera in scene.at(frame) for det in per_camera if det.crop is not None]
            if dets:
                frames.append((frame, dets))
        return frames

    @staticmethod
    def _mean_report(reports: List[LossReport], weights) -> LossReport:
        count = len(reports)
        return total_loss(
            sum(r.l_sep for r in reports) / count,
            sum(r.l_distill for r in reports) / count,
            sum(r.l_recon for r in reports) / count,
            weights,
            objective=sum(r.objective for r in reports) / count,
        )

    def train(
        self, scene: Scene, params: Optional[ToyEncoderParams] = None
    ) -> Tuple[ToyEncoderParams, List[LossReport]]:
        """
        Full-batch-per-frame gradient descent.

        Masks depend on (frame, seed) only, so every epoch sees the same plans.
        Each epoch's report averages the per-frame losses measured before
        each update.
        """
        cfg = self.cfg
        if scene.num_cameras < 2:
            raise InvalidArgumentError("training needs at least two cameras")
        frames = self._frames(scene)
        if not frames:
            raise InvalidArgumentError("scene carries no crops to train on")

        params = params.copy_params() if params is not None else init_params(cfg, self.grid)
        plans = {frame: sample_shared_mask(self.grid, cfg.rho, frame, cfg.seed) for frame, _ in frames}
        curve: List[LossReport] = []
        logger.info(f"Training toy encoder on {len(frames)} frames for {cfg.epochs} epochs (lr {cfg.lr})")

        for epoch in range(cfg.epochs):
            reports: List[LossReport] = []
            for start in range(0, len(frames), cfg.batch_frames):
                batch = frames[start:start + cfg.batch_frames]
                summed: Dict[str, np.ndarray] = {}
                for frame, dets in batch:
                    report, grads = self.frame_loss(params, dets, plans[frame])
                    reports.append(report)
                    for name, grad in grads.items():
                        summed[name] = summed[name] + grad if name in summed else grad
                for name, grad in summed.items():
                    if not np.all(np.isfinite(grad)):
                        raise NumericError(f"gradient of {name} is not finite", component="gradient")
                    getattr(params, name)[...] -= cfg.lr * grad / len(batch)
            curve.append(self._mean_report(reports, cfg.weights))
            logger.info(
                f"Epoch {epoch + 1}/{cfg.epochs}: objective {curve[-1].objective:.6f}, "
                f"distill {curve[-1].l_distill:.6f}, recon {curve[-1].l_recon:.6f}"
            )
        return params, curve


def train(scene: Scene, cfg: Optional[ToyTrainConfig] = None) -> Tuple[ToyEncoderParams, List[LossReport]]:
    return ToyTrainer(cfg).train(scene)


def full_plan(grid: PatchGrid) -> MaskPlan:
    return MaskPlan(grid=grid, rho=0.0, masked_idx=(), visible_idx=tuple(range(grid.M)))


def _replace_embeddings(scene: Scene, embed: Callable[[Detection], EmbeddingPair]) -> Scene:
    frames = [
        [
            [det.model_copy(update={'embedding': embed(det)}) if det.crop is not None else det
             for det in detections]
            for detections in per_camera
        ]
        for per_camera in scene.frames
    ]
    return Scene(num_cameras=scene.num_cameras, start_frame=scene.start_frame, frames=frames)


def embed_scene(scene: Scene, params: ToyEncoderParams, pixel_center: float = 0.5) -> Scene:
    """Replace every cropped detection's embedding with the unmasked encoder output."""
    return _replace_embeddings(scene, lambda det: encode(det, full_plan(det.crop.grid), params, pixel_center)[0])


def teacher_embed_scene(scene: Scene, cfg: Optional[ToyTrainConfig] = None) -> Scene:
    """
    Baseline embeddings straight from the fixed teacher.

    Each cropped detection gets its patch-pooled teacher features in both
    halves, since the teacher has no view-agnostic/view-specific split.
    """
    cfg = cfg or ToyTrainConfig()

    def pooled(det: Detection) -> EmbeddingPair:
        vector = teacher_features(det, cfg.teacher_seed, cfg.teacher_dim, cfg.pixel_center).mean(axis=0)
        return EmbeddingPair(f_a=vector, f_s=vector)

    return _replace_embeddings(scene, pooled)


def camera_probe(
    vectors: Sequence[np.ndarray],
    cameras: Sequence[int],
    held_out_fraction: float = 0.3,
    seed: int = 0,
    epochs: int = 200,
    lr: float = 0.1,
) -> float:
    """
    Held-out accuracy of a linear classifier predicting the camera from an embedding.

    Args:
        vectors: Frozen embeddings
        cameras: Camera label per embedding
        held_out_fraction: Share of samples kept for evaluation
        seed: Split seed

    Returns:
        Accuracy in [0, 1]
    """
    x = np.asarray(vectors, dtype=np.float64)
    y = np.asarray(cameras)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise InvalidArgumentError("camera probe needs at least two cameras")
    if counts.min() < 10:
        raise InvalidArgumentError(f"camera probe needs 10 samples per camera, smallest class has {counts.min()}")

    x_train, x_test, y_train, y_test = train_test_split(
        x, y, test_size=held_out_fraction, random_state=seed, stratify=y
    )
    scaler = StandardScaler().fit(x_train)
    x_train, x_test = scaler.transform(x_train), scaler.transform(x_test)

    targets = np.eye(classes.size)[np.searchsorted(classes, y_train)]
    weights = np.zeros((x.shape[1], classes.size))
    bias = np.zeros(classes.size)
    for _ in range(epochs):
        logits = x_train @ weights + bias
        logits -= logits.max(axis=1, keepdims=True)
        prob = np.exp(logits)
        prob /= prob.sum(axis=1, keepdims=True)
        grad = (prob - targets) / len(x_train)
        weights -= lr * x_train.T @ grad
        bias -= lr * grad.sum(axis=0)

    predicted = classes[np.argmax(x_test @ weights + bias, axis=1)]
    accuracy = float(np.mean(predicted == y_test))
    logger.debug(f"Camera probe accuracy {accuracy:.3f} on {len(y_test)} held-out samples")
    return accuracy
