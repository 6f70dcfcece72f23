"""Deterministic synthetic multi-camera scenarios and dynamic-camera perturbations."""
import math
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from models.errors import InvalidArgumentError
from models.schemas import (
    BoundingBox,
    Detection,
    EmbeddingPair,
    PatchGrid,
    PatchTensor,
    Scenario,
    Scene,
    SynthConfig,
    TrackingRecord,
    TrackingResult,
    Window,
)
from services.toytrain_service import TOY_GRID
from utils.logger import setup_logger

logger = setup_logger(__name__)

WINDOW_SIZE = 70.0
WINDOW_RADIUS = 10.0

MIN_SPEED = 0.1
MAX_SPEED = 0.5
SPEED_JITTER = 0.03

IDENTITY_AMPLITUDE = 0.1
BRIGHTNESS_RANGE = 0.2
CHROMA_STD = 0.02
TEXTURE_AMPLITUDE = 0.05
PIXEL_NOISE = 0.02


def default_windows(num_cameras: int, plane_size: float = 100.0) -> List[Window]:
    """Square windows centred on a small circle around the plane centre."""
    scale = plane_size / 100.0
    half = WINDOW_SIZE * scale / 2.0
    windows = []
    for v in range(num_cameras):
        angle = 2.0 * math.pi * v / num_cameras
        cx = plane_size / 2.0 + WINDOW_RADIUS * scale * math.cos(angle)
        cy = plane_size / 2.0 + WINDOW_RADIUS * scale * math.sin(angle)
        windows.append(Window(x0=cx - half, y0=cy - half, x1=cx + half, y1=cy + half))
    return windows


def _reflect(position: np.ndarray, velocity: np.ndarray, size: float) -> None:
    for axis in range(2):
        if position[axis] < 0.0:
            position[axis] = -position[axis]
            velocity[axis] = -velocity[axis]
        elif position[axis] > size:
            position[axis] = 2.0 * size - position[axis]
            velocity[axis] = -velocity[axis]


def _trajectories(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Smooth reflecting random walks, shape (frames, identities, 2)."""
    size = cfg.plane_size
    position = rng.uniform(0.2 * size, 0.8 * size, size=(cfg.num_identities, 2))
    angle = rng.uniform(0.0, 2.0 * math.pi, size=cfg.num_identities)
    velocity = 0.3 * size / 100.0 * np.stack([np.cos(angle), np.sin(angle)], axis=1)

    path = np.empty((cfg.num_frames, cfg.num_identities, 2))
    for t in range(cfg.num_frames):
        path[t] = position
        velocity = velocity + rng.normal(0.0, SPEED_JITTER * size / 100.0, size=velocity.shape)
        speed = np.linalg.norm(velocity, axis=1, keepdims=True)
        clipped = np.clip(speed, MIN_SPEED * size / 100.0, MAX_SPEED * size / 100.0)
        velocity = velocity * clipped / np.maximum(speed, 1e-12)
        position = position + velocity
        for i in range(cfg.num_identities):
            _reflect(position[i], velocity[i], size)
    return path


def _latents(cfg: SynthConfig, rng: np.random.Generator) -> Dict[int, np.ndarray]:
    if cfg.orthogonal_latents:
        basis = np.eye(cfg.identity_dim)
        return {i + 1: basis[i] for i in range(cfg.num_identities)}
    raw = rng.normal(size=(cfg.num_identities, cfg.identity_dim))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    return {i + 1: raw[i] for i in range(cfg.num_identities)}


def _view_transforms(cfg: SynthConfig, rng: np.random.Generator) -> Dict[int, Tuple[np.ndarray, np.ndarray]]:
    d = cfg.identity_dim
    transforms = {}
    for v in range(cfg.num_cameras):
        A = np.eye(d) + cfg.view_distortion * rng.normal(size=(d, d)) / math.sqrt(d)
        b = cfg.view_distortion * rng.normal(size=d) / math.sqrt(d)
        transforms[v] = (A, b)
    return transforms


def _box_sizes(cfg: SynthConfig) -> Dict[int, Tuple[float, float]]:
    sizes = {}
    for identity in range(1, cfg.num_identities + 1):
        width = 30.0 + 2.0 * (identity % 5)
        sizes[identity] = (width, 2.2 * width)
    return sizes


def _to_pixels(cfg: SynthConfig, window: Window, x: float, y: float) -> Tuple[float, float]:
    px = (x - window.x0) / window.width * cfg.image_width
    py = (y - window.y0) / window.height * cfg.image_height
    return px, py


class _CropModel:
    """
    Low-resolution crops whose patches mix an identity template, a camera
    colour offset, a shared part texture and pixel noise.

    Patch values are laid out pixel-major with the channel last.
    """

    def __init__(self, cfg: SynthConfig, latents: Dict[int, np.ndarray], rng: np.random.Generator,
                 grid: PatchGrid = TOY_GRID):
        self.grid = grid
        pixels = grid.h * grid.w
        mixing = rng.normal(size=(grid.P, cfg.identity_dim))
        self.templates = {}
        for identity, z in latents.items():
            raw = (mixing @ z).reshape(pixels, grid.channels)
            raw = raw - raw.mean(axis=0)
            std = raw.std()
            self.templates[identity] = (IDENTITY_AMPLITUDE * raw / std if std > 0 else raw).ravel()

        self.offsets = {}
        for v in range(cfg.num_cameras):
            brightness = rng.uniform(-BRIGHTNESS_RANGE, BRIGHTNESS_RANGE)
            chroma = rng.normal(0.0, CHROMA_STD, size=grid.channels)
            self.offsets[v] = np.tile(brightness + chroma, pixels)

        texture = rng.normal(size=(grid.M, grid.P))
        self.texture = TEXTURE_AMPLITUDE * (texture - texture.mean(axis=0))

    def render(self, identity: int, camera: int, rng: np.random.Generator) -> PatchTensor:
        values = 0.5 + self.templates[identity] + self.offsets[camera] + self.texture
        values = values + rng.normal(0.0, PIXEL_NOISE, size=values.shape)
        return PatchTensor(grid=self.grid, values=np.clip(values, 0.0, 1.0))


def generate(cfg: Optional[SynthConfig] = None) -> Scenario:
    """
    Build a seeded multi-camera scenario.

    Identity i is detected in camera v at frame t when its plane position lies
    in the camera's window and a seeded coin clears miss_rate. Ground truth
    keeps every visible identity, detected or not.
    """
    cfg = cfg or SynthConfig()
    windows = list(cfg.camera_windows) if cfg.camera_windows is not None else default_windows(
        cfg.num_cameras, cfg.plane_size
    )
    motion_rng, latent_rng, view_rng, coin_rng, noise_rng, crop_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(6)
    )

    path = _trajectories(cfg, motion_rng)
    latents = _latents(cfg, latent_rng)
    transforms = _view_transforms(cfg, view_rng)
    sizes = _box_sizes(cfg)
    crops = _CropModel(cfg, latents, crop_rng) if cfg.with_crops else None

    frames: List[List[List[Detection]]] = []
    truth: List[TrackingRecord] = []
    for t in range(cfg.num_frames):
        per_camera: List[List[Detection]] = []
        for v, window in enumerate(windows):
            coins = coin_rng.random(cfg.num_identities)
            noise = noise_rng.normal(0.0, 1.0, size=(cfg.num_identities, cfg.identity_dim))
            detections = []
            for i in range(cfg.num_identities):
                identity = i + 1
                x, y = path[t, i]
                if not window.contains(x, y):
                    continue
                px, py = _to_pixels(cfg, window, x, y)
                width, height = sizes[identity]
                box = BoundingBox(left=px - width / 2.0, top=py - height / 2.0, width=width, height=height)
                truth.append(TrackingRecord(frame=t, camera=v, global_id=identity, box=box))
                if coins[i] < cfg.miss_rate:
                    continue

                A, b = transforms[v]
                appearance = A @ latents[identity] + b + cfg.view_noise * noise[i]
                detections.append(Detection(
                    frame=t,
                    camera=v,
                    box=box,
                    identity=identity,
                    embedding=EmbeddingPair(f_a=appearance, f_s=appearance),
                    crop=crops.render(identity, v, crop_rng) if crops is not None else None,
                ))
            per_camera.append(detections)
        frames.append(per_camera)

    scene = Scene(num_cameras=cfg.num_cameras, frames=frames)
    logger.info(
        f"Generated scenario: {cfg.num_identities} identities, {cfg.num_cameras} cameras, "
        f"{cfg.num_frames} frames, {scene.count()} detections (seed {cfg.seed})"
    )
    return Scenario(
        config=cfg,
        scene=scene,
        truth=TrackingResult(records=truth),
        windows=windows,
        latents=latents,
        view_transforms=transforms,
    )


def overlap_fraction(scenario: Scenario) -> float:
    """Share of visible (identity, frame) entries seen by at least two cameras."""
    seen: Dict[Tuple[int, int], int] = {}
    for r in scenario.truth.records:
        seen[(r.global_id, r.frame)] = seen.get((r.global_id, r.frame), 0) + 1
    if not seen:
        return 0.0
    return sum(1 for n in seen.values() if n >= 2) / len(seen)


def _check_camera(scenario: Scenario, camera: int) -> None:
    if not 0 <= camera < scenario.scene.num_cameras:
        raise InvalidArgumentError(f"camera {camera} outside [0, {scenario.scene.num_cameras})")


def _rebuild(scenario: Scenario, frames, truth: List[TrackingRecord], windows: List[Window]) -> Scenario:
    scene = Scene(num_cameras=scenario.scene.num_cameras, start_frame=scenario.scene.start_frame, frames=frames)
    return scenario.model_copy(update={
        "scene": scene,
        "truth": TrackingResult(records=truth),
        "windows": windows,
    })


def perturb_misalign(scenario: Scenario, camera: int, crop_area: float = 0.9, seed: int = 0) -> Scenario:
    """
    Crop a random sub-window of one camera and stretch it back to full resolution.

    Boxes whose centre leaves the sub-window are dropped from detections and
    ground truth; the rest are re-expressed in the enlarged view.
    """
    if not 0.0 < crop_area <= 1.0:
        raise InvalidArgumentError(f"crop area {crop_area} outside (0, 1]")
    _check_camera(scenario, camera)
    if crop_area == 1.0:
        return scenario

    cfg = scenario.config
    side = math.sqrt(crop_area)
    u, w = np.random.default_rng([seed % 2 ** 32, camera]).random(2)
    ox = u * (1.0 - side) * cfg.image_width
    oy = w * (1.0 - side) * cfg.image_height

    def moved(box: BoundingBox) -> Optional[BoundingBox]:
        cx, cy = box.center
        if not (ox <= cx <= ox + side * cfg.image_width and oy <= cy <= oy + side * cfg.image_height):
            return None
        return BoundingBox(
            left=(box.left - ox) / side,
            top=(box.top - oy) / side,
            width=box.width / side,
            height=box.height / side,
        )

    frames = []
    for per_camera in scenario.scene.frames:
        kept = []
        for v, detections in enumerate(per_camera):
            if v != camera:
                kept.append(detections)
                continue
            shifted = []
            for det in detections:
                box = moved(det.box)
                if box is not None:
                    shifted.append(det.model_copy(update={"box": box}))
            kept.append(shifted)
        frames.append(kept)

    truth = []
    for r in scenario.truth.records:
        if r.camera == camera:
            box = moved(r.box)
            if box is None:
                continue
            r = r.model_copy(update={"box": box})
        truth.append(r)

    old = scenario.windows[camera]
    windows = list(scenario.windows)
    windows[camera] = Window(
        x0=old.x0 + u * (1.0 - side) * old.width,
        y0=old.y0 + w * (1.0 - side) * old.height,
        x1=old.x0 + u * (1.0 - side) * old.width + side * old.width,
        y1=old.y0 + w * (1.0 - side) * old.height + side * old.height,
    )
    logger.info(f"Misaligned camera {camera} to {crop_area:.0%} of its view")
    return _rebuild(scenario, frames, truth, windows)


def perturb_malfunction(scenario: Scenario, cameras: Iterable[int]) -> Scenario:
    """Silence the given cameras for the whole sequence; ground truth is kept."""
    cameras = set(cameras)
    for camera in cameras:
        _check_camera(scenario, camera)
    if not cameras:
        return scenario

    frames = [
        [[] if v in cameras else detections for v, detections in enumerate(per_camera)]
        for per_camera in scenario.scene.frames
    ]
    logger.info(f"Cameras {sorted(cameras)} malfunctioning")
    return _rebuild(scenario, frames, list(scenario.truth.records), list(scenario.windows))
