"""Pydantic models for the tracking domain."""
from __future__ import annotations

import math
from enum import Enum
from typing import Any, ClassVar, Dict, Iterator, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

INFEASIBLE = math.inf


def frozen_array(value: Any, ndim: Optional[int] = None) -> np.ndarray:
    """Copy into a read-only float64 array, checking dimensionality and finiteness."""
    array = np.array(value, dtype=np.float64)
    if ndim is not None and array.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError("array contains non-finite values")
    array.setflags(write=False)
    return array


class BoundingBox(BaseModel):
    """Axis-aligned box in pixels, MOT left/top/width/height layout."""
    model_config = ConfigDict(frozen=True)

    left: float
    top: float
    width: float
    height: float

    @field_validator('left', 'top', 'width', 'height')
    @classmethod
    def must_be_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError('box coordinates must be finite')
        return float(v)

    @field_validator('width', 'height')
    @classmethod
    def must_be_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError('box width and height must be positive')
        return v

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def center(self) -> Tuple[float, float]:
        return self.left + self.width / 2.0, self.top + self.height / 2.0

    @property
    def area(self) -> float:
        return self.width * self.height

    def to_xyah(self) -> np.ndarray:
        """Measurement vector (center x, center y, aspect w/h, height)."""
        cx, cy = self.center
        return np.array([cx, cy, self.width / self.height, self.height], dtype=np.float64)

    @classmethod
    def from_xyah(cls, xyah: np.ndarray) -> "BoundingBox":
        cx, cy, aspect, height = (float(v) for v in xyah)
        width = aspect * height
        return cls(left=cx - width / 2.0, top=cy - height / 2.0, width=width, height=height)


class PatchGrid(BaseModel):
    """Crop of H×W pixels cut into non-overlapping h×w patches."""
    model_config = ConfigDict(frozen=True)

    H: int = Field(224, gt=0)
    W: int = Field(224, gt=0)
    h: int = Field(16, gt=0)
    w: int = Field(16, gt=0)
    channels: int = Field(3, gt=0)

    @model_validator(mode='after')
    def patches_must_tile(self) -> "PatchGrid":
        if self.H % self.h or self.W % self.w:
            raise ValueError(f'patch {self.h}x{self.w} does not tile crop {self.H}x{self.W}')
        return self

    @property
    def rows(self) -> int:
        return self.H // self.h

    @property
    def cols(self) -> int:
        return self.W // self.w

    @property
    def M(self) -> int:
        return self.rows * self.cols

    @property
    def P(self) -> int:
        return self.h * self.w * self.channels


class PatchTensor(BaseModel):
    """Patch-major crop values: M rows of P floats."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: PatchGrid
    values: np.ndarray

    @field_validator('values', mode='before')
    @classmethod
    def to_array(cls, v: Any) -> np.ndarray:
        return frozen_array(v, ndim=2)

    @model_validator(mode='after')
    def shape_matches_grid(self) -> "PatchTensor":
        if self.values.shape != (self.grid.M, self.grid.P):
            raise ValueError(
                f'patch values shape {self.values.shape} does not match grid ({self.grid.M}, {self.grid.P})'
            )
        return self


class EmbeddingPair(BaseModel):
    """View-agnostic (f_a) and view-specific (f_s) halves of one embedding."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    f_a: np.ndarray
    f_s: np.ndarray

    @field_validator('f_a', 'f_s', mode='before')
    @classmethod
    def to_array(cls, v: Any) -> np.ndarray:
        return frozen_array(v, ndim=1)

    @model_validator(mode='after')
    def halves_must_match(self) -> "EmbeddingPair":
        if self.f_a.shape != self.f_s.shape or self.f_a.size == 0:
            raise ValueError('f_a and f_s must be non-empty and of equal size')
        return self

    @property
    def E(self) -> int:
        return 2 * self.f_a.size

    @classmethod
    def from_vector(cls, vector: Any) -> "EmbeddingPair":
        vector = np.asarray(vector, dtype=np.float64)
        if vector.ndim != 1 or vector.size % 2:
            raise ValueError(f'embedding of length {vector.size} cannot be split evenly')
        half = vector.size // 2
        return cls(f_a=vector[:half], f_s=vector[half:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.f_a, self.f_s])


class Detection(BaseModel):
    """One person box in one camera at one frame."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    frame: int = Field(..., ge=0)
    camera: int = Field(..., ge=0)
    box: BoundingBox
    confidence: float = Field(1.0, ge=0.0, le=1.0)
    identity: Optional[int] = Field(None, gt=0, description="Ground-truth label when known")
    crop: Optional[PatchTensor] = None
    embedding: Optional[EmbeddingPair] = None


class Scene(BaseModel):
    """Synchronized multi-camera detections: frames[t][v] is the list D_t^v."""
    model_config = ConfigDict(frozen=True)

    num_cameras: int = Field(..., ge=0)
    start_frame: int = Field(0, ge=0)
    frames: List[List[List[Detection]]] = Field(default_factory=list)

    @model_validator(mode='after')
    def frames_must_be_consistent(self) -> "Scene":
        for offset, per_camera in enumerate(self.frames):
            if len(per_camera) != self.num_cameras:
                raise ValueError(
                    f'frame {self.start_frame + offset} has {len(per_camera)} camera lists, expected {self.num_cameras}'
                )
            for camera, detections in enumerate(per_camera):
                for det in detections:
                    if det.frame != self.start_frame + offset or det.camera != camera:
                        raise ValueError(
                            f'detection (frame {det.frame}, camera {det.camera}) filed under '
                            f'frame {self.start_frame + offset}, camera {camera}'
                        )
        return self

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    @property
    def frame_indices(self) -> range:
        return range(self.start_frame, self.start_frame + len(self.frames))

    def at(self, frame: int) -> List[List[Detection]]:
        return self.frames[frame - self.start_frame]

    def iter_detections(self) -> Iterator[Tuple[int, int, int, Detection]]:
        """Yield (frame, camera, index within the camera list, detection)."""
        for offset, per_camera in enumerate(self.frames):
            for camera, detections in enumerate(per_camera):
                for index, det in enumerate(detections):
                    yield self.start_frame + offset, camera, index, det

    @property
    def ground_truth(self) -> Dict[Tuple[int, int, int], int]:
        return {
            (frame, camera, index): det.identity
            for frame, camera, index, det in self.iter_detections()
            if det.identity is not None
        }

    def count(self, camera: Optional[int] = None) -> int:
        return sum(1 for _, cam, _, _ in self.iter_detections() if camera is None or cam == camera)


class CostMatrix(BaseModel):
    """rows×cols costs; +inf marks an infeasible cell."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    cost: np.ndarray

    @field_validator('cost', mode='before')
    @classmethod
    def to_array(cls, v: Any) -> np.ndarray:
        array = np.array(v, dtype=np.float64)
        if array.size == 0:
            array = array.reshape(array.shape if array.ndim == 2 else (0, 0))
        if array.ndim != 2:
            raise ValueError(f'cost matrix must be 2-d, got shape {array.shape}')
        if np.any(np.isnan(array)) or np.any(array == -np.inf):
            raise ValueError('cost cells must be finite or +inf (infeasible)')
        array.setflags(write=False)
        return array

    @property
    def rows(self) -> int:
        return self.cost.shape[0]

    @property
    def cols(self) -> int:
        return self.cost.shape[1]

    @property
    def feasible(self) -> np.ndarray:
        return np.isfinite(self.cost)


class Matching(BaseModel):
    """One-to-one row/col pairs and their summed cost."""
    model_config = ConfigDict(frozen=True)

    pairs: Tuple[Tuple[int, int], ...] = ()
    total_cost: float = 0.0

    def row_to_col(self) -> Dict[int, int]:
        return dict(self.pairs)

    def col_to_row(self) -> Dict[int, int]:
        return {c: r for r, c in self.pairs}


class KalmanState(BaseModel):
    """Mean (cx, cy, aspect, height, and velocities) and 8×8 covariance."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mean: np.ndarray
    covariance: np.ndarray

    @field_validator('mean', mode='before')
    @classmethod
    def mean_to_array(cls, v: Any) -> np.ndarray:
        array = frozen_array(v, ndim=1)
        if array.shape != (8,):
            raise ValueError('kalman mean must have 8 entries')
        return array

    @field_validator('covariance', mode='before')
    @classmethod
    def covariance_to_array(cls, v: Any) -> np.ndarray:
        array = frozen_array(v, ndim=2)
        if array.shape != (8, 8):
            raise ValueError('kalman covariance must be 8x8')
        scale = max(1.0, float(np.max(np.abs(array))))
        if np.max(np.abs(array - array.T)) > 1e-9 * scale:
            raise ValueError('kalman covariance must be symmetric')
        if np.any(np.diag(array) < -1e-9 * scale):
            raise ValueError('kalman covariance diagonal must be non-negative')
        return array


class TrackState(str, Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    DELETED = "deleted"


class TrackerConfig(BaseModel):
    """Lifecycle and gating parameters of the single-view tracker."""
    model_config = ConfigDict(frozen=True)

    n_init: int = Field(3, ge=1)
    max_age: int = Field(30, ge=1)
    gallery_size: int = Field(100, ge=1)
    cosine_gate: float = Field(0.4, ge=-1.0, le=1.0)
    motion_gate: float = Field(9.4877, gt=0.0)
    max_detections: int = Field(10, ge=1)

    @classmethod
    def from_settings(cls, settings: Any) -> "TrackerConfig":
        return cls(
            n_init=settings.n_init,
            max_age=settings.max_age,
            gallery_size=settings.gallery_size,
            cosine_gate=settings.cosine_gate,
            motion_gate=settings.motion_gate,
            max_detections=settings.max_detections,
        )


class Tracklet(BaseModel):
    """Per-camera track state; owned and mutated by one tracker."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    local_id: int
    camera: int
    global_id: Optional[int] = None
    kalman: KalmanState
    gallery: List[np.ndarray] = Field(default_factory=list)
    last_agnostic: np.ndarray
    state: TrackState = TrackState.TENTATIVE
    hits: int = Field(1, ge=0)
    age: int = Field(0, ge=0)
    born_at: int
    last_frame: int
    last_box: BoundingBox

    @property
    def key(self) -> Tuple[int, int]:
        return self.camera, self.local_id

    @property
    def is_confirmed(self) -> bool:
        return self.state == TrackState.CONFIRMED

    @property
    def is_deleted(self) -> bool:
        return self.state == TrackState.DELETED


class CrossViewConfig(BaseModel):
    """Cosine gates for cross-view merging and bank re-identification."""
    model_config = ConfigDict(frozen=True)

    merge_threshold: float = Field(0.5, ge=-1.0, le=1.0)
    bank_threshold: float = Field(0.6, ge=-1.0, le=1.0)

    @classmethod
    def from_settings(cls, settings: Any) -> "CrossViewConfig":
        return cls(merge_threshold=settings.merge_threshold, bank_threshold=settings.bank_threshold)


class BankEntry(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    embedding: np.ndarray
    last_seen_frame: int


class GlobalBank(BaseModel):
    """Latest view-agnostic embedding per global identity; ids are never reused."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    entries: Dict[int, BankEntry] = Field(default_factory=dict)
    next_global_id: int = Field(1, ge=1)

    def mint(self) -> int:
        global_id = self.next_global_id
        self.next_global_id += 1
        return global_id

    def write(self, global_id: int, embedding: np.ndarray, frame: int) -> None:
        self.entries[global_id] = BankEntry(embedding=np.array(embedding, dtype=np.float64), last_seen_frame=frame)

    def ids(self) -> List[int]:
        return sorted(self.entries)


class MaskPlan(BaseModel):
    """Masked and visible patch indices shared by every detection of one frame."""
    model_config = ConfigDict(frozen=True)

    grid: PatchGrid
    rho: float = Field(..., ge=0.0, lt=1.0)
    masked_idx: Tuple[int, ...]
    visible_idx: Tuple[int, ...]

    @model_validator(mode='after')
    def must_partition_patches(self) -> "MaskPlan":
        masked, visible = set(self.masked_idx), set(self.visible_idx)
        if masked & visible:
            raise ValueError('masked and visible indices overlap')
        if masked | visible != set(range(self.grid.M)):
            raise ValueError('masked and visible indices must cover every patch')
        if list(self.masked_idx) != sorted(self.masked_idx) or list(self.visible_idx) != sorted(self.visible_idx):
            raise ValueError('patch indices must be sorted')
        if len(self.masked_idx) != math.floor(self.rho * self.grid.M + 0.5):
            raise ValueError(f'{len(self.masked_idx)} masked patches do not match ratio {self.rho}')
        return self

    @property
    def m_vis(self) -> int:
        return len(self.visible_idx)


LossWeights = Tuple[float, float, float]


class LossReport(BaseModel):
    """Loss components and their weighted total."""
    model_config = ConfigDict(frozen=True)

    l_sep: float = Field(..., ge=0.0)
    l_distill: float = Field(..., ge=0.0)
    l_recon: float = Field(..., ge=0.0)
    total: float
    weights: LossWeights = (1.0, 1.0, 1.0)
    objective: Optional[float] = Field(None, description="Value actually differentiated during training")

    @model_validator(mode='after')
    def total_is_weighted_sum(self) -> "LossReport":
        expected = self.weights[0] * self.l_sep + self.weights[1] * self.l_distill + self.weights[2] * self.l_recon
        if abs(self.total - expected) > 1e-9 * max(1.0, abs(expected)):
            raise ValueError('total must equal the weighted sum of its components')
        return self


class ToyTrainConfig(BaseModel):
    """Dimensions and optimisation settings of the desk-scale trainer."""
    model_config = ConfigDict(frozen=True)

    embed_dim: int = Field(32, ge=2)
    decoder_dim: int = Field(16, ge=1)
    teacher_dim: int = Field(16, ge=1)
    pos_dim: int = Field(8, ge=4)
    rho: float = Field(0.75, ge=0.0, lt=1.0)
    lr: float = Field(0.2, ge=0.0)
    epochs: int = Field(50, ge=0)
    batch_frames: int = Field(1, ge=1)
    seed: int = 7
    teacher_seed: int = 1234
    weights: LossWeights = (1.0, 1.0, 1.0)
    norm_pix_loss: bool = True
    pixel_center: float = Field(0.5, description="Subtracted from pixels before encoder and teacher")
    nmi_bins: int = Field(8, ge=2)

    @field_validator('embed_dim')
    @classmethod
    def embed_dim_must_be_even(cls, v: int) -> int:
        if v % 2:
            raise ValueError('embedding dimension must be even')
        return v

    @field_validator('pos_dim')
    @classmethod
    def pos_dim_multiple_of_four(cls, v: int) -> int:
        if v % 4:
            raise ValueError('positional code dimension must be a multiple of 4')
        return v

    @classmethod
    def from_settings(cls, settings: Any, **overrides: Any) -> "ToyTrainConfig":
        values = dict(
            embed_dim=settings.embed_dim,
            decoder_dim=settings.decoder_dim,
            teacher_dim=settings.teacher_dim,
            rho=settings.mask_ratio,
            lr=settings.lr,
            epochs=settings.epochs,
            batch_frames=settings.batch_frames,
            seed=settings.seed,
            weights=(settings.w_sep, settings.w_distill, settings.w_recon),
            norm_pix_loss=settings.norm_pix_loss,
            nmi_bins=settings.nmi_bins,
        )
        values.update(overrides)
        return cls(**values)


class ToyEncoderParams(BaseModel):
    """Trainable matrices of the toy encoder/decoder stack (row-vector convention)."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    W_enc: np.ndarray    # P × E
    W_q: np.ndarray      # E/2 × E/2
    W_k: np.ndarray
    W_v: np.ndarray
    W_o: np.ndarray
    W_dist: np.ndarray   # E/2 × Ed
    mask_token: np.ndarray  # E/2
    W_rec: np.ndarray    # (E/2 + Ed + pos) × P
    W_proj: np.ndarray   # Ed × Et

    NAMES: ClassVar[Tuple[str, ...]] = ('W_enc', 'W_q', 'W_k', 'W_v', 'W_o', 'W_dist', 'mask_token', 'W_rec', 'W_proj')

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.NAMES}

    def copy_params(self) -> "ToyEncoderParams":
        return ToyEncoderParams(**{name: value.copy() for name, value in self.arrays().items()})

    def to_json_dict(self) -> Dict[str, list]:
        return {name: value.tolist() for name, value in self.arrays().items()}

    @classmethod
    def from_json_dict(cls, data: Dict[str, list]) -> "ToyEncoderParams":
        return cls(**{name: np.array(data[name], dtype=np.float64) for name in cls.NAMES})


class TrackingRecord(BaseModel):
    """One output (or ground-truth) box with its identity."""
    model_config = ConfigDict(frozen=True)

    frame: int = Field(..., ge=0)
    camera: int = Field(..., ge=0)
    global_id: int
    box: BoundingBox
    local_id: Optional[int] = None


class TrackingResult(BaseModel):
    """All records of one run; global ids unique within a (frame, camera)."""
    model_config = ConfigDict(frozen=True)

    records: List[TrackingRecord] = Field(default_factory=list)

    @model_validator(mode='after')
    def ids_unique_per_slice(self) -> "TrackingResult":
        seen = set()
        for record in self.records:
            key = (record.frame, record.camera, record.global_id)
            if key in seen:
                raise ValueError(
                    f'global id {record.global_id} appears twice in frame {record.frame}, camera {record.camera}'
                )
            seen.add(key)
        return self

    @property
    def cameras(self) -> List[int]:
        return sorted({r.camera for r in self.records})

    @property
    def frames(self) -> List[int]:
        return sorted({r.frame for r in self.records})

    def by_slice(self) -> Dict[Tuple[int, int], List[TrackingRecord]]:
        """Group records by (frame, camera), keeping file order inside a slice."""
        grouped: Dict[Tuple[int, int], List[TrackingRecord]] = {}
        for record in self.records:
            grouped.setdefault((record.frame, record.camera), []).append(record)
        return grouped

    def for_camera(self, camera: int, use_local_ids: bool = False) -> "TrackingResult":
        selected = []
        for r in self.records:
            if r.camera != camera:
                continue
            if use_local_ids:
                if r.local_id is None:
                    raise ValueError('record carries no local id')
                r = r.model_copy(update={'global_id': r.local_id})
            selected.append(r)
        return TrackingResult(records=selected)


class MetricCounts(BaseModel):
    fp: int = 0
    fn: int = 0
    idsw: int = 0
    total_gt: int = 0
    idtp: int = 0
    idfp: int = 0
    idfn: int = 0
    cross_tp: int = 0
    cross_fp: int = 0
    cross_fn: int = 0


class MetricReport(BaseModel):
    """Over-time, cross-view and overall scores in [0,1]; None marks an undefined metric."""

    name: str = "scenario"
    idp: float
    idr: float
    idf1: float
    mota: float
    hota: float
    det_a: float = 0.0
    ass_a: float = 0.0
    aidp: Optional[float] = None
    aidr: Optional[float] = None
    aidf1: Optional[float] = None
    mhaa: Optional[float] = None
    overall_a: Optional[float] = None
    overall_f: Optional[float] = None
    counts: MetricCounts = Field(default_factory=MetricCounts)

    @model_validator(mode='after')
    def overall_matches_components(self) -> "MetricReport":
        if self.overall_f is not None and self.aidf1 is not None:
            if abs(self.overall_f - (self.idf1 + self.aidf1) / 2.0) > 1e-12:
                raise ValueError('overall F must be Mean(IDF1, AIDF1)')
        if self.overall_a is not None and self.mhaa is not None:
            if abs(self.overall_a - (self.mota + self.mhaa) / 2.0) > 1e-12:
                raise ValueError('overall A must be Mean(MOTA, MHAA)')
        return self


class ProbeRow(BaseModel):
    """Camera sensitivity of one embedding variant and its tracking use."""

    embedding: str
    camera_accuracy: Optional[float] = Field(None, ge=0.0, le=1.0)
    intra_idf1: float = Field(..., ge=0.0, le=1.0)
    cross_aidf1: Optional[float] = Field(None, ge=0.0, le=1.0)


class SweepRow(BaseModel):
    """One mask-ratio run, or a baseline row without rho and loss."""

    features: str = "toy"
    rho: Optional[float] = Field(None, ge=0.0, lt=1.0)
    final_total: Optional[float] = None
    report: MetricReport


class Window(BaseModel):
    """Axis-aligned view rectangle on the ground plane."""
    model_config = ConfigDict(frozen=True)

    x0: float
    y0: float
    x1: float
    y1: float

    @model_validator(mode='after')
    def must_have_extent(self) -> "Window":
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError('window must have positive width and height')
        return self

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def intersects(self, other: "Window") -> bool:
        return self.x0 < other.x1 and other.x0 < self.x1 and self.y0 < other.y1 and other.y0 < self.y1


class SynthConfig(BaseModel):
    """Parameters of the synthetic multi-view scenario generator."""
    model_config = ConfigDict(frozen=True)

    num_identities: int = Field(8, ge=1)
    num_cameras: int = Field(3, ge=1)
    num_frames: int = Field(200, ge=1)
    plane_size: float = Field(100.0, gt=0.0)
    camera_windows: Optional[List[Window]] = None
    identity_dim: int = Field(8, ge=1)
    view_noise: float = Field(0.05, ge=0.0)
    view_distortion: float = Field(0.3, ge=0.0)
    miss_rate: float = Field(0.0, ge=0.0, le=1.0)
    orthogonal_latents: bool = False
    with_crops: bool = False
    image_width: int = Field(640, gt=0)
    image_height: int = Field(480, gt=0)
    seed: int = 7

    @model_validator(mode='after')
    def windows_must_overlap(self) -> "SynthConfig":
        if self.camera_windows is not None:
            if len(self.camera_windows) != self.num_cameras:
                raise ValueError('one window per camera is required')
            if self.num_cameras >= 2 and not any(
                a.intersects(b)
                for i, a in enumerate(self.camera_windows)
                for b in self.camera_windows[i + 1:]
            ):
                raise ValueError('at least one pair of camera windows must overlap')
        if self.orthogonal_latents and self.identity_dim < self.num_identities:
            raise ValueError('orthogonal latents need identity_dim >= num_identities')
        return self


class Scenario(BaseModel):
    """Generated scene plus the generative factors behind it."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    config: SynthConfig
    scene: Scene
    truth: TrackingResult
    windows: List[Window]
    latents: Dict[int, np.ndarray]
    view_transforms: Dict[int, Tuple[np.ndarray, np.ndarray]]


class DetectionFileRow(BaseModel):
    """frame,camera,id,left,top,width,height,confidence"""

    frame: int = Field(..., ge=0)
    camera: int = Field(..., ge=0)
    id: int = Field(-1)
    left: float
    top: float
    width: float = Field(..., gt=0)
    height: float = Field(..., gt=0)
    confidence: float = Field(1.0, ge=0.0, le=1.0)

    @field_validator('id')
    @classmethod
    def id_is_label_or_unknown(cls, v: int) -> int:
        if v != -1 and v <= 0:
            raise ValueError('id must be a positive label or -1')
        return v

    @field_validator('left', 'top', 'width', 'height', 'confidence')
    @classmethod
    def must_be_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError('value must be finite')
        return v


class EmbeddingFileRow(BaseModel):
    """frame,camera,detectionIndex,v1..vE"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    frame: int = Field(..., ge=0)
    camera: int = Field(..., ge=0)
    detection_index: int = Field(..., ge=0)
    values: np.ndarray

    @field_validator('values', mode='before')
    @classmethod
    def to_array(cls, v: Any) -> np.ndarray:
        return frozen_array(v, ndim=1)
