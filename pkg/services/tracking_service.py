"""Per-camera tracking by detection with appearance and motion gating."""
from typing import Dict, List, Optional

import numpy as np

from models.errors import InvalidArgumentError
from models.schemas import (
    INFEASIBLE,
    CostMatrix,
    Detection,
    TrackerConfig,
    Tracklet,
    TrackState,
)
from services.assignment_service import solve_assignment
from services.motion_service import KalmanFilter
from utils.logger import setup_logger
from utils.similarity import cosine_matrix

logger = setup_logger(__name__)


class SingleViewTracker:
    """
    Tracker for one camera.

    Detections are associated to tracklets by the best cosine similarity
    between a tracklet's gallery of view-specific features and the detection's
    f_s. Pairs failing the motion gate or the cosine gate are infeasible.
    """

    def __init__(self, camera: int, config: Optional[TrackerConfig] = None, kf: Optional[KalmanFilter] = None):
        self.camera = camera
        self.config = config or TrackerConfig()
        self.kf = kf or KalmanFilter()
        self.tracklets: Dict[int, Tracklet] = {}
        self.next_local_id = 1
        self.frame: Optional[int] = None

    def _check_batch(self, detections: List[Detection], frame: Optional[int]) -> int:
        if len(detections) > self.config.max_detections:
            raise InvalidArgumentError(
                f"camera {self.camera}: {len(detections)} detections exceed the maximum of {self.config.max_detections}"
            )
        frames = {d.frame for d in detections}
        cameras = {d.camera for d in detections}
        if len(frames) > 1 or len(cameras) > 1:
            raise InvalidArgumentError(f"one step takes one frame and one camera, got frames {sorted(frames)}")
        if cameras and cameras != {self.camera}:
            raise InvalidArgumentError(f"tracker for camera {self.camera} received camera {cameras.pop()}")
        if frames:
            det_frame = frames.pop()
            if frame is not None and frame != det_frame:
                raise InvalidArgumentError(f"frame {frame} given for detections of frame {det_frame}")
            frame = det_frame
        if frame is None:
            raise InvalidArgumentError("an empty step needs an explicit frame index")
        if self.frame is not None and frame <= self.frame:
            raise InvalidArgumentError(f"frame {frame} does not follow frame {self.frame}")
        for det in detections:
            if det.embedding is None:
                raise InvalidArgumentError(f"detection at frame {frame} has no embedding")
        return frame

    def _cost(self, tracks: List[Tracklet], detections: List[Detection]) -> CostMatrix:
        cost = np.full((len(tracks), len(detections)), INFEASIBLE)
        if not tracks or not detections:
            return CostMatrix(cost=cost)

        features = np.stack([d.embedding.f_s for d in detections])
        measurements = np.stack([d.box.to_xyah() for d in detections])
        for row, track in enumerate(tracks):
            similarity = cosine_matrix(np.stack(track.gallery), features).max(axis=0)
            distance = self.kf.gating_distance(track.kalman, measurements)
            feasible = (similarity >= self.config.cosine_gate) & (distance <= self.config.motion_gate)
            cost[row] = np.where(feasible, 1.0 - similarity, INFEASIBLE)
        return CostMatrix(cost=cost)

    def _spawn(self, det: Detection) -> Tracklet:
        tracklet = Tracklet(
            local_id=self.next_local_id,
            camera=self.camera,
            kalman=self.kf.initiate(det.box),
            gallery=[np.array(det.embedding.f_s)],
            last_agnostic=np.array(det.embedding.f_a),
            state=TrackState.CONFIRMED if self.config.n_init <= 1 else TrackState.TENTATIVE,
            hits=1,
            age=0,
            born_at=det.frame,
            last_frame=det.frame,
            last_box=det.box,
        )
        self.next_local_id += 1
        logger.debug(f"Camera {self.camera}: new tracklet {tracklet.local_id} at frame {det.frame}")
        return tracklet

    def _mark_matched(self, track: Tracklet, det: Detection) -> None:
        track.kalman = self.kf.update(track.kalman, det.box)
        track.gallery.append(np.array(det.embedding.f_s))
        if len(track.gallery) > self.config.gallery_size:
            del track.gallery[: len(track.gallery) - self.config.gallery_size]
        track.last_agnostic = np.array(det.embedding.f_a)
        track.hits += 1
        track.age = 0
        track.last_frame = det.frame
        track.last_box = det.box
        if track.state == TrackState.TENTATIVE and track.hits >= self.config.n_init:
            track.state = TrackState.CONFIRMED
            logger.debug(f"Camera {self.camera}: tracklet {track.local_id} confirmed")

    def _mark_missed(self, track: Tracklet) -> None:
        track.age += 1
        track.hits = 0
        if track.state == TrackState.TENTATIVE or track.age > self.config.max_age:
            track.state = TrackState.DELETED
            logger.debug(f"Camera {self.camera}: tracklet {track.local_id} deleted after {track.age} missed frames")

    def step(self, detections: List[Detection], frame: Optional[int] = None) -> List[Tracklet]:
        """
        Advance the tracker by one frame.

        Args:
            detections: Detections of this camera at one frame, each with an embedding
            frame: Frame index, required only when detections is empty

        Returns:
            Confirmed tracklets matched in this frame, ordered by local id
        """
        frame = self._check_batch(detections, frame)
        self.frame = frame

        tracks = list(self.tracklets.values())
        for track in tracks:
            track.kalman = self.kf.predict(track.kalman)

        matching = solve_assignment(self._cost(tracks, detections))
        matched_rows = matching.row_to_col()
        matched_cols = set(matched_rows.values())

        matched_ids = set()
        for row, track in enumerate(tracks):
            if row in matched_rows:
                self._mark_matched(track, detections[matched_rows[row]])
                matched_ids.add(track.local_id)
            else:
                self._mark_missed(track)

        for col, det in enumerate(detections):
            if col not in matched_cols:
                tracklet = self._spawn(det)
                self.tracklets[tracklet.local_id] = tracklet
                matched_ids.add(tracklet.local_id)

        self.tracklets = {lid: t for lid, t in self.tracklets.items() if not t.is_deleted}
        active = [t for lid, t in self.tracklets.items() if lid in matched_ids and t.is_confirmed]
        logger.debug(
            f"Camera {self.camera} frame {frame}: {len(matching.pairs)} matched, "
            f"{len(detections) - len(matched_cols)} new, {len(active)} active"
        )
        return active
