"""Constant-velocity Kalman filter over (cx, cy, aspect, height) box states."""
from typing import Tuple

import numpy as np
import scipy.linalg
from scipy.stats import chi2

from models.errors import NumericError
from models.schemas import BoundingBox, KalmanState
from utils.logger import setup_logger

logger = setup_logger(__name__)

NDIM = 4


def chi2_gate(dof: int = NDIM, quantile: float = 0.95) -> float:
    """Chi-square quantile used as the motion gate (9.4877 for 4 dof at 95%)."""
    return float(chi2.ppf(quantile, dof))


class KalmanFilter:
    """
    Kalman filter for boxes in image space.

    The 8-d state holds center x/y, aspect ratio w/h, height and their
    velocities. Noise standard deviations scale with box height; the aspect
    terms use fixed values.
    """

    def __init__(
        self,
        std_weight_position: float = 1.0 / 20,
        std_weight_velocity: float = 1.0 / 160,
        std_weight_measurement: float = None,
        aspect_std_position: float = 1e-2,
        aspect_std_velocity: float = 1e-5,
        aspect_std_measurement: float = 1e-1,
    ):
        self.std_weight_position = std_weight_position
        self.std_weight_velocity = std_weight_velocity
        self.std_weight_measurement = (
            std_weight_position if std_weight_measurement is None else std_weight_measurement
        )
        self.aspect_std_position = aspect_std_position
        self.aspect_std_velocity = aspect_std_velocity
        self.aspect_std_measurement = aspect_std_measurement

        self._motion_mat = np.eye(2 * NDIM)
        for i in range(NDIM):
            self._motion_mat[i, NDIM + i] = 1.0
        self._update_mat = np.eye(NDIM, 2 * NDIM)

    def _process_noise(self, height: float) -> np.ndarray:
        std_pos = [self.std_weight_position * height] * 2 + [self.aspect_std_position, self.std_weight_position * height]
        std_vel = [self.std_weight_velocity * height] * 2 + [self.aspect_std_velocity, self.std_weight_velocity * height]
        return np.diag(np.square(np.r_[std_pos, std_vel]))

    def _measurement_noise(self, height: float) -> np.ndarray:
        std = [self.std_weight_measurement * height] * 2 + [
            self.aspect_std_measurement, self.std_weight_measurement * height
        ]
        return np.diag(np.square(std))

    @staticmethod
    def _state(mean: np.ndarray, covariance: np.ndarray) -> KalmanState:
        return KalmanState(mean=mean, covariance=(covariance + covariance.T) / 2.0)

    def initiate(self, box: BoundingBox) -> KalmanState:
        """Start a track at the box with zero velocity."""
        measurement = box.to_xyah()
        mean = np.r_[measurement, np.zeros(NDIM)]
        h = measurement[3]
        std = [
            2 * self.std_weight_position * h,
            2 * self.std_weight_position * h,
            self.aspect_std_position,
            2 * self.std_weight_position * h,
            10 * self.std_weight_velocity * h,
            10 * self.std_weight_velocity * h,
            self.aspect_std_velocity,
            10 * self.std_weight_velocity * h,
        ]
        return self._state(mean, np.diag(np.square(std)))

    def predict(self, state: KalmanState) -> KalmanState:
        """Advance one frame under constant velocity."""
        mean = self._motion_mat @ state.mean
        covariance = self._motion_mat @ state.covariance @ self._motion_mat.T
        covariance = covariance + self._process_noise(state.mean[3])
        return self._state(mean, covariance)

    def project(self, state: KalmanState) -> Tuple[np.ndarray, np.ndarray]:
        """Predicted measurement mean and innovation covariance."""
        mean = self._update_mat @ state.mean
        covariance = self._update_mat @ state.covariance @ self._update_mat.T
        return mean, covariance + self._measurement_noise(state.mean[3])

    @staticmethod
    def _factor(covariance: np.ndarray, component: str):
        try:
            return scipy.linalg.cho_factor(covariance, lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as e:
            logger.error(f"Innovation covariance not positive definite during {component}")
            raise NumericError(
                f"singular innovation covariance in {component}: diagonal {np.diag(covariance).tolist()}",
                component=component,
            ) from e

    def update(self, state: KalmanState, box: BoundingBox) -> KalmanState:
        """Correct the state with a measured box."""
        projected_mean, projected_cov = self.project(state)
        factor = self._factor(projected_cov, "kf_update")
        gain = scipy.linalg.cho_solve(factor, (state.covariance @ self._update_mat.T).T).T
        innovation = box.to_xyah() - projected_mean

        mean = state.mean + innovation @ gain.T
        covariance = state.covariance - gain @ projected_cov @ gain.T
        return self._state(mean, covariance)

    def gating_distance(self, state: KalmanState, measurements: np.ndarray) -> np.ndarray:
        """
        Squared Mahalanobis distance of measurements from the projected state.

        Args:
            state: Current (usually predicted) state
            measurements: N×4 array of (cx, cy, aspect, height)

        Returns:
            Array of N distances
        """
        mean, covariance = self.project(state)
        chol, _ = self._factor(covariance, "mahalanobis")
        d = np.atleast_2d(measurements) - mean
        z = scipy.linalg.solve_triangular(chol, d.T, lower=True, check_finite=False)
        return np.sum(z * z, axis=0)


_default_filter = KalmanFilter()


def kf_init(box: BoundingBox, kf: KalmanFilter = _default_filter) -> KalmanState:
    return kf.initiate(box)


def kf_predict(state: KalmanState, kf: KalmanFilter = _default_filter) -> KalmanState:
    return kf.predict(state)


def kf_update(state: KalmanState, box: BoundingBox, kf: KalmanFilter = _default_filter) -> KalmanState:
    return kf.update(state, box)


def mahalanobis(state: KalmanState, box: BoundingBox, kf: KalmanFilter = _default_filter) -> float:
    return float(kf.gating_distance(state, box.to_xyah())[0])
