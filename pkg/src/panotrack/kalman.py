"""Constant-velocity Kalman filter over panorama boxes.

State is ``(cx, cy, aspect, height, vcx, vcy, vaspect, vheight)`` with
aspect = width / height.  Noise scales with box height so the filter behaves
the same for near and far targets.  The center column lives on the circular
panorama axis; it is reduced modulo ``W`` after every step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import KalmanState, PanoBox, wrap_column

_NDIM = 4
_MIN_SIZE = 1e-3


def kalman_correct(mean: np.ndarray, covariance: np.ndarray, z: np.ndarray,
                   H: np.ndarray, R: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Generic Kalman measurement update (Joseph form for the covariance)."""
    mean = np.asarray(mean, dtype=np.float64)
    P = np.asarray(covariance, dtype=np.float64)
    H = np.atleast_2d(np.asarray(H, dtype=np.float64))
    R = np.atleast_2d(np.asarray(R, dtype=np.float64))
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    S = H @ P @ H.T + R
    K = np.linalg.solve(S.T, (P @ H.T).T).T
    new_mean = mean + K @ (z - H @ mean)
    I_KH = np.eye(len(mean)) - K @ H
    new_cov = I_KH @ P @ I_KH.T + K @ R @ K.T
    return new_mean, 0.5 * (new_cov + new_cov.T)


def box_to_measurement(box: PanoBox) -> np.ndarray:
    return np.array([box.center_x, box.center_y, box.w / box.h, box.h])


def measurement_to_box(z, pano_width: float, score: float = 1.0) -> PanoBox:
    cx, cy, aspect, h = (float(v) for v in z[:4])
    h = max(h, _MIN_SIZE)
    w = min(max(aspect * h, _MIN_SIZE), pano_width)
    return PanoBox.wrapped(cx - w / 2.0, cy - h / 2.0, w, h, pano_width, score)


@dataclass
class ConstantVelocityFilter:
    """Noise model for the box filter.

    ``meas_scale`` multiplies the measurement standard deviations; values
    near zero make the filter trust measurements completely.
    ``init_velocity_scale`` sets the prior velocity spread of a new track
    (in units of ``std_weight_velocity * height``); a wide prior lets the
    first few measurements fix the velocity.
    """

    std_weight_position: float = 1.0 / 20
    std_weight_velocity: float = 1.0 / 160
    meas_scale: float = 1.0
    init_velocity_scale: float = 40.0

    def __post_init__(self):
        self._F = np.eye(2 * _NDIM)
        for i in range(_NDIM):
            self._F[i, _NDIM + i] = 1.0
        self._H = np.eye(_NDIM, 2 * _NDIM)

    def initiate(self, box: PanoBox) -> KalmanState:
        z = box_to_measurement(box)
        h = z[3]
        wp, wv = self.std_weight_position, self.std_weight_velocity
        sv = self.init_velocity_scale * wv * h
        std = np.array([2 * wp * h, 2 * wp * h, 1e-2, 2 * wp * h, sv, sv, 1e-5, sv])
        mean = np.concatenate([z, np.zeros(_NDIM)])
        return KalmanState(mean, np.diag(std ** 2))

    def predict(self, state: KalmanState, pano_width: float) -> Tuple[KalmanState, PanoBox]:
        mean = self._F @ state.mean
        h = abs(state.mean[3])
        wp, wv = self.std_weight_position, self.std_weight_velocity
        q = np.array([wp * h, wp * h, 1e-2, wp * h, wv * h, wv * h, 1e-5, wv * h]) ** 2
        cov = self._F @ state.covariance @ self._F.T + np.diag(q)
        mean[0] = wrap_column(mean[0], pano_width)
        new_state = KalmanState(mean, 0.5 * (cov + cov.T))
        return new_state, measurement_to_box(mean, pano_width)

    def measurement_noise(self, height: float) -> np.ndarray:
        wp = self.std_weight_position
        std = self.meas_scale * np.array([wp * height, wp * height, 1e-1, wp * height])
        return np.diag(std ** 2)

    def update(self, state: KalmanState, measured: PanoBox,
               pano_width: Optional[float] = None) -> KalmanState:
        W = measured.pano_width if pano_width is None else pano_width
        z = box_to_measurement(measured)
        if not np.all(np.isfinite(z)):
            raise ValueError("measurement must be finite")
        # pick the copy of the measured center that is nearest the prediction
        cx = state.mean[0]
        z[0] = cx + wrap_column(z[0] - cx + W / 2.0, W) - W / 2.0
        mean, cov = kalman_correct(state.mean, state.covariance, z, self._H,
                                   self.measurement_noise(abs(state.mean[3])))
        mean[0] = wrap_column(mean[0], W)
        return KalmanState(mean, cov)


DEFAULT_FILTER = ConstantVelocityFilter()


def kalman_predict(state: KalmanState, pano_width: float,
                   kf: ConstantVelocityFilter = DEFAULT_FILTER) -> Tuple[KalmanState, PanoBox]:
    return kf.predict(state, pano_width)


def kalman_update(state: KalmanState, measured: PanoBox,
                  kf: ConstantVelocityFilter = DEFAULT_FILTER) -> KalmanState:
    return kf.update(state, measured)
