"""Simulated range detector with a pose-dependent measurement covariance.

The detector reports the target position in the world frame.  Its covariance
combines the range noise, the observer's translation uncertainty, and an
orientation uncertainty that grows with the observer's body rates; a constant
isotropic term models the sampling bias of observing the target from one side.
The orientation contribution is linearized around zero error angles and
propagated with the Jacobian of (range, translation, angles) -> world position,
so angular noise degrades accuracy proportionally to the measured range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ParameterError
from .numcore import Rotation3, cholesky_psd, rot_axis_derivatives, symmetrize

_D_RX, _D_RY, _D_RZ = rot_axis_derivatives()


@dataclass
class ObserverState:
    """Pose, rates, and pose uncertainty of the sensing platform."""

    t: np.ndarray                 # position, world frame (m)
    R_m: Rotation3                # measured orientation (world <- body)
    omega: np.ndarray             # body angular rates (rad/s)
    Sigma_t: np.ndarray           # translation covariance (m^2)
    heading: float = 0.0


@dataclass(frozen=True)
class SensorNoiseParams:
    """Noise and gating parameters of the simulated detector."""

    sigma_l: float = 0.03           # range stdev (m)
    sigma_zeta3: float = 0.1        # sampling-bias stdev (m)
    c_alpha: float = 0.005          # angular-rate-to-orientation-noise (rad*s)
    rate: float = 10.0              # detection rate (Hz)
    max_range: float = 25.0         # range gate (m)
    fov_azimuth_halfwidth: float | None = None   # optional azimuth gate (rad)
    dropout_p: float = 0.0          # per-detection loss probability

    def __post_init__(self):
        if min(self.sigma_l, self.sigma_zeta3, self.c_alpha, self.dropout_p) < 0:
            raise ParameterError("sensor noise parameters must be nonnegative")
        if self.rate <= 0:
            raise ParameterError("detection rate must be positive")


@dataclass
class Detection:
    """One noisy position measurement with its full covariance."""

    time: float
    z: np.ndarray        # measured target position, world frame (m)
    Z: np.ndarray        # measurement covariance (m^2)


def orientation_cov(omega: np.ndarray, c_alpha: float) -> np.ndarray:
    """Orientation-error covariance: c_alpha^2 * diag of the squared body rates."""
    w = np.asarray(omega, dtype=float)
    return np.diag((c_alpha * w) ** 2)


def measurement_cov(
    obs: ObserverState,
    d: np.ndarray,
    l_m: float,
    params: SensorNoiseParams,
) -> np.ndarray:
    """Covariance of the world-frame position measurement.

    d is the unit ray direction to the target in the observer body frame and
    l_m the measured range.  The range/translation/orientation noises are
    propagated through the Jacobian

        J = [R d | I | l R dRx d | l R dRy d | l R dRz d],

    and the sampling-bias term adds an isotropic floor.
    """
    d = np.asarray(d, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise ContractError("ray direction must be a unit vector")
    if l_m <= 0.0:
        raise ContractError("measured range must be positive")
    R = obs.R_m.matrix
    J = np.empty((3, 7))
    J[:, 0] = R @ d
    J[:, 1:4] = np.eye(3)
    J[:, 4] = l_m * (R @ (_D_RX @ d))
    J[:, 5] = l_m * (R @ (_D_RY @ d))
    J[:, 6] = l_m * (R @ (_D_RZ @ d))
    noise = np.zeros((7, 7))
    noise[0, 0] = params.sigma_l**2
    noise[1:4, 1:4] = np.asarray(obs.Sigma_t, dtype=float)
    noise[4:7, 4:7] = orientation_cov(obs.omega, params.c_alpha)
    cov = J @ noise @ J.T + params.sigma_zeta3**2 * np.eye(3)
    return symmetrize(cov)


def detect(
    time: float,
    target_true_p: np.ndarray,
    obs: ObserverState,
    params: SensorNoiseParams,
    rng: np.random.Generator,
) -> Detection | None:
    """Emit one noisy detection of the target, or None if gated out.

    The ray direction and range come from the true geometry; the reported
    covariance is exactly the one the noise was drawn from, so downstream
    estimators receive honest uncertainty.
    """
    rel = np.asarray(target_true_p, dtype=float) - obs.t
    l_m = float(np.linalg.norm(rel))
    if l_m <= 0.0 or l_m > params.max_range:
        return None
    d = obs.R_m.inverse_apply(rel) / l_m
    if params.fov_azimuth_halfwidth is not None:
        azimuth = np.arctan2(d[1], d[0])
        if abs(azimuth) > params.fov_azimuth_halfwidth:
            return None
    if params.dropout_p > 0.0 and rng.random() < params.dropout_p:
        return None
    Z = measurement_cov(obs, d, l_m, params)
    L = cholesky_psd(Z, 0.0) if Z.any() else np.zeros((3, 3))
    z = target_true_p + L @ rng.standard_normal(3)
    return Detection(time=time, z=z, Z=Z)
