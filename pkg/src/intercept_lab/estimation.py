"""Target state estimation: CV and CA Kalman filters and a two-model IMM.

Both motion models live in a common 9-dimensional state space
``x = [p, v, a]`` so that model mixing is a plain weighted combination.
The constant-velocity model embeds with a zero acceleration block: its
transition matrix zeroes the acceleration, and the process noise pins the
acceleration covariance at a small configured variance so mixing with the
constant-acceleration model stays well-posed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import FilterDivergenceError, ParameterError
from .numcore import PSD_FLOOR, psd_floor, symmetrize

log = logging.getLogger(__name__)

STATE_DIM = 9

# Markov transition matrix default: sticky prior, tunable.
DEFAULT_TRANSITION = ((0.95, 0.05), (0.05, 0.95))

# Initial velocity/acceleration variance for a filter started from a single
# position fix (weakly informative).
INIT_VEL_VAR = 25.0
INIT_ACC_VAR = 25.0


@dataclass(frozen=True)
class TargetStateCA:
    """Stacked position/velocity/acceleration target state."""

    p: np.ndarray
    v: np.ndarray
    a: np.ndarray

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "TargetStateCA":
        x = np.asarray(x, dtype=float)
        return cls(p=x[0:3].copy(), v=x[3:6].copy(), a=x[6:9].copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.v, self.a])


@dataclass
class GaussianBelief:
    """Gaussian state estimate in the common 9-dim space."""

    mean: np.ndarray  # shape (9,)
    cov: np.ndarray   # shape (9, 9), symmetric PSD

    def copy(self) -> "GaussianBelief":
        return GaussianBelief(self.mean.copy(), self.cov.copy())

    @property
    def state(self) -> TargetStateCA:
        return TargetStateCA.from_vector(self.mean)


@dataclass(frozen=True)
class ModelSpec:
    """One dynamic model of the bank.

    kind: "cv" or "ca".
    dt: step duration in seconds.
    sigma: white-noise scale driving the model; acceleration stdev (m/s^2)
        for "cv", jerk stdev (m/s^3) for "ca".
    accel_pin_var: variance kept on the acceleration diagonal of the CV
        model so the two models mix in the same space (ignored for "ca").
    """

    kind: str
    dt: float
    sigma: float
    accel_pin_var: float = 1e-4

    def __post_init__(self):
        if self.kind not in ("cv", "ca"):
            raise ParameterError(f"unknown model kind {self.kind!r}")
        if self.dt <= 0.0:
            raise ParameterError("model dt must be positive")
        if self.sigma < 0.0:
            raise ParameterError("process-noise scale must be nonnegative")


def build_model(spec: ModelSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """State transition A, process noise Xi and measurement matrix H (9-dim)."""
    dt = spec.dt
    I3 = np.eye(3)
    A = np.zeros((STATE_DIM, STATE_DIM))
    A[0:3, 0:3] = I3
    A[0:3, 3:6] = dt * I3
    A[3:6, 3:6] = I3
    if spec.kind == "ca":
        A[0:3, 6:9] = 0.5 * dt * dt * I3
        A[3:6, 6:9] = dt * I3
        A[6:9, 6:9] = I3
        B = np.vstack([dt**3 / 6.0 * I3, 0.5 * dt * dt * I3, dt * I3])
        Xi = spec.sigma**2 * (B @ B.T)
    else:
        # CV: acceleration block has zero dynamics; its covariance is re-pinned
        # by the process noise every step.
        B = np.vstack([0.5 * dt * dt * I3, dt * I3, np.zeros((3, 3))])
        Xi = spec.sigma**2 * (B @ B.T)
        Xi[6:9, 6:9] += spec.accel_pin_var * I3
    H = np.zeros((3, STATE_DIM))
    H[0:3, 0:3] = I3
    return A, symmetrize(Xi), H


def kf_predict(b: GaussianBelief, A: np.ndarray, Xi: np.ndarray) -> GaussianBelief:
    """Standard Kalman time update."""
    mean = A @ b.mean
    cov = symmetrize(A @ b.cov @ A.T + Xi)
    return GaussianBelief(mean, cov)


def kf_update(
    b: GaussianBelief, z: np.ndarray, Z: np.ndarray, H: np.ndarray
) -> tuple[GaussianBelief, np.ndarray, float]:
    """Standard Kalman measurement update.

    Returns the posterior belief, the innovation, and the Gaussian density of
    the innovation under N(0, S) (the model likelihood used by the IMM).
    """
    P = b.cov
    S = psd_floor(H @ P @ H.T + Z, PSD_FLOOR)
    innovation = np.asarray(z, dtype=float) - H @ b.mean
    try:
        S_inv = np.linalg.inv(S)
        det_S = np.linalg.det(S)
    except np.linalg.LinAlgError as exc:
        raise FilterDivergenceError("innovation covariance is singular") from exc
    if not np.isfinite(det_S) or det_S <= 0.0:
        raise FilterDivergenceError("innovation covariance is singular after flooring")
    K = P @ H.T @ S_inv
    mean = b.mean + K @ innovation
    # Joseph form keeps the posterior covariance PSD under roundoff.
    IKH = np.eye(STATE_DIM) - K @ H
    cov = symmetrize(IKH @ P @ IKH.T + K @ Z @ K.T)
    m = S.shape[0]
    quad = float(innovation @ S_inv @ innovation)
    likelihood = math.exp(-0.5 * quad) / math.sqrt((2.0 * math.pi) ** m * det_S)
    return GaussianBelief(mean, cov), innovation, likelihood


def mix_beliefs(beliefs: list[GaussianBelief], weights: np.ndarray) -> GaussianBelief:
    """Moment-matched Gaussian mixture: weighted mean plus spread-of-means term."""
    weights = np.asarray(weights, dtype=float)
    mean = sum(w * b.mean for w, b in zip(weights, beliefs))
    cov = np.zeros((STATE_DIM, STATE_DIM))
    for w, b in zip(weights, beliefs):
        d = b.mean - mean
        cov += w * (b.cov + np.outer(d, d))
    return GaussianBelief(mean, symmetrize(cov))


@dataclass
class ImmBelief:
    """Full internal state of the two-model (CV, CA) IMM filter."""

    beliefs: list[GaussianBelief]
    mu: np.ndarray                     # model probabilities, simplex
    transition: np.ndarray             # row-stochastic Markov matrix
    specs: tuple[ModelSpec, ModelSpec]
    fused: GaussianBelief | None = None

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.transition = np.asarray(self.transition, dtype=float)
        if self.mu.shape != (len(self.beliefs),):
            raise ParameterError("mu length must match the model bank")
        if abs(self.mu.sum() - 1.0) > 1e-9 or (self.mu < 0).any():
            raise ParameterError("mu must lie on the probability simplex")
        if np.abs(self.transition.sum(axis=1) - 1.0).max() > 1e-9:
            raise ParameterError("transition rows must sum to 1")
        if self.fused is None:
            self.fused = mix_beliefs(self.beliefs, self.mu)

    def copy(self) -> "ImmBelief":
        return ImmBelief(
            beliefs=[b.copy() for b in self.beliefs],
            mu=self.mu.copy(),
            transition=self.transition.copy(),
            specs=self.specs,
            fused=self.fused.copy(),
        )


def init_imm(
    z: np.ndarray,
    Z: np.ndarray,
    sigma_a: float,
    sigma_j: float,
    dt: float,
    transition=DEFAULT_TRANSITION,
    accel_pin_var: float = 1e-4,
) -> ImmBelief:
    """Start an IMM from a first position fix: v = a = 0, weak velocity prior."""
    mean = np.zeros(STATE_DIM)
    mean[0:3] = np.asarray(z, dtype=float)
    cov = np.zeros((STATE_DIM, STATE_DIM))
    cov[0:3, 0:3] = np.asarray(Z, dtype=float)
    cov[3:6, 3:6] = INIT_VEL_VAR * np.eye(3)
    cov[6:9, 6:9] = INIT_ACC_VAR * np.eye(3)
    specs = (
        ModelSpec("cv", dt, sigma_a, accel_pin_var),
        ModelSpec("ca", dt, sigma_j),
    )
    beliefs = [GaussianBelief(mean.copy(), cov.copy()) for _ in specs]
    return ImmBelief(beliefs, np.array([0.5, 0.5]), np.asarray(transition, float), specs)


def imm_step(b: ImmBelief, z, Z, dt: float) -> ImmBelief:
    """One IMM cycle: filter each model, re-weight, mix, fuse.

    With a measurement: each model is predicted and updated collecting its
    likelihood; the model probabilities are re-weighted through the Markov
    prior; the conditional mixing probabilities re-initialize each model from
    the bank; the fused output is the probability-weighted combination.
    Without a measurement the models are predicted and the probabilities are
    left unchanged.
    """
    n = len(b.beliefs)
    specs = tuple(replace(s, dt=dt) if s.dt != dt else s for s in b.specs)
    models = [build_model(s) for s in specs]

    predicted = [kf_predict(bel, A, Xi) for bel, (A, Xi, _) in zip(b.beliefs, models)]

    if z is None:
        out = ImmBelief(predicted, b.mu.copy(), b.transition.copy(), specs)
        return out

    filtered: list[GaussianBelief] = []
    likelihoods = np.empty(n)
    for i, (bel, (_, _, H)) in enumerate(zip(predicted, models)):
        post, _, lik = kf_update(bel, z, Z, H)
        filtered.append(post)
        likelihoods[i] = lik

    # Markov-prior predicted weights, then Bayes re-weighting by likelihood.
    prior = b.transition.T @ b.mu
    posterior = likelihoods * prior
    total = posterior.sum()
    if total <= 0.0 or not np.isfinite(total):
        log.warning("IMM degenerate update: all model likelihoods underflowed")
        mu = b.mu.copy()
    else:
        mu = posterior / total

    # Conditional mixing probabilities mu[i|j] and per-model re-initialization.
    cbar = b.transition.T @ mu
    mixed: list[GaussianBelief] = []
    for j in range(n):
        if cbar[j] <= 0.0:
            mixed.append(filtered[j].copy())
            continue
        w = b.transition[:, j] * mu / cbar[j]
        mixed.append(mix_beliefs(filtered, w))

    # The fused output combines the post-filtering estimates with the model
    # probabilities themselves (not the conditional ones).
    return ImmBelief(mixed, mu, b.transition.copy(), specs, fused=mix_beliefs(filtered, mu))


def predict_horizon(b: ImmBelief, n_steps: int, dt: float) -> list[TargetStateCA]:
    """Propagate the fused mean with the CA model and zero jerk for n steps."""
    if n_steps < 1:
        raise ParameterError("n_steps must be >= 1")
    A, _, _ = build_model(ModelSpec("ca", dt, 0.0))
    x = b.fused.mean.copy()
    states = []
    for _ in range(n_steps):
        x = A @ x
        states.append(TargetStateCA.from_vector(x))
    return states
