"""Reactive interception guidance laws and shared line-of-sight kinematics.

Five laws share one interface: they consume a LosState (relative geometry of
target and interceptor) and produce a commanded 3-D acceleration.

* pp   - pure pursuit, acceleration proportional to relative position.
* pn   - canonical proportional navigation on the LOS rate (diagnostic
         reference; zero output on and near a collision course).
* lpn  - Cartesian/linearized PN driving the zero-effort miss to zero.
* epn  - lpn blended with a weighted proportional approach term, trading a
         little accuracy for fast initial and repeated engagement.
* gpn  - PN first term plus closing-speed regulation toward a setpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ParameterError

_LAM_RATE_EPS = 1e-9


@dataclass(frozen=True)
class LosState:
    """Relative engagement geometry (all quantities target minus interceptor)."""

    dp: np.ndarray      # relative position (m)
    dv: np.ndarray      # relative velocity (m/s)
    r: float            # range (m)
    r_rate: float       # range rate (m/s)
    v_c: float          # closing velocity, -r_rate (m/s)
    omega: np.ndarray   # LOS angular rate vector (rad/s)
    lam_rate: float     # |omega| (rad/s)
    t_go: float         # estimated time to collision (s)


@dataclass(frozen=True)
class GuidanceParams:
    """Gains for all law families; unused fields are ignored by each law."""

    law: str = "epn"
    G: float = 19.7            # pp / lpn / epn gain
    W: float = 5.1e-2          # epn approach-term weight
    k1: float = 69.5           # gpn LOS-rate gain
    k2: float = 5.8            # gpn closing-speed gain
    v_r: float = -6.6          # gpn range-rate setpoint (m/s, negative = closing)
    eps_v: float = 1e-3        # small-speed guard for t_go

    def __post_init__(self):
        if self.G < 0:
            raise ParameterError("gain G must be nonnegative")
        if not 0.0 <= self.W <= 1.0:
            raise ParameterError("weight W must lie in [0, 1]")
        if self.eps_v <= 0:
            raise ParameterError("eps_v must be positive")


@dataclass
class GuidanceCommand:
    """Commanded acceleration before and after the box limits."""

    a_cmd: np.ndarray
    desired_heading: float
    a_limited: np.ndarray | None = None


def los_state(p_int, v_int, p_tgt, v_tgt, eps_v: float = 1e-3) -> LosState:
    """Line-of-sight kinematics between interceptor and target."""
    dp = np.asarray(p_tgt, dtype=float) - np.asarray(p_int, dtype=float)
    dv = np.asarray(v_tgt, dtype=float) - np.asarray(v_int, dtype=float)
    r = float(np.linalg.norm(dp))
    if r <= 0.0:
        raise ContractError("coincident positions: LOS undefined (interception moment)")
    r_rate = float(dp @ dv) / r
    omega = np.cross(dp, dv) / (r * r)
    speed = float(np.linalg.norm(dv))
    return LosState(
        dp=dp,
        dv=dv,
        r=r,
        r_rate=r_rate,
        v_c=-r_rate,
        omega=omega,
        lam_rate=float(np.linalg.norm(omega)),
        t_go=r / max(speed, eps_v),
    )


def _heading_to(dp: np.ndarray) -> float:
    return math.atan2(dp[1], dp[0])


def pp(los: LosState, params: GuidanceParams) -> GuidanceCommand:
    """Pure pursuit: a = G * dp."""
    return GuidanceCommand(params.G * los.dp, _heading_to(los.dp))


def pn(los: LosState, params: GuidanceParams, a_dir: np.ndarray | None = None) -> GuidanceCommand:
    """Canonical PN: a = G * v_c * lam_rate along a_dir.

    By default a_dir is the unit vector perpendicular to the LOS in the
    engagement plane.  Degenerate LOS rate yields a zero command, which is
    precisely the reattempt weakness that motivates the other laws.
    """
    if los.lam_rate < _LAM_RATE_EPS:
        return GuidanceCommand(np.zeros(3), _heading_to(los.dp))
    if a_dir is None:
        a_dir = np.cross(los.omega, los.dp / los.r)
        norm = np.linalg.norm(a_dir)
        if norm < _LAM_RATE_EPS:
            return GuidanceCommand(np.zeros(3), _heading_to(los.dp))
        a_dir = a_dir / norm
    elif abs(np.linalg.norm(a_dir) - 1.0) > 1e-9:
        raise ContractError("a_dir must be a unit vector")
    return GuidanceCommand(params.G * los.v_c * los.lam_rate * a_dir, _heading_to(los.dp))


def lpn_term(los: LosState) -> np.ndarray:
    """Zero-effort-miss correction (dp + dv * t_go) / t_go^2; zero on a collision course."""
    return (los.dp + los.dv * los.t_go) / (los.t_go * los.t_go)


def lpn(los: LosState, params: GuidanceParams) -> GuidanceCommand:
    """Linearized PN: a = G * (dp + dv * t_go) / t_go^2."""
    return GuidanceCommand(params.G * lpn_term(los), _heading_to(los.dp))


def epn(los: LosState, params: GuidanceParams) -> GuidanceCommand:
    """LPN blended with a proportional approach term:

    a = G * ((1 - W) * (dp + dv * t_go) / t_go^2 + W * dp)
    """
    a = params.G * ((1.0 - params.W) * lpn_term(los) + params.W * los.dp)
    return GuidanceCommand(a, _heading_to(los.dp))


def gpn(los: LosState, params: GuidanceParams) -> GuidanceCommand:
    """PN plus closing-speed regulation:

    a = k1 * v_c * lam_rate * n + k2 * (r_rate - v_r) * L

    with L the unit LOS direction and n the unit vector perpendicular to it in
    the engagement plane.  The second term accelerates along the LOS until the
    range rate reaches the (negative) setpoint v_r, which keeps the law
    engaging even when PN's LOS-rate term vanishes.
    """
    L_hat = los.dp / los.r
    a = params.k2 * (los.r_rate - params.v_r) * L_hat
    if los.lam_rate >= _LAM_RATE_EPS:
        n = np.cross(los.omega, L_hat)
        norm = np.linalg.norm(n)
        if norm >= _LAM_RATE_EPS:
            a = a + params.k1 * los.v_c * los.lam_rate * (n / norm)
    return GuidanceCommand(a, _heading_to(los.dp))


LAWS = {"pp": pp, "pn": pn, "lpn": lpn, "epn": epn, "gpn": gpn}


def clamp_command(
    a_cmd: np.ndarray,
    v_int: np.ndarray,
    v_max: np.ndarray,
    a_max: np.ndarray,
    desired_heading: float = 0.0,
) -> GuidanceCommand:
    """Per-axis box clamp plus a velocity guard.

    Acceleration is clipped to +-a_max; on any axis already at or beyond its
    velocity limit, acceleration pushing further in that direction is zeroed.
    """
    v_max = np.asarray(v_max, dtype=float)
    a_max = np.asarray(a_max, dtype=float)
    if (v_max <= 0).any() or (a_max <= 0).any():
        raise ParameterError("limits must be positive")
    a = np.clip(np.asarray(a_cmd, dtype=float), -a_max, a_max)
    v = np.asarray(v_int, dtype=float)
    a = np.where((v >= v_max) & (a > 0), 0.0, a)
    a = np.where((v <= -v_max) & (a < 0), 0.0, a)
    return GuidanceCommand(np.asarray(a_cmd, dtype=float), desired_heading, a_limited=a)
