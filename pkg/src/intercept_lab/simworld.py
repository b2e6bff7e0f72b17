"""Closed-loop scenario engine.

One scenario couples a target playing back a trajectory with a point-mass
interceptor driven by a guidance law or the MPC planner.  The loop runs at a
fixed integration step; the detector fires at the sensor rate, the filter
consumes detections (predicting through gaps), and guidance runs at the
control rate on either the fused estimate or ground truth.  Interceptions are
registered when the target's center crosses the net disc carried below the
interceptor.

The integration loop is deliberately written with scalar locals: a full run
covers tens of thousands of steps and this keeps batch benchmarks fast.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ScenarioError
from .estimation import ImmBelief, TargetStateCA, imm_step, init_imm
from .guidance import LAWS, GuidanceCommand, GuidanceParams, clamp_command, los_state
from .mpc import MpcParams, MpcPlanner
from .numcore import Rotation3
from .reports import EstErrorSample, InterceptionEvent, RunReport
from .sensing import ObserverState, SensorNoiseParams, detect
from .trajlab import Trajectory

GRAVITY = 9.81
_TWO_PI = 2.0 * math.pi

METHODS = ("pp", "pn", "lpn", "gpn", "epn", "mpc")


@dataclass(frozen=True)
class InterceptorParams:
    """Point-mass interceptor with first-order acceleration lag and drag."""

    v_max: tuple = (8.0, 8.0, 4.0)
    a_max: tuple = (4.0, 4.0, 2.0)
    omega_heading_max: float = 2.0
    tau: float = 0.1            # acceleration lag time constant (s); 0 = none
    kappa: float = 0.2          # linear drag coefficient (1/s)
    sim_dt: float = 0.005
    control_rate: float = 20.0

    def __post_init__(self):
        if self.tau < 0 or self.kappa < 0 or self.sim_dt <= 0 or self.control_rate <= 0:
            raise ScenarioError("interceptor parameters out of range")


@dataclass
class InterceptorState:
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    heading: float = 0.0
    time: float = 0.0

    @classmethod
    def at_rest(cls, p, heading: float = 0.0) -> "InterceptorState":
        return cls(np.asarray(p, float), np.zeros(3), np.zeros(3), heading, 0.0)


@dataclass(frozen=True)
class NetGeometry:
    """Circular net plane carried below the interceptor."""

    radius: float = 2.0
    offset_below: float = 1.5
    rearm_time: float = 1.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ScenarioError("net radius must be positive")


@dataclass(frozen=True)
class ImmParams:
    """Filter configuration for scenario runs and tuning."""

    sigma_a: float = 1.0        # CV acceleration noise (m/s^2)
    sigma_j: float = 2.0        # CA jerk noise (m/s^3)
    p_switch: float = 0.05      # Markov off-diagonal
    accel_pin_var: float = 1e-4

    def transition(self) -> np.ndarray:
        p = self.p_switch
        return np.array([[1.0 - p, p], [p, 1.0 - p]])


@dataclass
class Scenario:
    """Full description of one run; a pure function of this plus the seed."""

    trajectory: Trajectory
    start: InterceptorState
    method: str = "epn"
    guidance: GuidanceParams = field(default_factory=GuidanceParams)
    mpc: MpcParams = field(default_factory=MpcParams)
    sensor: SensorNoiseParams = field(default_factory=SensorNoiseParams)
    filter: ImmParams = field(default_factory=ImmParams)
    interceptor: InterceptorParams = field(default_factory=InterceptorParams)
    net: NetGeometry = field(default_factory=NetGeometry)
    seed: int = 0
    duration: float = 100.0
    truth_feed: bool = True
    lost_timeout: float = 2.0
    sigma_t: float = 0.02       # observer translation noise stdev (m)
    aim_pocket: float = 0.45    # how far below the net rim the aim point sits (m)
    label: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.duration <= 0:
            raise ScenarioError("duration must be positive")
        if self.method not in METHODS:
            raise ScenarioError(f"unknown method {self.method!r}; choose from {METHODS}")


def step_interceptor(
    s: InterceptorState, cmd: GuidanceCommand, params: InterceptorParams, dt: float
) -> InterceptorState:
    """Advance the interceptor one step under the (already limited) command."""
    if dt <= 0:
        raise ContractError("dt must be positive")
    a_cmd = cmd.a_limited if cmd.a_limited is not None else cmd.a_cmd
    if params.tau > 0:
        a = s.a + (dt / params.tau) * (np.asarray(a_cmd, float) - s.a)
    else:
        a = np.asarray(a_cmd, dtype=float).copy()
    v_max = np.asarray(params.v_max, dtype=float)
    v = np.clip(s.v + (a - params.kappa * s.v) * dt, -v_max, v_max)
    p = s.p + v * dt
    err = _wrap_angle(cmd.desired_heading - s.heading)
    max_step = params.omega_heading_max * dt
    heading = s.heading + min(max(err, -max_step), max_step)
    return InterceptorState(p=p, v=v, a=a, heading=_wrap_angle(heading), time=s.time + dt)


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % _TWO_PI - math.pi


def check_interception(
    prev_rel: np.ndarray,
    cur_rel: np.ndarray,
    net: NetGeometry,
    last_event_time: float,
    now: float,
    dt: float = 0.0,
) -> InterceptionEvent | None:
    """Detect a crossing of the net plane between two relative samples.

    rel is target minus interceptor; the net plane sits at z = -offset_below
    in this frame.  The crossing is direction-agnostic and interpolated within
    the step, so fast relative motion cannot tunnel through undetected.
    """
    pz = float(prev_rel[2]) + net.offset_below
    cz = float(cur_rel[2]) + net.offset_below
    if pz * cz >= 0.0:
        return None
    s = pz / (pz - cz)
    cx = prev_rel[0] + s * (cur_rel[0] - prev_rel[0])
    cy = prev_rel[1] + s * (cur_rel[1] - prev_rel[1])
    accuracy = math.hypot(cx, cy)
    if accuracy > net.radius:
        return None
    t_event = now - (1.0 - s) * dt
    if t_event - last_event_time < net.rearm_time:
        return None
    return InterceptionEvent(time=t_event, accuracy=accuracy, crossing_point=(float(cx), float(cy), -net.offset_below))


def _scenario_config_echo(sc: Scenario) -> dict:
    return {
        "method": sc.method,
        "seed": sc.seed,
        "duration": sc.duration,
        "truth_feed": sc.truth_feed,
        "lost_timeout": sc.lost_timeout,
        "guidance": {
            "law": sc.guidance.law, "G": sc.guidance.G, "W": sc.guidance.W,
            "k1": sc.guidance.k1, "k2": sc.guidance.k2, "v_r": sc.guidance.v_r,
            "eps_v": sc.guidance.eps_v,
        },
        "mpc": {
            "N": sc.mpc.N, "dt": sc.mpc.dt,
            "W_e": np.asarray(sc.mpc.W_e).tolist(), "W_u": np.asarray(sc.mpc.W_u).tolist(),
        },
        "interceptor": {
            "v_max": list(sc.interceptor.v_max), "a_max": list(sc.interceptor.a_max),
            "omega_heading_max": sc.interceptor.omega_heading_max,
            "tau": sc.interceptor.tau, "kappa": sc.interceptor.kappa,
            "sim_dt": sc.interceptor.sim_dt, "control_rate": sc.interceptor.control_rate,
        },
        "net": {
            "radius": sc.net.radius, "offset_below": sc.net.offset_below,
            "rearm_time": sc.net.rearm_time,
        },
        "sensor": {
            "sigma_l": sc.sensor.sigma_l, "sigma_zeta3": sc.sensor.sigma_zeta3,
            "c_alpha": sc.sensor.c_alpha, "rate": sc.sensor.rate,
            "max_range": sc.sensor.max_range, "dropout_p": sc.sensor.dropout_p,
            "fov_azimuth_halfwidth": sc.sensor.fov_azimuth_halfwidth,
        },
        "filter": {
            "sigma_a": sc.filter.sigma_a, "sigma_j": sc.filter.sigma_j,
            "p_switch": sc.filter.p_switch, "accel_pin_var": sc.filter.accel_pin_var,
        },
        "start": {
            "p": sc.start.p.tolist(), "v": sc.start.v.tolist(), "heading": sc.start.heading,
        },
    }


def run_scenario(sc: Scenario) -> RunReport:
    """Run the closed detection-estimation-guidance loop; deterministic per seed."""
    ip = sc.interceptor
    dt = ip.sim_dt
    n_steps = int(round(sc.duration / dt))
    traj = sc.trajectory
    if traj.t0 > 0.0 or traj.t0 + traj.duration < sc.duration - 1e-9:
        raise ScenarioError(
            f"trajectory covers [{traj.t0}, {traj.t0 + traj.duration}] s "
            f"but the scenario needs [0, {sc.duration}] s"
        )

    # Target channels resampled onto the integration grid, then unpacked into
    # plain lists (fast indexing in the loop below).
    grid = np.arange(n_steps + 1) * dt
    ttimes = traj.times
    tpos = traj.positions
    tvel = traj.velocities()
    tacc = traj.accelerations()
    tx, ty, tz = (np.interp(grid, ttimes, tpos[:, k]).tolist() for k in range(3))
    tvx, tvy, tvz = (np.interp(grid, ttimes, tvel[:, k]).tolist() for k in range(3))
    tax, tay, taz = (np.interp(grid, ttimes, tacc[:, k]).tolist() for k in range(3))

    control_every = max(1, int(round(1.0 / (ip.control_rate * dt))))
    detect_every = max(1, int(round(1.0 / (sc.sensor.rate * dt))))
    filter_dt = detect_every * dt

    px, py, pz = (float(x) for x in sc.start.p)
    vx, vy, vz = (float(x) for x in sc.start.v)
    ax, ay, az = (float(x) for x in sc.start.a)
    heading = float(sc.start.heading)

    vmx, vmy, vmz = (float(x) for x in ip.v_max)
    amx, amy, amz = (float(x) for x in ip.a_max)
    k_lag = dt / ip.tau if ip.tau > 0 else 1.0
    kappa = ip.kappa
    heading_step = ip.omega_heading_max * dt

    offset = sc.net.offset_below
    # Guidance steers the net pocket (slightly below the rim plane) onto the
    # target: a settled capture rests inside the net instead of oscillating
    # across the rim, so repeated events require a genuine escape.
    aim = sc.net.offset_below + sc.aim_pocket
    law = LAWS[sc.method] if sc.method != "mpc" else None
    planner = MpcPlanner(sc.mpc) if sc.method == "mpc" else None
    gp = sc.guidance

    rng = np.random.default_rng(sc.seed)
    sigma_t_mat = sc.sigma_t**2 * np.eye(3)
    fov_enabled = sc.sensor.fov_azimuth_halfwidth is not None

    belief: ImmBelief | None = None
    belief_time = 0.0
    last_det_time = -math.inf
    prev_epoch_a = (ax, ay, az)
    prev_epoch_heading = heading
    have_epoch = False

    cax = cay = caz = 0.0      # held (limited) command
    des_heading = heading

    events: list[InterceptionEvent] = []
    est_samples: list[EstErrorSample] = []
    compute_times: list[float] = []
    last_event_time = -math.inf

    prev_rx = tx[0] - px
    prev_ry = ty[0] - py
    prev_rz = tz[0] - pz

    perf = _time.perf_counter

    for i in range(n_steps):
        t = i * dt

        # ------------------------------------------------ detection & filter
        if not sc.truth_feed and i % detect_every == 0:
            if have_epoch:
                omega = np.array([
                    abs(ay - prev_epoch_a[1]) / (GRAVITY * filter_dt),
                    abs(ax - prev_epoch_a[0]) / (GRAVITY * filter_dt),
                    abs(_wrap_angle(heading - prev_epoch_heading)) / filter_dt,
                ])
            else:
                omega = np.zeros(3)
            prev_epoch_a = (ax, ay, az)
            prev_epoch_heading = heading
            have_epoch = True
            obs = ObserverState(
                t=np.array([px, py, pz]),
                R_m=Rotation3.about_z(heading),
                omega=omega,
                Sigma_t=sigma_t_mat,
                heading=heading,
            )
            det = detect(t, np.array([tx[i], ty[i], tz[i]]), obs, sc.sensor, rng)
            if det is not None:
                if belief is None:
                    belief = init_imm(
                        det.z, det.Z, sc.filter.sigma_a, sc.filter.sigma_j, filter_dt,
                        transition=sc.filter.transition(),
                        accel_pin_var=sc.filter.accel_pin_var,
                    )
                else:
                    belief = imm_step(belief, det.z, det.Z, filter_dt)
                last_det_time = t
            elif belief is not None:
                belief = imm_step(belief, None, None, filter_dt)
            belief_time = t
            if belief is not None:
                f = belief.fused.mean
                est_samples.append(EstErrorSample(
                    time=t,
                    p_err=(f[0] - tx[i], f[1] - ty[i], f[2] - tz[i]),
                    v_err=(f[3] - tvx[i], f[4] - tvy[i], f[5] - tvz[i]),
                ))

        # ------------------------------------------------------------ control
        if i % control_every == 0:
            lost = (
                not sc.truth_feed
                and fov_enabled
                and (t - last_det_time) > sc.lost_timeout
            )
            if lost:
                # Brake to a stop and rotate in place to re-acquire.
                cax, cay, caz = (
                    min(max(-2.0 * vx, -amx), amx),
                    min(max(-2.0 * vy, -amy), amy),
                    min(max(-2.0 * vz, -amz), amz),
                )
                des_heading = _wrap_angle(heading + 1.0)
            else:
                if sc.truth_feed:
                    tgt = (tx[i], ty[i], tz[i] + aim, tvx[i], tvy[i], tvz[i],
                           tax[i], tay[i], taz[i])
                elif belief is not None:
                    f = belief.fused.mean
                    dtau = t - belief_time
                    tgt = (
                        f[0] + f[3] * dtau + 0.5 * f[6] * dtau * dtau,
                        f[1] + f[4] * dtau + 0.5 * f[7] * dtau * dtau,
                        f[2] + f[5] * dtau + 0.5 * f[8] * dtau * dtau + aim,
                        f[3] + f[6] * dtau, f[4] + f[7] * dtau, f[5] + f[8] * dtau,
                        f[6], f[7], f[8],
                    )
                else:
                    tgt = None
                if tgt is not None:
                    started = perf()
                    cmd = _guidance_command(
                        sc.method, law, planner, gp,
                        np.array([px, py, pz]), np.array([vx, vy, vz]), tgt,
                    )
                    compute_times.append(perf() - started)
                    if cmd is not None:
                        limited = clamp_command(
                            cmd.a_cmd, (vx, vy, vz), ip.v_max, ip.a_max, cmd.desired_heading
                        )
                        cax, cay, caz = (float(x) for x in limited.a_limited)
                        des_heading = cmd.desired_heading

        # ---------------------------------------------------------- integrate
        ax += k_lag * (cax - ax)
        ay += k_lag * (cay - ay)
        az += k_lag * (caz - az)
        vx += (ax - kappa * vx) * dt
        vy += (ay - kappa * vy) * dt
        vz += (az - kappa * vz) * dt
        if vx > vmx: vx = vmx
        elif vx < -vmx: vx = -vmx
        if vy > vmy: vy = vmy
        elif vy < -vmy: vy = -vmy
        if vz > vmz: vz = vmz
        elif vz < -vmz: vz = -vmz
        px += vx * dt
        py += vy * dt
        pz += vz * dt
        herr = des_heading - heading
        if herr > math.pi: herr -= _TWO_PI
        elif herr < -math.pi: herr += _TWO_PI
        if herr > heading_step: heading += heading_step
        elif herr < -heading_step: heading -= heading_step
        else: heading = des_heading
        if heading > math.pi: heading -= _TWO_PI
        elif heading < -math.pi: heading += _TWO_PI

        # -------------------------------------------------------- event check
        rx = tx[i + 1] - px
        ry = ty[i + 1] - py
        rz = tz[i + 1] - pz
        pzo = prev_rz + offset
        czo = rz + offset
        if pzo * czo < 0.0:
            s = pzo / (pzo - czo)
            cx_ = prev_rx + s * (rx - prev_rx)
            cy_ = prev_ry + s * (ry - prev_ry)
            accuracy = math.hypot(cx_, cy_)
            t_event = t + s * dt
            if accuracy <= sc.net.radius and t_event - last_event_time >= sc.net.rearm_time:
                events.append(InterceptionEvent(
                    time=t_event, accuracy=accuracy,
                    crossing_point=(cx_, cy_, -offset),
                ))
                last_event_time = t_event
        prev_rx, prev_ry, prev_rz = rx, ry, rz

    meta = dict(sc.label)
    meta.setdefault("method", sc.method)
    meta.setdefault("seed", sc.seed)
    return RunReport(
        meta=meta,
        config=_scenario_config_echo(sc),
        events=events,
        est_samples=est_samples,
        compute_times=compute_times,
    )


def _guidance_command(method, law, planner, gp, p_int, v_int, tgt):
    """Evaluate one guidance cycle; returns None to hold the previous command."""
    p_aim = np.array([tgt[0], tgt[1], tgt[2]])
    v_tgt = np.array([tgt[3], tgt[4], tgt[5]])
    if method == "mpc":
        x_tgt = TargetStateCA(p=p_aim, v=v_tgt, a=np.array([tgt[6], tgt[7], tgt[8]]))
        command, solution = planner.plan(p_int, v_int, x_tgt)
        if not solution.diagnostics.converged:
            return None
        return command
    try:
        los = los_state(p_int, v_int, p_aim, v_tgt, gp.eps_v)
    except ContractError:
        return None  # coincident with the aim point: hold
    return law(los, gp)


def draw_start(
    traj: Trajectory,
    rng: np.random.Generator,
    min_range: float = 3.0,
    max_range: float = 12.0,
    z_above: tuple = (12.0, 18.0),
) -> InterceptorState:
    """Random patrol start: horizontally near a random point of the target's
    path and well above it, so engagements descend onto the target.

    Anchoring inside the intruder's operating area (rather than far outside)
    exercises the near-collision-course geometry where zero-effort-miss
    guidance is slow to engage.
    """
    anchor = traj.positions[rng.integers(0, len(traj.positions))]
    azimuth = rng.uniform(0.0, _TWO_PI)
    rad = rng.uniform(min_range, max_range)
    dz = rng.uniform(z_above[0], z_above[1])
    p = anchor + np.array([rad * math.cos(azimuth), rad * math.sin(azimuth), dz])
    heading = math.atan2(anchor[1] - p[1], anchor[0] - p[0])
    return InterceptorState.at_rest(p, heading)
