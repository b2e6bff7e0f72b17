"""Target trajectory tooling: file format, statistics, and generators.

Trajectories are uniformly sampled position sequences; velocity and
acceleration channels are derived by central finite differences.  The random
generator builds Catmull-Rom splines through random waypoints, re-times them
with a smooth speed profile, and rejection-samples until the requested
statistics hold.  The lemniscate generator produces the constant-speed
figure-eight used for agility experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GenerationError, ParameterError, TrajectoryParseError

FILE_HEADER = "t,x,y,z"


@dataclass
class Trajectory:
    """Uniformly sampled target path."""

    t0: float
    dt: float
    positions: np.ndarray  # (n, 3)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.dt <= 0:
            raise ParameterError("trajectory dt must be positive")
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ParameterError("positions must be an (n, 3) array")
        if len(self.positions) < 3:
            raise ParameterError("a trajectory needs at least 3 samples")
        if not np.isfinite(self.positions).all():
            raise ParameterError("positions must be finite")

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def duration(self) -> float:
        return (len(self.positions) - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.positions))

    def velocities(self) -> np.ndarray:
        """Central-difference velocities (one-sided at the ends)."""
        return np.gradient(self.positions, self.dt, axis=0)

    def accelerations(self) -> np.ndarray:
        """Second central differences (endpoints copy their neighbors)."""
        p = self.positions
        a = np.empty_like(p)
        a[1:-1] = (p[2:] - 2.0 * p[1:-1] + p[:-2]) / (self.dt * self.dt)
        a[0] = a[1]
        a[-1] = a[-2]
        return a


@dataclass(frozen=True)
class TrajStats:
    mean_speed: float
    max_speed: float
    mean_accel: float
    max_accel: float
    duration: float
    extents: np.ndarray


def stats(tr: Trajectory) -> TrajStats:
    """Speed/acceleration statistics over the interior samples."""
    v = np.linalg.norm(tr.velocities()[1:-1], axis=1)
    a = np.linalg.norm(tr.accelerations()[1:-1], axis=1)
    box = tr.positions.max(axis=0) - tr.positions.min(axis=0)
    return TrajStats(
        mean_speed=float(v.mean()),
        max_speed=float(v.max()),
        mean_accel=float(a.mean()),
        max_accel=float(a.max()),
        duration=tr.duration,
        extents=box,
    )


def gen_lemniscate(
    width: float, length: float, speed: float, duration: float = 100.0, dt: float = 0.02
) -> Trajectory:
    """Constant-speed figure-eight spanning a length x width box.

    A Gerono-style eight (long axis `length`, crossing at the center) is
    re-parameterized by arc length so the sampled speed is uniform.
    """
    if min(width, length, speed, duration, dt) <= 0:
        raise ParameterError("lemniscate arguments must be positive")
    a = 0.5 * length
    b = 0.5 * width

    def curve(u):
        return np.stack([a * np.sin(u), b * np.sin(2.0 * u), np.zeros_like(u)], axis=-1)

    m = 200_000
    u_grid = np.linspace(0.0, 2.0 * math.pi, m + 1)
    pts = curve(u_grid)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s_grid = np.concatenate([[0.0], np.cumsum(seg)])
    total = s_grid[-1]
    n = int(round(duration / dt)) + 1
    s = (speed * dt * np.arange(n)) % total
    u = np.interp(s, s_grid, u_grid)
    return Trajectory(t0=0.0, dt=dt, positions=curve(u))


@dataclass(frozen=True)
class RandomTrajSpec:
    """Targets and caps for the random trajectory generator."""

    duration: float = 100.0
    arena: np.ndarray = field(default_factory=lambda: np.array([50.0, 50.0, 6.0]))
    center: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 8.0]))
    mean_speed: float = 4.1
    max_speed: float = 8.0
    max_accel: float = 11.0
    dt: float = 0.02
    speed_tolerance: float = 0.15


class _CatmullRom:
    """Centripetal Catmull-Rom spline through waypoints (Hermite form).

    The centripetal knot spacing (chord length to the power 1/2) avoids the
    cusps and loops the uniform variant develops between irregular waypoints.
    Evaluated at the knot parameter u in [0, u_max].
    """

    def __init__(self, waypoints: np.ndarray):
        w = np.asarray(waypoints, dtype=float)
        chord = np.sqrt(np.linalg.norm(np.diff(w, axis=0), axis=1))
        knots = np.concatenate([[0.0], np.cumsum(chord)])
        slopes = np.diff(w, axis=0) / np.diff(knots)[:, None]
        m = np.empty_like(w)
        dk = np.diff(knots)
        m[0] = slopes[0]
        m[-1] = slopes[-1]
        m[1:-1] = (slopes[:-1] * dk[1:, None] + slopes[1:] * dk[:-1, None]) / (
            dk[:-1] + dk[1:]
        )[:, None]
        self.knots = knots
        self.points = w
        self.tangents = m
        self.u_max = float(knots[-1])

    def eval(self, u: np.ndarray) -> np.ndarray:
        u = np.clip(np.asarray(u, dtype=float), 0.0, self.u_max)
        i = np.clip(np.searchsorted(self.knots, u, side="right") - 1, 0, len(self.knots) - 2)
        h = (self.knots[i + 1] - self.knots[i])[:, None]
        s = ((u - self.knots[i])[:, None]) / h
        p0, p1 = self.points[i], self.points[i + 1]
        m0, m1 = self.tangents[i] * h, self.tangents[i + 1] * h
        s2, s3 = s * s, s * s * s
        return (
            (2 * s3 - 3 * s2 + 1) * p0
            + (s3 - 2 * s2 + s) * m0
            + (-2 * s3 + 3 * s2) * p1
            + (s3 - s2) * m1
        )


def _draw_waypoints(rng: np.random.Generator, spec: RandomTrajSpec, need: float) -> np.ndarray:
    """Waypoints uniform in the arena with bounded turn angles and chord lengths.

    Bounding the turn keeps spline curvature moderate so that the acceleration
    cap is met with a useful acceptance rate; the stats gate stays the arbiter.
    """
    half = 0.5 * spec.arena
    lo, hi = 0.30 * float(half[:2].min()), 0.75 * float(half[:2].min())
    pts = [spec.center + rng.uniform(-1.0, 1.0, 3) * half]
    length = 0.0
    while length < need or len(pts) < 4:
        for _ in range(200):
            cand = spec.center + rng.uniform(-1.0, 1.0, 3) * half
            chord = cand - pts[-1]
            dist = float(np.linalg.norm(chord))
            if not lo <= dist <= hi:
                continue
            if len(pts) >= 2:
                prev = pts[-1] - pts[-2]
                cosang = float(prev @ chord) / (np.linalg.norm(prev) * dist)
                if cosang < 0.25:  # turn sharper than ~75 degrees
                    continue
            pts.append(cand)
            length += dist
            break
        else:
            # arena too constrained from this corner; restart the walk
            pts = [spec.center + rng.uniform(-1.0, 1.0, 3) * half]
            length = 0.0
    return np.asarray(pts)


def _speed_profile(rng: np.random.Generator, spec: RandomTrajSpec, n: int) -> np.ndarray:
    """Smooth positive speed profile around the mean with bounded excursions."""
    t = spec.dt * np.arange(n)
    wiggle = np.zeros(n)
    for _ in range(3):
        amp = rng.uniform(0.1, 0.25)
        freq = rng.uniform(0.01, 0.06)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        wiggle += amp * np.sin(2.0 * math.pi * freq * t + phase)
    factor = np.clip(1.0 + wiggle, 0.25, 1.8)
    prof = spec.mean_speed * factor
    # renormalize so the average speed is on target before rejection
    return prof * (spec.mean_speed / prof.mean())


def gen_random(seed: int, spec: RandomTrajSpec = RandomTrajSpec()) -> Trajectory:
    """Random smooth trajectory honoring the spec's speed/acceleration caps.

    Deterministic per seed; raises GenerationError after 100 rejected draws.
    """
    if spec.mean_speed == 0.0:
        rng = np.random.default_rng(seed)
        n = int(round(spec.duration / spec.dt)) + 1
        point = spec.center + rng.uniform(-0.5, 0.5, 3) * spec.arena
        return Trajectory(0.0, spec.dt, np.tile(point, (n, 1)))
    if spec.mean_speed < 0 or spec.max_speed < spec.mean_speed:
        raise ParameterError("need 0 <= mean_speed <= max_speed")

    rng = np.random.default_rng(seed)
    n = int(round(spec.duration / spec.dt)) + 1
    half = 0.5 * spec.arena
    rejections = []
    for attempt in range(100):
        profile = _speed_profile(rng, spec, n)
        arc_target = np.concatenate([[0.0], np.cumsum(profile[:-1]) * spec.dt])
        need = arc_target[-1] * 1.15
        waypoints = _draw_waypoints(rng, spec, need)
        spline = _CatmullRom(waypoints)
        u_grid = np.linspace(0.0, spline.u_max, 128 * len(waypoints) + 1)
        dense = spline.eval(u_grid)
        seg = np.linalg.norm(np.diff(dense, axis=0), axis=1)
        s_grid = np.concatenate([[0.0], np.cumsum(seg)])
        if s_grid[-1] < arc_target[-1]:
            rejections.append("spline shorter than required arc length")
            continue
        u_samples = np.interp(arc_target, s_grid, u_grid)
        tr = Trajectory(0.0, spec.dt, spline.eval(u_samples))
        st = stats(tr)
        ok = (
            abs(st.mean_speed - spec.mean_speed) <= spec.speed_tolerance * spec.mean_speed
            and st.max_speed <= spec.max_speed
            and st.max_accel <= spec.max_accel
        )
        if ok:
            return tr
        rejections.append(
            f"attempt {attempt}: mean_speed={st.mean_speed:.2f} max_speed={st.max_speed:.2f} "
            f"max_accel={st.max_accel:.2f}"
        )
    raise GenerationError(
        "exhausted 100 generation attempts; last rejections: " + "; ".join(rejections[-3:])
    )


def save(tr: Trajectory, path) -> None:
    """Write the plain-text `t,x,y,z` format (full float precision)."""
    lines = [FILE_HEADER]
    for i, row in enumerate(tr.positions):
        t = tr.t0 + i * tr.dt
        lines.append(f"{t!r},{row[0]!r},{row[1]!r},{row[2]!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load(path) -> Trajectory:
    """Parse a trajectory file; raises TrajectoryParseError naming the bad row."""
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip().lower() != FILE_HEADER:
        raise TrajectoryParseError(f"{path}: missing '{FILE_HEADER}' header")
    if len(lines) == 1:
        raise TrajectoryParseError(f"{path}: no samples")
    times = []
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 4:
            raise TrajectoryParseError(f"{path}:{i}: expected 4 comma-separated values")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise TrajectoryParseError(f"{path}:{i}: non-numeric value") from None
        times.append(vals[0])
        rows.append(vals[1:])
    if len(rows) < 3:
        raise TrajectoryParseError(f"{path}: need at least 3 samples, got {len(rows)}")
    dt = times[1] - times[0]
    if dt <= 0:
        raise TrajectoryParseError(f"{path}:3: non-increasing time column")
    for i in range(1, len(times)):
        if abs(times[i] - times[i - 1] - dt) > 1e-6:
            raise TrajectoryParseError(f"{path}:{i + 2}: non-uniform time step")
    return Trajectory(t0=times[0], dt=dt, positions=np.asarray(rows))


def bundled_trajectory_paths() -> list[Path]:
    """The small generated dataset shipped with the package (for tests/demos)."""
    data_dir = Path(__file__).parent / "data" / "trajectories"
    return sorted(data_dir.glob("*.csv"))
