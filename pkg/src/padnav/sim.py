"""Closed-loop landing simulation against a static or moving platform.

Every simulated frame renders the pad from the true relative geometry, runs
the full vision pipeline on the rendered image, feeds the estimated pose to
a phased velocity controller, and integrates first-order vehicle kinematics.
Runs are deterministic for a given scenario and seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .detector import PatternSpec
from .pipeline import FrameProcessor, PipelineSettings
from .pose import CalibrationRangeError, CameraGeom, PoseEstimate
from .scenegen import CameraModel, build_landmark, render_frame, synthesize_calibration
from .thresholding import ThresholdConfig

PHASES = ("search", "hover", "track", "descend", "landed", "lost")


@dataclass(frozen=True)
class UavState:
    """Vehicle state in world coordinates (z up, platform plane at z = 0)."""

    position: np.ndarray
    yaw: float
    velocity: np.ndarray
    phase: str = "search"


@dataclass
class PlatformState:
    position: np.ndarray
    velocity: np.ndarray


@dataclass(frozen=True)
class ControllerConfig:
    """Gains and limits of the phased landing controller.

    The horizontal loop is proportional on the estimated world offset plus a
    platform-velocity feedforward obtained by low-pass differencing the
    vision-derived platform position (a pure proportional loop cannot hold a
    fast platform in frame). Descent switches to the fast final drop below
    h_final and stays committed to it even across brief detection gaps.
    """

    k_xy: float = 0.8
    v_max: float = 6.0
    k_z: float = 0.8
    vz_max: float = 0.6
    track_height: float = 2.5
    r_descend: float = 0.15
    n_hold: int = 15
    v_z1: float = 0.4
    h_final: float = 0.3
    v_z2: float = 1.2
    v_abort: float = 0.5
    ff_gain: float = 0.25


class Controller:
    """Phase machine emitting velocity commands from pose estimates."""

    def __init__(self, config: ControllerConfig, dt: float):
        self.config = config
        self.dt = dt
        self.hold_count = 0
        self.v_ff = np.zeros(2)
        self.committed = False
        self._last_platform_xy: np.ndarray | None = None

    def _update_feedforward(self, pose: PoseEstimate, uav_xy: np.ndarray) -> None:
        platform_xy = uav_xy - np.array([pose.x_w, pose.y_w])
        if self._last_platform_xy is not None:
            raw = (platform_xy - self._last_platform_xy) / self.dt
            self.v_ff += self.config.ff_gain * (raw - self.v_ff)
        self._last_platform_xy = platform_xy

    def _horizontal(self, pose: PoseEstimate | None) -> np.ndarray:
        cfg = self.config
        cmd = self.v_ff.copy()
        if pose is not None:
            cmd -= cfg.k_xy * np.array([pose.x_w, pose.y_w])
        norm = float(np.linalg.norm(cmd))
        if norm > cfg.v_max:
            cmd *= cfg.v_max / norm
        return cmd

    def update(
        self, pose: PoseEstimate | None, uav_xy: np.ndarray, phase: str
    ) -> tuple[np.ndarray, str]:
        """One control step; returns (velocity command, next phase)."""
        cfg = self.config
        if pose is not None:
            self._update_feedforward(pose, uav_xy)

        if phase == "landed":
            return np.zeros(3), "landed"
        if phase == "lost":
            return np.array([0.0, 0.0, cfg.v_abort]), "lost"

        if phase in ("search", "hover"):
            if pose is None:
                cmd_xy = self.v_ff if phase == "hover" else np.zeros(2)
                return np.array([cmd_xy[0], cmd_xy[1], 0.0]), phase
            self.hold_count = 0
            phase = "track"

        if phase == "track":
            if pose is None:
                return np.array([self.v_ff[0], self.v_ff[1], 0.0]), "hover"
            err = math.hypot(pose.x_w, pose.y_w)
            self.hold_count = self.hold_count + 1 if err < cfg.r_descend else 0
            cmd_xy = self._horizontal(pose)
            vz = float(np.clip(cfg.k_z * (cfg.track_height - pose.h), -cfg.vz_max, cfg.vz_max))
            if self.hold_count >= cfg.n_hold:
                return np.array([cmd_xy[0], cmd_xy[1], -cfg.v_z1]), "descend"
            return np.array([cmd_xy[0], cmd_xy[1], vz]), "track"

        # descend
        if pose is None:
            if not self.committed:
                self.hold_count = 0
                return np.array([self.v_ff[0], self.v_ff[1], 0.0]), "hover"
            return np.array([self.v_ff[0], self.v_ff[1], -cfg.v_z2]), "descend"
        if pose.h < cfg.h_final:
            self.committed = True
        cmd_xy = self._horizontal(pose)
        vz = -cfg.v_z2 if self.committed else -cfg.v_z1
        return np.array([cmd_xy[0], cmd_xy[1], vz]), "descend"


def step(uav: UavState, cmd: np.ndarray, dt: float, tau: float = 0.5) -> UavState:
    """First-order velocity tracking toward cmd, then position integration.

    Altitude clamps at the platform plane (z = 0).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    decay = math.exp(-dt / tau)
    velocity = np.asarray(cmd, dtype=np.float64) + (uav.velocity - cmd) * decay
    position = uav.position + velocity * dt
    if position[2] <= 0.0:
        position = position.copy()
        position[2] = 0.0
    return replace(uav, position=position, velocity=velocity)


_DEFAULT_CAL_HEIGHTS = (0.15, 0.22, 0.3, 0.42, 0.6, 0.85, 1.2, 1.7, 2.4, 3.2)


@dataclass
class Scenario:
    """Everything that defines one landing run."""

    name: str = "static"
    duration_s: float = 40.0
    frame_rate: float = 30.0
    seed: int = 0
    uav_start: tuple[float, float, float] = (1.0, 0.8, 2.6)
    uav_yaw: float = 0.0
    platform_speed_kmh: float = 0.0
    platform_direction_deg: float = 0.0
    wind_sigma: float = 0.0  # rms of band-limited horizontal accel noise, m/s^2
    background: int = 200
    tau: float = 0.5
    camera: CameraModel = field(default_factory=lambda: CameraModel(focal_px=400.0))
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    threshold: ThresholdConfig = field(default_factory=ThresholdConfig)
    spec: PatternSpec = field(default_factory=PatternSpec)
    calibration_heights: tuple[float, ...] = _DEFAULT_CAL_HEIGHTS
    calibration_d_px: float = 100.0

    def __post_init__(self):
        if self.frame_rate <= 0:
            raise ValueError("frame rate must be positive")
        x, y, z = self.uav_start
        if z > 3.0 or math.hypot(x, y) > max(z, 0.1):
            raise ValueError("initial position must lie inside the approach cone")


def static_scenario(**overrides) -> Scenario:
    return Scenario(name="static", **overrides)


def moving_scenario(**overrides) -> Scenario:
    defaults = dict(
        name="moving",
        platform_speed_kmh=13.5,
        uav_start=(0.9, 0.5, 2.6),
        uav_yaw=0.35,
    )
    defaults.update(overrides)
    return Scenario(**defaults)


@dataclass
class TraceRecord:
    """One logged frame of a run; pose fields are None when unavailable."""

    t: float
    x_w: float | None
    y_w: float | None
    h: float | None
    theta_w: float | None
    true_dx: float
    true_dy: float
    true_h: float
    cmd_vx: float
    cmd_vy: float
    cmd_vz: float
    phase: str
    threshold: int


@dataclass
class Outcome:
    result: str  # landed | lost | timeout
    t: float
    touchdown_offset: float | None = None
    touchdown_speed: float | None = None

    def summary(self) -> str:
        parts = [f"outcome={self.result}", f"t={self.t:.2f}"]
        if self.touchdown_offset is not None:
            parts.append(f"offset={self.touchdown_offset:.3f}")
        if self.touchdown_speed is not None:
            parts.append(f"rel_speed={self.touchdown_speed:.3f}")
        return " ".join(parts)


TRACE_HEADER = "t,x_w,y_w,h,theta_w,true_dx,true_dy,true_h,cmd_vx,cmd_vy,cmd_vz,phase,threshold"


def write_trace(records: list[TraceRecord], path: str | Path) -> None:
    """CSV trace; absent pose fields serialize as empty columns."""

    def fmt(v: float | None) -> str:
        return "" if v is None else f"{v:.6f}"

    lines = [TRACE_HEADER]
    for r in records:
        lines.append(
            ",".join(
                [
                    f"{r.t:.4f}",
                    fmt(r.x_w),
                    fmt(r.y_w),
                    fmt(r.h),
                    fmt(r.theta_w),
                    f"{r.true_dx:.6f}",
                    f"{r.true_dy:.6f}",
                    f"{r.true_h:.6f}",
                    f"{r.cmd_vx:.6f}",
                    f"{r.cmd_vy:.6f}",
                    f"{r.cmd_vz:.6f}",
                    r.phase,
                    str(r.threshold),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def _rot2(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def run(scenario: Scenario) -> tuple[list[TraceRecord], Outcome]:
    """Simulate one landing run; returns the per-frame trace and the outcome."""
    rng = np.random.default_rng(scenario.seed)
    dt = 1.0 / scenario.frame_rate
    lm = build_landmark(scenario.spec)
    calibration = synthesize_calibration(
        scenario.camera,
        lm,
        scenario.calibration_heights,
        scenario.calibration_d_px,
        scenario.spec,
        background=scenario.background,
    )
    settings = PipelineSettings(
        spec=scenario.spec,
        threshold=scenario.threshold,
        cam_geom=CameraGeom(scenario.camera.width, scenario.camera.height),
    )
    processor = FrameProcessor(settings, calibration)
    controller = Controller(scenario.controller, dt)

    uav = UavState(
        position=np.array(scenario.uav_start, dtype=np.float64),
        yaw=scenario.uav_yaw,
        velocity=np.zeros(3),
        phase="search",
    )
    direction = math.radians(scenario.platform_direction_deg)
    speed = scenario.platform_speed_kmh / 3.6
    platform = PlatformState(
        position=np.zeros(3),
        velocity=np.array([speed * math.cos(direction), speed * math.sin(direction), 0.0]),
    )
    platform_yaw = direction

    wind_accel = np.zeros(2)
    wind_tau = 1.0
    wind_decay = math.exp(-dt / wind_tau)
    wind_scale = scenario.wind_sigma * math.sqrt(1.0 - wind_decay**2)

    trace: list[TraceRecord] = []
    n_frames = int(round(scenario.duration_s * scenario.frame_rate))
    outcome: Outcome | None = None

    for k in range(n_frames):
        t = k * dt
        rel = uav.position - platform.position
        cam_xy = _rot2(-platform_yaw) @ rel[:2]
        cam_k = replace(
            scenario.camera,
            position=(float(cam_xy[0]), float(cam_xy[1]), float(rel[2])),
            yaw=uav.yaw - platform_yaw,
            pitch=0.0,
            roll=0.0,
        )
        img, _ = render_frame(lm, cam_k, background=scenario.background)
        report = processor.process(img, alpha=uav.yaw)

        pose = report.pose
        if pose is None and report.detection is not None and report.height_out_of_range:
            pose = _clamped_pose(report, settings, calibration, uav.yaw)

        phase = uav.phase
        if processor.state.lost and phase not in ("landed",):
            phase = "lost"
        cmd, next_phase = controller.update(pose, uav.position[:2], phase)

        trace.append(
            TraceRecord(
                t=t,
                x_w=pose.x_w if pose else None,
                y_w=pose.y_w if pose else None,
                h=pose.h if pose else None,
                theta_w=pose.theta_w if pose else None,
                true_dx=float(rel[0]),
                true_dy=float(rel[1]),
                true_h=float(rel[2]),
                cmd_vx=float(cmd[0]),
                cmd_vy=float(cmd[1]),
                cmd_vz=float(cmd[2]),
                phase=next_phase,
                threshold=report.threshold_used,
            )
        )

        if next_phase == "lost":
            outcome = Outcome(result="lost", t=t)
            break

        if scenario.wind_sigma > 0.0:
            wind_accel = wind_accel * wind_decay + wind_scale * rng.standard_normal(2)
        uav = step(replace(uav, phase=next_phase), cmd, dt, scenario.tau)
        if scenario.wind_sigma > 0.0:
            v = uav.velocity.copy()
            v[:2] += wind_accel * dt
            uav = replace(uav, velocity=v)
        platform.position = platform.position + platform.velocity * dt

        if uav.position[2] <= 0.0 and next_phase == "descend":
            offset = float(np.linalg.norm(uav.position[:2] - platform.position[:2]))
            rel_speed = float(np.linalg.norm(uav.velocity - platform.velocity))
            uav = replace(uav, phase="landed")
            outcome = Outcome(
                result="landed",
                t=t + dt,
                touchdown_offset=offset,
                touchdown_speed=rel_speed,
            )
            break

    if outcome is None:
        outcome = Outcome(result="timeout", t=n_frames * dt)
    return trace, outcome


def _clamped_pose(report, settings, calibration, alpha) -> PoseEstimate | None:
    """Rebuild the pose with the height clamped to the calibrated span."""
    from .pose import (
        heading_deviation,
        interpolate_height,
        metric_offset,
        pixel_offset,
        rescale_partial,
        world_offset,
    )

    det = report.detection
    l_p = det.l_pmax
    if det.partial:
        l_p = rescale_partial(l_p, settings.spec)
    e_x, e_y, e_o = pixel_offset(det.landmark_center, settings.cam_geom)
    x_c, y_c = metric_offset(e_x, e_y, l_p, settings.spec.tri1_side_m)
    x_w, y_w = world_offset(x_c, y_c, alpha)
    theta_w = None
    if det.square_center is not None:
        try:
            theta_w = heading_deviation(det.tri_center, det.square_center)
        except ValueError:
            theta_w = None
    try:
        h = interpolate_height(l_p, calibration, e_o)
    except CalibrationRangeError as err:
        h = err.nearest_height
    return PoseEstimate(
        x_w=x_w, y_w=y_w, h=h, theta_w=theta_w, e_o=e_o, l_c=math.hypot(x_c, y_c)
    )
