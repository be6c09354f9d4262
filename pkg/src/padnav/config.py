"""Flat key=value configuration for the pipeline and scenario files.

Lines are `key=value`; '#' starts a comment; unknown keys are rejected so
typos fail loudly. All keys are optional and fall back to the documented
defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

from .detector import PatternSpec
from .pipeline import PipelineSettings
from .pose import CalibrationTable, CameraGeom, default_calibration
from .sim import Scenario, moving_scenario, static_scenario
from .thresholding import ThresholdConfig


class ConfigError(ValueError):
    """A configuration file is malformed or references a missing file."""


def parse_kv(text: str) -> dict[str, str]:
    """Parse flat key=value text; later keys override earlier ones."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


@dataclass
class PipelineConfig:
    """Loaded pipeline configuration: settings plus the calibration table."""

    settings: PipelineSettings
    calibration: CalibrationTable
    calibration_path: str | None = None


_THRESHOLD_KEYS = {
    "threshold.initial": ("initial_t", int),
    "threshold.accept_window": ("accept_window", int),
    "threshold.loss_trigger": ("loss_trigger", int),
    "threshold.range_half_width": ("initial_half_width", int),
    "threshold.step": ("initial_step", int),
    "threshold.max_sweeps": ("max_sweeps", int),
}
_PATTERN_KEYS = {
    "pattern.outer_side_m": ("outer_side_m", float),
    "pattern.ratio_tolerance": ("ratio_tolerance", float),
}
_PIPELINE_KEYS = {
    "pipeline.blur_sigma": ("blur_sigma", float),
    "pipeline.dp_tol_frac": ("dp_tol_frac", float),
    "pipeline.dp_tol_min_px": ("dp_tol_min_px", float),
}
_CAMERA_KEYS = {
    "camera.width": ("width", int),
    "camera.height": ("height", int),
}


def load_config(path: str | Path | None = None) -> PipelineConfig:
    """Load a pipeline config file, or the defaults when path is None.

    The calibration file named by calibration.path (resolved relative to the
    config file) must exist; without the key the packaged default table is
    used.
    """
    kv: dict[str, str] = {}
    base = Path(".")
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        kv = parse_kv(p.read_text())
        base = p.parent

    threshold_args = {}
    pattern_args = {}
    pipeline_args = {}
    camera_args = {}
    calibration_path = None
    for key, value in kv.items():
        if key in _THRESHOLD_KEYS:
            name, cast = _THRESHOLD_KEYS[key]
            threshold_args[name] = cast(value)
        elif key in _PATTERN_KEYS:
            name, cast = _PATTERN_KEYS[key]
            pattern_args[name] = cast(value)
        elif key in _PIPELINE_KEYS:
            name, cast = _PIPELINE_KEYS[key]
            pipeline_args[name] = cast(value)
        elif key in _CAMERA_KEYS:
            name, cast = _CAMERA_KEYS[key]
            camera_args[name] = cast(value)
        elif key == "calibration.path":
            calibration_path = value
        else:
            raise ConfigError(f"unknown config key {key!r}")

    if pattern_args.get("outer_side_m", 0.38) != 0.38:
        side = pattern_args["outer_side_m"]
        from .detector import _default_sides

        tri1, tri2 = _default_sides(side)
        pattern_args.update(tri1_side_m=tri1, tri2_side_m=tri2)
    spec = PatternSpec(**pattern_args)
    settings = PipelineSettings(
        spec=spec,
        threshold=ThresholdConfig(**threshold_args),
        cam_geom=CameraGeom(**camera_args),
        **pipeline_args,
    )
    if calibration_path is not None:
        cal_file = (base / calibration_path).resolve()
        if not cal_file.exists():
            raise ConfigError(f"calibration file not found: {cal_file}")
        calibration = CalibrationTable.load(cal_file)
        return PipelineConfig(settings, calibration, str(cal_file))
    return PipelineConfig(settings, default_calibration(), None)


_SCENARIO_CASTS = {
    "duration": ("duration_s", float),
    "frame_rate": ("frame_rate", float),
    "seed": ("seed", int),
    "uav.yaw_deg": ("uav_yaw", lambda v: math.radians(float(v))),
    "platform.speed_kmh": ("platform_speed_kmh", float),
    "platform.direction_deg": ("platform_direction_deg", float),
    "wind.sigma": ("wind_sigma", float),
    "background": ("background", int),
    "tau": ("tau", float),
}
_SCENARIO_CONTROLLER = {
    "controller.k_xy": "k_xy",
    "controller.v_max": "v_max",
    "controller.k_z": "k_z",
    "controller.vz_max": "vz_max",
    "controller.track_height": "track_height",
    "controller.r_descend": "r_descend",
    "controller.n_hold": "n_hold",
    "controller.v_z1": "v_z1",
    "controller.h_final": "h_final",
    "controller.v_z2": "v_z2",
    "controller.ff_gain": "ff_gain",
}
_SCENARIO_CAMERA = {
    "camera.focal_px": ("focal_px", float),
    "camera.k1": ("k1", float),
    "camera.width": ("width", int),
    "camera.height": ("height", int),
}


def load_scenario(source: str | Path) -> Scenario:
    """Load a scenario: 'static', 'moving', or a key=value file path."""
    if str(source) == "static":
        return static_scenario()
    if str(source) == "moving":
        return moving_scenario()
    p = Path(source)
    if not p.exists():
        raise ConfigError(f"scenario file not found: {p}")
    kv = parse_kv(p.read_text())
    base = kv.pop("preset", "static")
    scenario = moving_scenario() if base == "moving" else static_scenario()

    controller_args: dict[str, float] = {}
    camera_args: dict[str, float | int] = {}
    for key, value in kv.items():
        if key in _SCENARIO_CASTS:
            name, cast = _SCENARIO_CASTS[key]
            setattr(scenario, name, cast(value))
        elif key == "uav.start":
            parts = [float(v) for v in value.split(",")]
            if len(parts) != 3:
                raise ConfigError("uav.start needs x,y,z")
            scenario.uav_start = tuple(parts)
        elif key in _SCENARIO_CONTROLLER:
            controller_args[_SCENARIO_CONTROLLER[key]] = (
                int(value) if _SCENARIO_CONTROLLER[key] == "n_hold" else float(value)
            )
        elif key in _SCENARIO_CAMERA:
            name, cast = _SCENARIO_CAMERA[key]
            camera_args[name] = cast(value)
        elif key == "calibration.heights":
            scenario.calibration_heights = tuple(float(v) for v in value.split(","))
        elif key == "calibration.d_px":
            scenario.calibration_d_px = float(value)
        else:
            raise ConfigError(f"unknown scenario key {key!r}")
    if controller_args:
        scenario.controller = replace(scenario.controller, **controller_args)
    if camera_args:
        scenario.camera = replace(scenario.camera, **camera_args)
    # re-validate the possibly-updated start position
    Scenario.__post_init__(scenario)
    return scenario
