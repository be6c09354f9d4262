"""Relative position, heading, and height from a matched landing pad.

The chain is: pixel offset of the pad center from the image center, metric
conversion through the known real triangle side, rotation into the world
frame by the vehicle yaw, heading deviation from the triangle-to-square
arrow, and height by linear interpolation in a measured height-versus-pixel-
length calibration table with an offset-dependent length correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .detector import Detection, PatternSpec


@dataclass(frozen=True)
class CameraGeom:
    """Image frame geometry; the image center is the reference for offsets."""

    width: int = 640
    height: int = 480

    @property
    def image_center(self) -> tuple[float, float]:
        return self.width / 2.0, self.height / 2.0


class CalibrationError(ValueError):
    """A calibration table could not be built or parsed."""


class CalibrationRangeError(ValueError):
    """Queried pixel length falls outside the calibrated span.

    Carries the nearest table bound so callers can clamp or reject.
    """

    def __init__(self, l_pmax: float, nearest_length: float, nearest_height: float):
        super().__init__(
            f"pixel length {l_pmax:.3f} outside calibrated span; "
            f"nearest bound {nearest_length:.3f} px at height {nearest_height:.3f} m"
        )
        self.l_pmax = l_pmax
        self.nearest_length = nearest_length
        self.nearest_height = nearest_height


@dataclass(frozen=True)
class CalibrationTable:
    """Heights with centered (l1) and offset-by-d (l2) measured pixel lengths."""

    heights: np.ndarray
    l1: np.ndarray
    l2: np.ndarray
    d_px: float

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=np.float64)
        l1 = np.asarray(self.l1, dtype=np.float64)
        l2 = np.asarray(self.l2, dtype=np.float64)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "l1", l1)
        object.__setattr__(self, "l2", l2)
        if len(h) < 2 or len(l1) != len(h) or len(l2) != len(h):
            raise CalibrationError("table needs at least two aligned rows")
        if self.d_px <= 0:
            raise CalibrationError("offset distance must be positive")
        if np.any(h <= 0) or np.any(l1 <= 0) or np.any(l2 <= 0):
            raise CalibrationError("heights and lengths must be positive")
        if np.any(np.diff(h) <= 0):
            raise CalibrationError("heights must be strictly increasing")
        if np.any(np.diff(l1) >= 0) or np.any(np.diff(l2) >= 0):
            raise CalibrationError("pixel lengths must strictly decrease with height")

    def to_text(self) -> str:
        lines = [f"D={self.d_px:g}"]
        for h, a, b in zip(self.heights, self.l1, self.l2):
            lines.append(f"{h:g} {a:g} {b:g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CalibrationTable":
        d_px = None
        rows = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.upper().startswith("D="):
                d_px = float(line[2:])
                continue
            parts = line.split()
            if len(parts) != 3:
                raise CalibrationError(f"line {lineno}: expected 'H L1 L2', got {raw!r}")
            rows.append([float(p) for p in parts])
        if d_px is None:
            raise CalibrationError("missing 'D=<pixels>' header line")
        if len(rows) < 2:
            raise CalibrationError("table needs at least two rows")
        arr = np.array(rows, dtype=np.float64)
        return cls(heights=arr[:, 0], l1=arr[:, 1], l2=arr[:, 2], d_px=d_px)

    @classmethod
    def load(cls, path: str | Path) -> "CalibrationTable":
        return cls.from_text(Path(path).read_text())


def default_calibration() -> CalibrationTable:
    """The calibration table shipped with the package."""
    from importlib import resources

    text = resources.files("padnav").joinpath("data/calibration_default.txt").read_text()
    return CalibrationTable.from_text(text)


@dataclass(frozen=True)
class PoseEstimate:
    """Relative pose of the vehicle with respect to the pad.

    x_w, y_w are the horizontal offsets of the vehicle from the pad center in
    the world frame (meters); h is the relative height; theta_w the heading
    deviation (None when no square was matched); e_o the pixel offset of the
    pad from the image center and l_c its metric counterpart.
    """

    x_w: float
    y_w: float
    h: float
    theta_w: float | None
    e_o: float
    l_c: float


def pixel_offset(landmark_center, cam: CameraGeom) -> tuple[float, float, float]:
    """Pixel offset (e_x, e_y) of the pad center from the image center, and its norm."""
    x_o, y_o = cam.image_center
    e_x = float(landmark_center[0]) - x_o
    e_y = float(landmark_center[1]) - y_o
    return e_x, e_y, math.hypot(e_x, e_y)


def metric_offset(e_x: float, e_y: float, l_pmax: float, tri_side_m: float) -> tuple[float, float]:
    """Convert pixel offsets to meters via the known real triangle side."""
    if l_pmax <= 0:
        raise ValueError("l_pmax must be positive")
    scale = tri_side_m / l_pmax
    return e_x * scale, e_y * scale


def world_offset(x_c: float, y_c: float, alpha: float) -> tuple[float, float]:
    """Rotate camera-frame offsets into the world frame at vehicle yaw alpha."""
    c, s = math.cos(alpha), math.sin(alpha)
    return -c * x_c + s * y_c, -s * x_c - c * y_c


def heading_deviation(c3, c4) -> float:
    """Angle of the triangle-center to square-center arrow versus the camera -Y axis.

    Positive toward +X; full quadrant coverage via the two-argument
    arctangent. Coincident centers are rejected.
    """
    dx = float(c4[0]) - float(c3[0])
    dy = float(c3[1]) - float(c4[1])
    if dx == 0.0 and dy == 0.0:
        raise ValueError("triangle and square centers coincide")
    return math.atan2(dx, dy)


def corrected_length(l1_i: float, l2_i: float, d_px: float, e_o: float) -> float:
    """Offset-corrected pixel length: linear blend from centered to offset-by-d."""
    if d_px <= 0:
        raise ValueError("offset distance must be positive")
    return (l2_i - l1_i) / d_px * e_o + l1_i


def interpolate_height(l_pmax: float, table: CalibrationTable, e_o: float = 0.0) -> float:
    """Relative height from the measured pixel length by linear interpolation.

    Each table row is first corrected for the current image-center offset,
    then the bracket of corrected lengths containing l_pmax (lengths decrease
    as height increases) selects the interpolation segment. Exact at knots.
    Raises CalibrationRangeError outside the corrected span.
    """
    corrected = (table.l2 - table.l1) / table.d_px * e_o + table.l1
    if l_pmax > corrected[0]:
        raise CalibrationRangeError(l_pmax, float(corrected[0]), float(table.heights[0]))
    if l_pmax < corrected[-1]:
        raise CalibrationRangeError(l_pmax, float(corrected[-1]), float(table.heights[-1]))
    # corrected is strictly decreasing; find i with corrected[i] >= l >= corrected[i+1]
    idx = int(np.searchsorted(-corrected, -l_pmax, side="left"))
    if idx < len(corrected) and corrected[idx] == l_pmax:
        return float(table.heights[idx])
    i = idx - 1
    h0, h1 = table.heights[i], table.heights[i + 1]
    c0, c1 = corrected[i], corrected[i + 1]
    return float(h0 + (h1 - h0) / (c1 - c0) * (l_pmax - c0))


def rescale_partial(l_pmax_prime: float, spec: PatternSpec) -> float:
    """Rescale a length measured on the smaller triangle to the larger one."""
    return l_pmax_prime * spec.tri1_side_m / spec.tri2_side_m


def estimate_pose(
    det: Detection,
    cam: CameraGeom,
    table: CalibrationTable,
    spec: PatternSpec,
    alpha: float = 0.0,
) -> PoseEstimate:
    """Full pose chain from a detection.

    Partial (inner-pair) detections are rescaled to the larger triangle's
    equivalent length first. Height range errors propagate; a missing
    heading (no square matched) does not.
    """
    l_p = det.l_pmax
    if det.partial:
        l_p = rescale_partial(l_p, spec)
    e_x, e_y, e_o = pixel_offset(det.landmark_center, cam)
    x_c, y_c = metric_offset(e_x, e_y, l_p, spec.tri1_side_m)
    x_w, y_w = world_offset(x_c, y_c, alpha)
    theta_w = None
    if det.square_center is not None:
        try:
            theta_w = heading_deviation(det.tri_center, det.square_center)
        except ValueError:
            theta_w = None  # measured centers coincide; heading unavailable
    h = interpolate_height(l_p, table, e_o)
    return PoseEstimate(
        x_w=x_w,
        y_w=y_w,
        h=h,
        theta_w=theta_w,
        e_o=e_o,
        l_c=math.hypot(x_c, y_c),
    )
