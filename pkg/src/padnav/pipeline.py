"""Per-frame processing chain shared by the CLI stream detector and the simulator.

Order per frame: resize to the working resolution, Gaussian smoothing,
binarization at the threshold machine's current candidate, contour
extraction, pattern matching, then either pose estimation plus a local
threshold refinement (on success) or a threshold-machine miss update.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .detector import Detection, PatternSpec, detect_landmark
from .imaging import Roi, gaussian_blur, resize
from .pose import (
    CalibrationRangeError,
    CalibrationTable,
    CameraGeom,
    PoseEstimate,
    estimate_pose,
)
from .thresholding import (
    ThresholdConfig,
    ThresholdState,
    binarize,
    histogram,
    initial_state,
    on_detect,
    on_miss,
)

#: ROI dilation factor around a detection for the local gray histogram.
ROI_DILATION = 0.5


def detection_roi(det: Detection, width: int, height: int) -> Roi | None:
    """Bounding box of the detection dilated by half its size on each side."""
    x0, y0, x1, y1 = det.bounding_box()
    dw = (x1 - x0) * ROI_DILATION
    dh = (y1 - y0) * ROI_DILATION
    roi = Roi(
        int(np.floor(x0 - dw)),
        int(np.floor(y0 - dh)),
        int(np.ceil((x1 - x0) + 2 * dw)) + 1,
        int(np.ceil((y1 - y0) + 2 * dh)) + 1,
    )
    return roi.clamped(width, height)


@dataclass
class FrameReport:
    """Outcome of one processed frame."""

    index: int
    status: str  # detected | miss | lost | error
    threshold_used: int | None = None
    codes: tuple[int, ...] = ()
    shape_window: tuple[int, int] | None = None
    l_pmax: float | None = None
    partial: bool = False
    detection: Detection | None = None
    pose: PoseEstimate | None = None
    height_out_of_range: bool = False
    elapsed_ms: float = 0.0
    error: str | None = None


@dataclass
class PipelineSettings:
    """Knobs of the frame pipeline (see the CLI config file for overrides)."""

    spec: PatternSpec = field(default_factory=PatternSpec)
    threshold: ThresholdConfig = field(default_factory=ThresholdConfig)
    cam_geom: CameraGeom = field(default_factory=CameraGeom)
    blur_sigma: float = 1.0
    dp_tol_frac: float = 0.02
    dp_tol_min_px: float = 3.0


class FrameProcessor:
    """Sequential frame processor owning one threshold state machine.

    Frames must be fed in stream order; the threshold machine is
    order-dependent. One instance per video stream.
    """

    def __init__(
        self,
        settings: PipelineSettings | None = None,
        calibration: CalibrationTable | None = None,
    ):
        self.settings = settings or PipelineSettings()
        self.calibration = calibration
        self.state: ThresholdState = initial_state(self.settings.threshold)
        self._next_t: int = self.state.global_t
        self._frame_index = 0

    @property
    def next_threshold(self) -> int:
        return self._next_t

    def process(self, img: np.ndarray, alpha: float = 0.0) -> FrameReport:
        """Run the full chain on one frame and advance the threshold machine."""
        start = time.perf_counter()
        s = self.settings
        index = self._frame_index
        self._frame_index += 1

        work = img
        if work.shape != (s.cam_geom.height, s.cam_geom.width):
            work = resize(work, s.cam_geom.width, s.cam_geom.height)
        smooth = gaussian_blur(work, s.blur_sigma)
        used_t = self._next_t
        binary = binarize(smooth, used_t)

        from .contours import extract_contours

        tree = extract_contours(binary)
        det = detect_landmark(
            tree, s.spec, dp_tol_frac=s.dp_tol_frac, dp_tol_min_px=s.dp_tol_min_px
        )

        report = FrameReport(index=index, status="miss", threshold_used=used_t)
        if det is None:
            self.state, candidate = on_miss(self.state)
            if candidate is None:
                report.status = "lost" if self.state.lost else "miss"
                self._next_t = self.state.global_t
            else:
                self._next_t = candidate
        else:
            roi = detection_roi(det, s.cam_geom.width, s.cam_geom.height)
            roi_hist = histogram(smooth, roi)
            self.state = on_detect(self.state, roi_hist, used_t=used_t)
            self._next_t = self.state.global_t
            report.status = "detected"
            report.detection = det
            report.codes = tuple(len(p) for p, _ in det.matched)
            report.shape_window = det.shape_window
            report.l_pmax = det.l_pmax
            report.partial = det.partial
            if self.calibration is not None:
                try:
                    report.pose = estimate_pose(
                        det, s.cam_geom, self.calibration, s.spec, alpha
                    )
                except CalibrationRangeError:
                    report.height_out_of_range = True

        report.elapsed_ms = (time.perf_counter() - start) * 1000.0
        return report
