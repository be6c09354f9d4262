"""padnav: landing-pad fiducial detection, relative pose, and landing simulation.

The pipeline, in order: PGM frames in, resize/smooth, adaptive binarization,
contour-hierarchy extraction, nested-pattern matching, then metric offset,
heading, and interpolated height out. A synthetic scene generator and a
closed-loop simulator exercise the whole chain without hardware.
"""

from .contours import (
    Contour,
    ContourTree,
    douglas_peucker,
    extract_contours,
    inflection_count,
    polygon_area,
    polygon_centroid,
    simplify_polyline,
)
from .detector import (
    Detection,
    PatternSpec,
    check_area_ratios,
    classify_sequence,
    detect_landmark,
    triangle_metrics,
)
from .imaging import (
    PgmDecodeError,
    Roi,
    gaussian_blur,
    load_pgm,
    resize,
    save_pgm,
)
from .pipeline import FrameProcessor, PipelineSettings
from .pose import (
    CalibrationError,
    CalibrationRangeError,
    CalibrationTable,
    CameraGeom,
    PoseEstimate,
    corrected_length,
    default_calibration,
    estimate_pose,
    heading_deviation,
    interpolate_height,
    metric_offset,
    pixel_offset,
    rescale_partial,
    world_offset,
)
from .scenegen import (
    CameraModel,
    GroundTruth,
    LandmarkModel,
    build_landmark,
    render_frame,
    structured_noise_frame,
    synthesize_calibration,
)
from .sim import (
    Controller,
    ControllerConfig,
    Outcome,
    Scenario,
    TraceRecord,
    UavState,
    moving_scenario,
    run,
    static_scenario,
    step,
    write_trace,
)
from .thresholding import (
    DegenerateHistogramError,
    ThresholdConfig,
    ThresholdState,
    binarize,
    histogram,
    initial_state,
    on_detect,
    on_miss,
    otsu,
)

__version__ = "0.1.0"
