"""Synthetic landing-pad scenes with exact projected ground truth.

Builds the nested pad geometry in its own metric plane, projects it through a
pinhole camera with an optional first-order radial distortion term, and
rasterizes hard-edged frames by inverse-mapping every pixel onto the pad
plane. The renderer's pixel axes are chosen so that the downstream offset
equations recover the camera-frame offsets directly (image y aligned with
plane y at zero yaw).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .contours import extract_contours
from .detector import Detection, PatternSpec, detect_landmark
from .imaging import gaussian_blur
from .pose import CalibrationError, CalibrationTable, rescale_partial
from .thresholding import DegenerateHistogramError, binarize, histogram, otsu

BLACK_LEVEL = 25
WHITE_LEVEL = 230
DEFAULT_BACKGROUND = 200


@dataclass(frozen=True)
class LandmarkShape:
    """One convex pattern shape: metric vertices in the pad plane plus fill."""

    vertices: np.ndarray
    fill: str  # "black" or "white"


@dataclass(frozen=True)
class LandmarkModel:
    """The nested pad, outer to inner, with the direction arrow endpoints."""

    shapes: tuple[LandmarkShape, ...]
    arrow_origin: np.ndarray  # larger-triangle center
    arrow_tip: np.ndarray  # outer-square center

    def areas(self) -> np.ndarray:
        from .contours import polygon_area

        return np.array([polygon_area(s.vertices) for s in self.shapes])


def _square(side: float, center=(0.0, 0.0)) -> np.ndarray:
    hs = side / 2.0
    cx, cy = center
    return np.array(
        [[cx - hs, cy - hs], [cx + hs, cy - hs], [cx + hs, cy + hs], [cx - hs, cy + hs]]
    )


def _triangle(side: float, centroid=(0.0, 0.0)) -> np.ndarray:
    """Equilateral triangle, apex toward -y, centered on its centroid."""
    h = math.sqrt(3.0) / 2.0 * side
    cx, cy = centroid
    return np.array(
        [[cx, cy - 2.0 * h / 3.0], [cx + side / 2.0, cy + h / 3.0], [cx - side / 2.0, cy + h / 3.0]]
    )


#: Largest square inscribable in an equilateral triangle has side (2*sqrt(3)-3)
#: times the triangle side; the exact half-area rectangle only fits flush
#: against a triangle edge, which would merge the rasterized regions, so the
#: built inner square is scaled slightly below the inscribable maximum. The
#: resulting adjacent area quotient (~2.32 instead of 2) stays inside the
#: detector's ratio tolerance.
INNER_SQUARE_SCALE = 0.93
#: Fraction of the shrink slack placed below the inner square; equalizes the
#: bottom gap with the perpendicular clearance at the two upper corners.
_INNER_GAP_SPLIT = 0.622


def build_landmark(
    spec: PatternSpec | None = None,
    *,
    triangle_offset_frac: float = 0.15,
    inner_square_scale: float = INNER_SQUARE_SCALE,
) -> LandmarkModel:
    """Construct the pad geometry from the pattern dimensions.

    Squares share a common center; the triangle pair points apex-down and is
    offset toward the +y square edge by triangle_offset_frac of the nominal
    inner-square side, so the triangle-to-square arrow (-y here) is well
    defined while the apex keeps its clearance from the surrounding square.
    The innermost square is the largest that nests strictly inside the
    smaller triangle (scaled by inner_square_scale), slightly below the
    nominal area quotient of 2; it hangs from the triangle's base edge, so
    its center sits on the opposite side of the triangle centroid from the
    outer-square center.
    """
    spec = spec or PatternSpec()
    a0 = spec.outer_side_m
    a1 = a0 / math.sqrt(2.0)
    tri1 = spec.tri1_side_m
    tri2 = spec.tri2_side_m
    nominal_inner = a0 / (4.0 * math.sqrt(2.0))
    t_off = triangle_offset_frac * nominal_inner

    tri_centroid = np.array([0.0, t_off])
    s_max = (2.0 * math.sqrt(3.0) - 3.0) * tri2
    s4 = inner_square_scale * s_max
    tri2_base_y = t_off + (math.sqrt(3.0) / 2.0 * tri2) / 3.0  # base is the +y edge
    gap = _INNER_GAP_SPLIT * (s_max - s4)
    inner_center_y = tri2_base_y - gap - s4 / 2.0

    shapes = (
        LandmarkShape(_square(a0), "black"),
        LandmarkShape(_square(a1), "white"),
        LandmarkShape(_triangle(tri1, tri_centroid), "black"),
        LandmarkShape(_triangle(tri2, tri_centroid), "white"),
        LandmarkShape(_square(s4, (0.0, inner_center_y)), "black"),
    )
    return LandmarkModel(
        shapes=shapes,
        arrow_origin=tri_centroid.copy(),
        arrow_tip=np.array([0.0, 0.0]),
    )


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera over the pad plane (plane z = 0, camera above it).

    position/yaw/pitch/roll place the camera in pad-plane coordinates; the
    default attitude looks straight down. k1 is the first radial distortion
    coefficient on normalized coordinates (negative = barrel). The default
    focal length puts the larger triangle near 64 px at 0.79 m height.
    """

    focal_px: float = 247.6
    width: int = 640
    height: int = 480
    cx: float | None = None
    cy: float | None = None
    k1: float = 0.0
    position: tuple[float, float, float] = (0.0, 0.0, 1.0)
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    @property
    def principal_point(self) -> tuple[float, float]:
        cx = self.width / 2.0 if self.cx is None else self.cx
        cy = self.height / 2.0 if self.cy is None else self.cy
        return cx, cy

    def rotation(self) -> np.ndarray:
        """Camera-to-world axis matrix (columns are the camera axes).

        The base attitude maps camera x to +x, y to +y and the viewing axis
        to -z, i.e. pixel axes aligned with the plane axes at zero yaw.
        """
        cy_, sy = math.cos(self.yaw), math.sin(self.yaw)
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        cr, sr = math.cos(self.roll), math.sin(self.roll)
        rz = np.array([[cy_, -sy, 0.0], [sy, cy_, 0.0], [0.0, 0.0, 1.0]])
        ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
        rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
        base = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]])
        return rz @ ry @ rx @ base


@dataclass(frozen=True)
class GroundTruth:
    """Exact projections of the pad for the rendered frame.

    shapes_px holds the projected vertices of each shape (outer to inner);
    center_px / l_pmax / e_o describe the projected larger triangle. visible
    flags shapes whose projected vertices all fall inside the frame.
    """

    shapes_px: tuple[np.ndarray, ...]
    center_px: np.ndarray
    l_pmax: float
    e_o: float
    visible: tuple[bool, ...]

    @property
    def empty(self) -> bool:
        return len(self.shapes_px) == 0


def _undistort(nx: np.ndarray, ny: np.ndarray, k1: float) -> tuple[np.ndarray, np.ndarray]:
    """Invert r' = r (1 + k1 r^2) by Newton iteration (k1 small)."""
    rp = np.hypot(nx, ny)
    r = rp.copy()
    for _ in range(5):
        f = r * (1.0 + k1 * r * r) - rp
        df = 1.0 + 3.0 * k1 * r * r
        r = r - f / np.where(np.abs(df) < 1e-9, 1e-9, df)
    scale = np.where(rp > 1e-12, r / np.where(rp > 1e-12, rp, 1.0), 1.0)
    return nx * scale, ny * scale


def project_points(cam: CameraModel, pts_plane: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project pad-plane (x, y) points to pixels; also returns camera depths."""
    pts = np.asarray(pts_plane, dtype=np.float64)
    world = np.column_stack([pts, np.zeros(len(pts))])
    rot = cam.rotation()
    c = np.asarray(cam.position, dtype=np.float64)
    d = (world - c) @ rot  # world -> camera (orthonormal columns)
    z = d[:, 2]
    safe_z = np.where(np.abs(z) < 1e-12, 1e-12, z)
    nx = d[:, 0] / safe_z
    ny = d[:, 1] / safe_z
    r2 = nx * nx + ny * ny
    factor = 1.0 + cam.k1 * r2
    cx, cy = cam.principal_point
    px = cx + cam.focal_px * nx * factor
    py = cy + cam.focal_px * ny * factor
    return np.column_stack([px, py]), z


def _fill_levels(fill: str, black_level: int, white_level: int) -> int:
    return black_level if fill == "black" else white_level


def render_frame(
    lm: LandmarkModel,
    cam: CameraModel,
    background: int = DEFAULT_BACKGROUND,
    *,
    black_level: int = BLACK_LEVEL,
    white_level: int = WHITE_LEVEL,
    gradient_amp: float = 0.0,
    gradient_angle: float = 0.0,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, GroundTruth]:
    """Rasterize the pad seen by the camera; returns the frame and ground truth.

    Rendering is hard-edged (no anti-aliasing): every pixel center is
    inverse-mapped onto the pad plane and takes the fill of the innermost
    shape containing it, else the background level. An optional linear
    illumination ramp (peak amplitude gradient_amp along gradient_angle) and
    Gaussian intensity noise can be overlaid for robustness tests. A pad
    fully outside the frustum yields a uniform frame and empty ground truth.
    """
    h, w = cam.height, cam.width
    cx, cy = cam.principal_point

    shape_px: list[np.ndarray] = []
    shape_z: list[np.ndarray] = []
    for s in lm.shapes:
        px, z = project_points(cam, s.vertices)
        shape_px.append(px)
        shape_z.append(z)

    in_front = all(np.all(z > 0) for z in shape_z)
    img = np.full((h, w), float(background))

    bbox_ok = False
    if in_front and shape_px:
        allpx = np.vstack(shape_px)
        x0 = int(np.floor(allpx[:, 0].min())) - 3
        x1 = int(np.ceil(allpx[:, 0].max())) + 4
        y0 = int(np.floor(allpx[:, 1].min())) - 3
        y1 = int(np.ceil(allpx[:, 1].max())) + 4
        x0, x1 = max(0, x0), min(w, x1)
        y0, y1 = max(0, y0), min(h, y1)
        bbox_ok = x1 > x0 and y1 > y0

    if not bbox_ok:
        img = _apply_overlays(img, gradient_amp, gradient_angle, noise_sigma, rng)
        return img.astype(np.uint8), GroundTruth(
            shapes_px=(), center_px=np.array([np.nan, np.nan]),
            l_pmax=float("nan"), e_o=float("nan"), visible=(),
        )

    xs, ys = np.meshgrid(
        np.arange(x0, x1, dtype=np.float64), np.arange(y0, y1, dtype=np.float64)
    )
    nx = (xs - cx) / cam.focal_px
    ny = (ys - cy) / cam.focal_px
    if cam.k1 != 0.0:
        nx, ny = _undistort(nx.ravel(), ny.ravel(), cam.k1)
        nx = nx.reshape(xs.shape)
        ny = ny.reshape(xs.shape)
    rot = cam.rotation()
    rays = np.stack([nx, ny, np.ones_like(nx)], axis=-1) @ rot.T
    c = np.asarray(cam.position, dtype=np.float64)
    dz = rays[..., 2]
    valid = dz < -1e-12
    t = np.where(valid, -c[2] / np.where(valid, dz, -1.0), np.nan)
    gx = c[0] + t * rays[..., 0]
    gy = c[1] + t * rays[..., 1]

    region = np.full(xs.shape, float(background))
    assigned = np.zeros(xs.shape, dtype=bool)
    for s in reversed(lm.shapes):  # innermost first
        inside = _points_in_convex(gx, gy, s.vertices) & valid & ~assigned
        region[inside] = _fill_levels(s.fill, black_level, white_level)
        assigned |= inside
    img[y0:y1, x0:x1] = region

    img = _apply_overlays(img, gradient_amp, gradient_angle, noise_sigma, rng)

    # ground-truth scale cue comes from the outermost triangle shape
    tri_idx = next((i for i, s in enumerate(lm.shapes) if len(s.vertices) == 3), 0)
    tri = shape_px[tri_idx]
    sides = np.linalg.norm(tri - np.roll(tri, -1, axis=0), axis=1)
    center = tri.mean(axis=0)
    visible = tuple(
        bool(np.all((p[:, 0] >= 0) & (p[:, 0] < w) & (p[:, 1] >= 0) & (p[:, 1] < h)))
        for p in shape_px
    )
    gt = GroundTruth(
        shapes_px=tuple(shape_px),
        center_px=center,
        l_pmax=float(sides.max()),
        e_o=float(np.hypot(center[0] - cx, center[1] - cy)),
        visible=visible,
    )
    return img.astype(np.uint8), gt


def _points_in_convex(gx: np.ndarray, gy: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Vectorized containment test against a convex polygon (either winding)."""
    sign = 0.0
    inside = np.ones(gx.shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        cross = (bx - ax) * (gy - ay) - (by - ay) * (gx - ax)
        if sign == 0.0:
            # establish winding from the polygon itself
            cx2, cy2 = verts[(i + 2) % n]
            sign = (bx - ax) * (cy2 - ay) - (by - ay) * (cx2 - ax)
            sign = 1.0 if sign >= 0 else -1.0
        inside &= (cross * sign) >= 0
    return inside


def _apply_overlays(img, gradient_amp, gradient_angle, noise_sigma, rng):
    h, w = img.shape
    if gradient_amp != 0.0:
        xs, ys = np.meshgrid(np.arange(w), np.arange(h))
        u = (xs - w / 2.0) * math.cos(gradient_angle) + (ys - h / 2.0) * math.sin(
            gradient_angle
        )
        span = max(abs(u.max()), abs(u.min()), 1.0)
        img = img + gradient_amp * u / span
    if noise_sigma > 0.0:
        rng = rng or np.random.default_rng(0)
        img = img + rng.normal(0.0, noise_sigma, img.shape)
    return np.clip(np.rint(img), 0, 255)


def _measure_lpmax(img: np.ndarray, spec: PatternSpec) -> float | None:
    """Blur, auto-threshold, and detect; returns the larger-triangle-equivalent
    pixel length or None."""
    smooth = gaussian_blur(img, 1.0)
    try:
        t = otsu(histogram(smooth))
    except DegenerateHistogramError:
        return None
    det = detect_landmark(extract_contours(binarize(smooth, t)), spec)
    if det is None:
        return None
    return rescale_partial(det.l_pmax, spec) if det.partial else det.l_pmax


def synthesize_calibration(
    cam: CameraModel,
    lm: LandmarkModel,
    heights,
    d_px: float,
    spec: PatternSpec | None = None,
    background: int = DEFAULT_BACKGROUND,
) -> CalibrationTable:
    """Build a calibration table by rendering and measuring at each height.

    For every height the pad is rendered centered (giving l1) and offset so
    its projected center sits d_px pixels from the image center (giving l2),
    and the real detector measures the pixel length. Detection failure at any
    height raises CalibrationError naming the height.
    """
    spec = spec or PatternSpec()
    heights = sorted(float(h) for h in heights)
    if len(heights) < 2:
        raise CalibrationError("need at least two calibration heights")
    l1_rows = []
    l2_rows = []
    for height in heights:
        centered = replace(cam, position=(0.0, 0.0, height), yaw=0.0, pitch=0.0, roll=0.0)
        img, _ = render_frame(lm, centered, background)
        l1 = _measure_lpmax(img, spec)
        if l1 is None:
            raise CalibrationError(f"no detection in centered frame at height {height} m")
        offset_m = d_px * height / cam.focal_px
        shifted = replace(centered, position=(offset_m, 0.0, height))
        img, _ = render_frame(lm, shifted, background)
        l2 = _measure_lpmax(img, spec)
        if l2 is None:
            raise CalibrationError(f"no detection in offset frame at height {height} m")
        l1_rows.append(l1)
        l2_rows.append(l2)
    return CalibrationTable(
        heights=np.array(heights), l1=np.array(l1_rows), l2=np.array(l2_rows), d_px=d_px
    )


def structured_noise_frame(
    rng: np.random.Generator,
    width: int = 640,
    height: int = 480,
    kind: str | None = None,
) -> np.ndarray:
    """A pad-free frame with structured clutter for false-positive testing.

    Kinds: nested rectangles with off-pattern area ratios, a triangle/square
    nesting with an off-pattern ratio, checkerboards, and text-like glyph
    rows. Ratios are sampled outside the acceptance bands of the pattern
    (including the close-range inner-pair band).
    """
    kinds = ("nested_rects", "tri_square", "checkerboard", "text")
    kind = kind or kinds[int(rng.integers(len(kinds)))]
    img = np.full((height, width), DEFAULT_BACKGROUND, dtype=np.uint8)

    def bad_ratio() -> float:
        # stay clear of 2 +/- 25%, 4 +/- 25% and the inner-pair band
        return float(rng.choice([rng.uniform(1.05, 1.4), rng.uniform(2.7, 2.9), rng.uniform(5.5, 9.0)]))

    if kind == "nested_rects":
        cx = rng.uniform(0.3, 0.7) * width
        cy = rng.uniform(0.3, 0.7) * height
        side = rng.uniform(0.25, 0.45) * min(width, height)
        fill = BLACK_LEVEL
        for _ in range(int(rng.integers(2, 6))):
            hs = side / 2.0
            x0, x1 = int(cx - hs), int(cx + hs)
            y0, y1 = int(cy - hs * rng.uniform(0.85, 1.0)), int(cy + hs)
            img[max(0, y0):y1, max(0, x0):x1] = fill
            fill = WHITE_LEVEL if fill == BLACK_LEVEL else BLACK_LEVEL
            side /= math.sqrt(bad_ratio())
    elif kind == "tri_square":
        cx = rng.uniform(0.35, 0.65) * width
        cy = rng.uniform(0.35, 0.65) * height
        tri_side = rng.uniform(0.3, 0.5) * min(width, height)
        ys, xs = np.mgrid[0:height, 0:width]
        tri = _triangle(tri_side, (cx, cy))
        inside = _points_in_convex(xs.astype(float), ys.astype(float), tri)
        img[inside] = BLACK_LEVEL
        sq_side = tri_side * math.sqrt(3.0) / 2.0 / math.sqrt(bad_ratio()) * 0.9
        hs = sq_side / 2.0
        img[int(cy - hs):int(cy + hs), int(cx - hs):int(cx + hs)] = WHITE_LEVEL
    elif kind == "checkerboard":
        cell = int(rng.integers(6, 40))
        ys, xs = np.mgrid[0:height, 0:width]
        mask = ((xs // cell) + (ys // cell)) % 2 == 0
        img[mask] = BLACK_LEVEL
        img[~mask] = WHITE_LEVEL
    else:  # text-like glyph rows
        y = int(rng.integers(10, 40))
        while y < height - 30:
            x = int(rng.integers(5, 40))
            glyph_h = int(rng.integers(8, 22))
            while x < width - 30:
                glyph_w = int(rng.integers(4, 18))
                if rng.random() < 0.8:
                    img[y:y + glyph_h, x:x + glyph_w] = BLACK_LEVEL
                x += glyph_w + int(rng.integers(3, 10))
            y += glyph_h + int(rng.integers(6, 18))
    return img
