"""Hierarchical matching of the nested landing-pad pattern in a contour forest.

The pattern is five nested shapes, outer to inner: square, square, equilateral
triangle, equilateral triangle, square, with corner counts 4-4-3-3-4 and
adjacent area quotients 2, 4, 2, 2. Chains of nested contours are scored by
corner counts first, then by adjacent area ratios; among surviving candidates
the one matching the most contours wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contours import (
    ContourTree,
    douglas_peucker,
    polygon_area,
    polygon_centroid,
)

#: Corner counts of the five pattern shapes, outer to inner.
PATTERN_CODES = (4, 4, 3, 3, 4)
#: Pattern indices that are squares.
SQUARE_SHAPES = (0, 1, 4)
#: Pattern indices of the larger / smaller triangle.
TRIANGLE_LARGE = 2
TRIANGLE_SMALL = 3
#: Accepted window start offsets keyed by chain length. A five-contour chain
#: leaves its innermost code unchecked (too small to count corners reliably).
ACCEPTED_WINDOWS: dict[int, tuple[int, ...]] = {
    5: (0,),
    4: (0, 1),
    3: (0, 1, 2),
    2: (1, 2),
}


def _default_sides(outer_side_m: float) -> tuple[float, float]:
    """Real triangle side lengths implied by the outer square side and the
    2-4-2-2 adjacent area quotients."""
    outer_area = outer_side_m * outer_side_m
    tri1_area = outer_area / 8.0
    tri1 = math.sqrt(4.0 * tri1_area / math.sqrt(3.0))
    return tri1, tri1 / math.sqrt(2.0)


@dataclass(frozen=True)
class PatternSpec:
    """Geometry and tolerances of the landing-pad pattern."""

    shape_codes: tuple[int, ...] = PATTERN_CODES
    adjacent_ratios: tuple[float, ...] = (2.0, 4.0, 2.0, 2.0)
    outer_side_m: float = 0.38
    tri1_side_m: float = _default_sides(0.38)[0]
    tri2_side_m: float = _default_sides(0.38)[1]
    ratio_tolerance: float = 0.25

    def __post_init__(self):
        if len(self.shape_codes) != 5:
            raise ValueError("pattern has exactly five shapes")
        if any(r <= 1.0 for r in self.adjacent_ratios):
            raise ValueError("adjacent area ratios must all exceed 1")
        if abs(self.tri1_side_m / self.tri2_side_m - math.sqrt(2.0)) > 1e-9:
            raise ValueError("triangle sides must differ by a factor of sqrt(2)")


@dataclass(frozen=True)
class Detection:
    """A matched landmark: simplified contour polygons plus derived geometry.

    matched lists (polygon, area) pairs outer to inner. shape_window is the
    (start, length) window into the five-shape pattern that the contours
    matched. square_center is None when the matched window contains no
    square (two-triangle match), in which case no heading is available.
    partial marks the close-range case where only the inner triangle/square
    pair was found; l_pmax is then measured on the smaller triangle and must
    be rescaled before any metric conversion.
    """

    matched: tuple[tuple[np.ndarray, float], ...]
    shape_window: tuple[int, int]
    tri_center: np.ndarray
    square_center: np.ndarray | None
    landmark_center: np.ndarray
    l_pmax: float
    partial: bool

    def bounding_box(self) -> tuple[float, float, float, float]:
        """(x0, y0, x1, y1) over the outermost matched polygon."""
        outer = self.matched[0][0]
        return (
            float(outer[:, 0].min()),
            float(outer[:, 1].min()),
            float(outer[:, 0].max()),
            float(outer[:, 1].max()),
        )


def classify_sequence(codes) -> int | None:
    """Match an outer-to-inner corner-count chain against the pattern windows.

    Returns the start offset of the matched window within the five-shape
    pattern, or None when the chain fits no accepted window. Accepted windows
    are exactly: 4433? (innermost code ignored), 4433, 4334, 443, 433, 334,
    33 and 43.
    """
    codes = tuple(int(c) for c in codes)
    n = len(codes)
    for start in ACCEPTED_WINDOWS.get(n, ()):
        checked = 4 if n == 5 else n
        if codes[:checked] == PATTERN_CODES[start:start + checked]:
            return start
    return None


def check_area_ratios(areas, expected, tol: float) -> bool:
    """True when every adjacent outer/inner area quotient is within tol of expected.

    areas are outer-to-inner pixel areas; expected holds one ratio per
    adjacent pair and must align with the matched window. tol is relative.
    """
    areas = [float(a) for a in areas]
    if any(a <= 0.0 for a in areas):
        raise ValueError("areas must be positive")
    if len(expected) != len(areas) - 1:
        raise ValueError("expected one ratio per adjacent pair")
    for i, r in enumerate(expected):
        if abs(areas[i] / areas[i + 1] - r) > tol * r:
            return False
    return True


def triangle_metrics(tri: np.ndarray) -> tuple[float, np.ndarray]:
    """Longest side length and vertex mean of a 3-vertex polygon."""
    t = np.asarray(tri, dtype=np.float64)
    if t.shape != (3, 2):
        raise ValueError("triangle must have exactly 3 vertices")
    sides = np.linalg.norm(t - np.roll(t, -1, axis=0), axis=1)
    if sides.min() <= 0.0:
        raise ValueError("degenerate triangle")
    return float(sides.max()), t.mean(axis=0)


def _simplify_all(tree: ContourTree, tol_frac: float, tol_min_px: float):
    polys: list[np.ndarray | None] = []
    areas: list[float] = []
    codes: list[int] = []
    for c in tree.contours:
        tol = max(tol_frac * c.perimeter(), tol_min_px)
        poly = douglas_peucker(c, tol)
        if len(poly) < 3:
            polys.append(None)
            areas.append(0.0)
            codes.append(0)
            continue
        polys.append(poly)
        areas.append(polygon_area(poly))
        codes.append(len(poly))
    return polys, areas, codes


def detect_landmark(
    tree: ContourTree,
    spec: PatternSpec | None = None,
    *,
    dp_tol_frac: float = 0.02,
    dp_tol_min_px: float = 3.0,
) -> Detection | None:
    """Search the contour forest for the landing-pad pattern.

    Candidate chains descend from any node while each link has exactly one
    child (the pattern never contains side-by-side sub-contours), capped at
    five contours. Every chain prefix is classified by corner counts and
    checked against the adjacent area ratios. A dedicated close-range path
    accepts the innermost triangle/square pair (codes 3, 4 with area
    quotient 2), which the corner-count table alone does not list; such a
    match is flagged partial. Among the survivors the candidate matching the
    most contours is returned (ties favor the larger outer area).
    """
    spec = spec or PatternSpec()
    if len(tree) == 0:
        return None
    polys, areas, codes = _simplify_all(tree, dp_tol_frac, dp_tol_min_px)

    best = None
    best_rank = (-1, -1.0)
    for start_node in range(len(tree)):
        chain = [start_node]
        node = start_node
        while len(chain) < 5 and len(tree.children[node]) == 1:
            node = tree.children[node][0]
            chain.append(node)
        for length in range(2, len(chain) + 1):
            ids = chain[:length]
            if any(polys[i] is None for i in ids):
                continue
            chain_codes = [codes[i] for i in ids]
            window = classify_sequence(chain_codes)
            partial = False
            if window is None:
                if length == 2 and chain_codes == [3, 4]:
                    window = TRIANGLE_SMALL  # close-range inner-pair search
                    partial = True
                else:
                    continue
            chain_areas = [areas[i] for i in ids]
            expected = spec.adjacent_ratios[window:window + length - 1]
            try:
                if not check_area_ratios(chain_areas, expected, spec.ratio_tolerance):
                    continue
            except ValueError:
                continue
            rank = (length, chain_areas[0])
            if rank > best_rank:
                best_rank = rank
                best = (ids, window, length, partial)

    if best is None:
        return None
    ids, window, length, partial = best

    tri_shape = TRIANGLE_LARGE if window <= TRIANGLE_LARGE < window + length else TRIANGLE_SMALL
    tri_poly = polys[ids[tri_shape - window]]
    l_pmax, landmark_center = triangle_metrics(tri_poly)
    tri_center = polygon_centroid(tri_poly)

    squares = [s for s in SQUARE_SHAPES if window <= s < window + length]
    if length == 5:
        squares = [s for s in squares if s != 4]  # innermost code was unchecked
    square_center = None
    if squares:
        square_center = polygon_centroid(polys[ids[min(squares) - window]])

    matched = tuple((polys[i], areas[i]) for i in ids)
    return Detection(
        matched=matched,
        shape_window=(window, length),
        tri_center=tri_center,
        square_center=square_center,
        landmark_center=landmark_center,
        l_pmax=l_pmax,
        partial=partial,
    )
