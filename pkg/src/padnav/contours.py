"""Closed-contour extraction with hole/outer nesting, plus polygon utilities.

extract_contours implements raster border following over a {0, 255} image:
white regions are 8-connected, black regions 4-connected, and every traced
border records whether it separates a white region from the black outside
(outer) or encloses a black hole. Borders form a forest by containment.

The polygon helpers (shoelace area, centroid, Douglas-Peucker corner
simplification) operate on (n, 2) float arrays of (x, y) vertices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

# 8-neighborhood in counterclockwise order starting east; (di, dj) with
# i = row, j = column.
_DI = np.array([0, -1, -1, -1, 0, 1, 1, 1], dtype=np.int32)
_DJ = np.array([1, 1, 0, -1, -1, -1, 0, 1], dtype=np.int32)


@dataclass(frozen=True)
class Contour:
    """Closed 8-connected pixel ring in trace order; points are (x, y) int32."""

    points: np.ndarray
    is_outer: bool

    def __len__(self) -> int:
        return len(self.points)

    def perimeter(self) -> float:
        p = self.points.astype(np.float64)
        return float(np.linalg.norm(p - np.roll(p, -1, axis=0), axis=1).sum())


@dataclass
class ContourTree:
    """Forest of contours; parent[i] is an index or None for roots."""

    contours: list[Contour]
    parent: list[int | None]
    children: list[list[int]]

    @property
    def roots(self) -> list[int]:
        return [i for i, p in enumerate(self.parent) if p is None]

    def __len__(self) -> int:
        return len(self.contours)


@njit(cache=True)
def _dir_index(di: int, dj: int) -> int:
    for d in range(8):
        if _DI[d] == di and _DJ[d] == dj:
            return d
    return 0


@njit(cache=True)
def _trace(f, i0, j0, i2, j2, nbd, pts, base):
    """Follow one border from its start pixel, marking f; returns point count."""
    d0 = _dir_index(i2 - i0, j2 - j0)
    i1 = -1
    j1 = -1
    found = False
    for k in range(8):
        d = (d0 - k) % 8  # clockwise scan around the start pixel
        ii = i0 + _DI[d]
        jj = j0 + _DJ[d]
        if f[ii, jj] != 0:
            i1 = ii
            j1 = jj
            found = True
            break
    if not found:
        f[i0, j0] = -nbd
        pts[base, 0] = j0
        pts[base, 1] = i0
        return 1

    i2, j2 = i1, j1
    i3, j3 = i0, j0
    count = 0
    while True:
        d0 = _dir_index(i2 - i3, j2 - j3)
        east_seen_zero = False
        i4 = -1
        j4 = -1
        for k in range(1, 9):  # counterclockwise, starting after (i2, j2)
            d = (d0 + k) % 8
            ii = i3 + _DI[d]
            jj = j3 + _DJ[d]
            if f[ii, jj] != 0:
                i4 = ii
                j4 = jj
                break
            if d == 0:
                east_seen_zero = True
        if east_seen_zero:
            f[i3, j3] = -nbd
        elif f[i3, j3] == 1:
            f[i3, j3] = nbd
        pts[base + count, 0] = j3
        pts[base + count, 1] = i3
        count += 1
        if i4 == i0 and j4 == j0 and i3 == i1 and j3 == j1:
            break
        i2, j2 = i3, j3
        i3, j3 = i4, j4
    return count


@njit(cache=True)
def _scan(f, pts, starts, outer_flags, parents):
    """Raster scan finding border start pixels; returns (last id, point count).

    Border ids start at 2; id 1 is the implicit image frame (treated as a
    hole-type border with no parent).
    """
    h, w = f.shape
    nbd = 1
    outer_flags[1] = 0
    parents[1] = 0
    n_pts = 0
    for i in range(1, h - 1):
        lnbd = 1
        for j in range(1, w - 1):
            fij = f[i, j]
            if fij == 0:
                continue
            outer_start = fij == 1 and f[i, j - 1] == 0
            hole_start = fij >= 1 and f[i, j + 1] == 0
            if outer_start or hole_start:
                if outer_start:
                    is_outer = 1
                    i2, j2 = i, j - 1
                else:
                    is_outer = 0
                    i2, j2 = i, j + 1
                    if fij > 1:
                        lnbd = fij
                nbd += 1
                if outer_flags[lnbd] == is_outer:
                    parents[nbd] = parents[lnbd]
                else:
                    parents[nbd] = lnbd
                outer_flags[nbd] = is_outer
                starts[nbd] = n_pts
                n_pts += _trace(f, i, j, i2, j2, nbd, pts, n_pts)
                starts[nbd + 1] = n_pts
            if f[i, j] != 1:
                lnbd = abs(f[i, j])
    return nbd, n_pts


def extract_contours(img: np.ndarray) -> ContourTree:
    """Trace every region border of a binary image into a nesting forest.

    Borders shorter than 3 pixels are dropped (their children are re-attached
    to the grandparent) since they cannot carry shape information.
    """
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    h, w = img.shape
    f = np.zeros((h + 2, w + 2), dtype=np.int32)
    f[1:-1, 1:-1] = img > 0

    cap_pts = 4 * (h + 2) * (w + 2) + 16
    cap_ids = h * w + 16
    pts = np.empty((cap_pts, 2), dtype=np.int32)
    starts = np.zeros(cap_ids, dtype=np.int32)
    outer_flags = np.zeros(cap_ids, dtype=np.int32)
    parents = np.zeros(cap_ids, dtype=np.int32)

    last_id, _ = _scan(f, pts, starts, outer_flags, parents)

    raw: list[Contour] = []
    raw_parent: list[int] = []  # raw border ids; 1 = frame
    for k in range(2, last_id + 1):
        ring = pts[starts[k]:starts[k + 1]].copy() - 1  # undo padding offset
        raw.append(Contour(points=ring, is_outer=bool(outer_flags[k])))
        raw_parent.append(int(parents[k]))

    # Drop degenerate (< 3 point) borders, re-linking children upward.
    keep = [len(c.points) >= 3 for c in raw]
    index_of: dict[int, int] = {}
    contours: list[Contour] = []
    for idx, c in enumerate(raw):
        if keep[idx]:
            index_of[idx + 2] = len(contours)
            contours.append(c)

    def resolve(border_id: int) -> int | None:
        while border_id > 1 and not keep[border_id - 2]:
            border_id = raw_parent[border_id - 2]
        return index_of[border_id] if border_id > 1 else None

    parent: list[int | None] = []
    for idx in range(len(raw)):
        if keep[idx]:
            parent.append(resolve(raw_parent[idx]))
    children: list[list[int]] = [[] for _ in contours]
    for i, p in enumerate(parent):
        if p is not None:
            children[p].append(i)
    return ContourTree(contours=contours, parent=parent, children=children)


def polygon_area(poly: np.ndarray) -> float:
    """Absolute shoelace area of a closed polygon given by ordered vertices."""
    p = np.asarray(poly, dtype=np.float64)
    if len(p) < 3:
        raise ValueError("polygon needs at least 3 vertices")
    x, y = p[:, 0], p[:, 1]
    return abs(float(x @ np.roll(y, -1) - y @ np.roll(x, -1))) / 2.0


def polygon_centroid(poly: np.ndarray) -> np.ndarray:
    """Area centroid of a simple polygon; falls back to the vertex mean when flat."""
    p = np.asarray(poly, dtype=np.float64)
    if len(p) < 3:
        raise ValueError("polygon needs at least 3 vertices")
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a2 = cross.sum()
    if abs(a2) < 1e-12:
        return p.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (3.0 * a2)
    cy = ((y + yn) * cross).sum() / (3.0 * a2)
    return np.array([cx, cy])


def _chord_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance of each point from the line through a and b (or from a if a == b)."""
    ab = b - a
    norm = np.hypot(ab[0], ab[1])
    if norm < 1e-12:
        return np.linalg.norm(points - a, axis=1)
    d = points - a
    return np.abs(d[:, 0] * ab[1] - d[:, 1] * ab[0]) / norm


def simplify_polyline(points: np.ndarray, tol: float) -> np.ndarray:
    """Douglas-Peucker simplification of an open chain; endpoints always kept.

    Splits recursively at the point farthest from the current chord while
    that distance exceeds tol.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if n <= 2:
        return pts.copy()
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        a, b = stack.pop()
        if b - a < 2:
            continue
        dists = _chord_distances(pts[a + 1:b], pts[a], pts[b])
        k = int(np.argmax(dists))
        if dists[k] > tol:
            mid = a + 1 + k
            keep[mid] = True
            stack.append((a, mid))
            stack.append((mid, b))
    return pts[keep]


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew monotone-chain hull; returns hull vertices (ccw, no repeat)."""
    pts = np.unique(points, axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(seq):
        out: list[np.ndarray] = []
        for p in seq:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def _diameter_indices(points: np.ndarray) -> tuple[int, int]:
    """Indices (i < j) of the two mutually farthest points of a ring."""
    pts = np.asarray(points, dtype=np.float64)
    hull = _convex_hull(pts)
    if len(hull) < 2:
        return 0, min(1, len(points) - 1)
    diff = hull[:, None, :] - hull[None, :, :]
    d2 = (diff ** 2).sum(axis=2)
    a, b = np.unravel_index(int(np.argmax(d2)), d2.shape)
    ia = int(np.nonzero((pts == hull[a]).all(axis=1))[0][0])
    ib = int(np.nonzero((pts == hull[b]).all(axis=1))[0][0])
    return (ia, ib) if ia < ib else (ib, ia)


def douglas_peucker(contour: "Contour | np.ndarray", tol: float) -> np.ndarray:
    """Simplify a closed ring to its corner vertices.

    The ring is first cut at the two mutually farthest points, each open half
    is simplified independently, and the halves are re-joined. The output
    vertices are a subsequence of the input points.
    """
    pts = contour.points if isinstance(contour, Contour) else np.asarray(contour)
    pts = np.asarray(pts, dtype=np.float64)
    if len(pts) < 3:
        return pts.copy()
    i, j = _diameter_indices(pts)
    if i == j:
        return pts[:1].copy()
    rolled = np.roll(pts, -i, axis=0)
    cut = j - i
    first = simplify_polyline(rolled[:cut + 1], tol)
    second = simplify_polyline(np.vstack([rolled[cut:], rolled[:1]]), tol)
    return np.vstack([first[:-1], second[:-1]])


def inflection_count(contour: "Contour | np.ndarray", tol: float) -> int:
    """Vertex count of the Douglas-Peucker-simplified closed contour."""
    return len(douglas_peucker(contour, tol))
