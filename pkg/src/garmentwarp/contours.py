"""Contour tracing and curvature-aware keypoint sampling on binary masks.

Masks are 2-D numpy arrays (rows = y, cols = x) holding {0, 1}. Point
coordinates everywhere in the package are ``(x, y)`` with pixel centres on
integer positions.
"""

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from skimage import measure

from .errors import (
    ComponentTooSmall,
    InvalidParams,
    NoForeground,
    WindowTooLarge,
)

_EIGHT = np.ones((3, 3), dtype=bool)
_FOUR = ndimage.generate_binary_structure(2, 1)


def as_mask(arr):
    """Validate ``arr`` as a binary mask and return it as a uint8 array."""
    a = np.asarray(arr)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidParams(f"mask must be a non-empty 2-D array, got shape {a.shape}")
    if a.dtype == bool:
        return a.astype(np.uint8)
    if not np.isin(a, (0, 1)).all():
        raise InvalidParams("mask values must be 0 or 1")
    return a.astype(np.uint8, copy=False)


@dataclass(frozen=True, eq=False)
class Contour:
    """Closed polyline. ``points`` is (N, 2) in (x, y); the last vertex
    connects back to the first."""

    points: np.ndarray
    closed: bool = True
    arc_length: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
            raise InvalidParams("a contour needs at least 3 (x, y) points")
        if not np.isfinite(pts).all():
            raise InvalidParams("contour points must be finite")
        seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        if (seg == 0).any():
            raise InvalidParams("contour has consecutive duplicate points")
        if seg.max() > 2.0:
            raise InvalidParams(
                f"contour vertices must be at most 2 px apart (max gap {seg.max():.3f})"
            )
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        arc = np.concatenate(([0.0], np.cumsum(seg[:-1])))
        arc.setflags(write=False)
        object.__setattr__(self, "arc_length", arc)
        object.__setattr__(self, "_perimeter", float(arc[-1] + seg[-1]))

    def __len__(self):
        return len(self.points)

    @property
    def perimeter(self):
        return self._perimeter

    @property
    def area(self):
        """Signed shoelace area; positive for counter-clockwise (x, y) order."""
        return polygon_area(self.points)

    def translated(self, t):
        return Contour(self.points + np.asarray(t, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class CurvatureProfile:
    angles: np.ndarray
    window: int


@dataclass(frozen=True)
class SamplingParams:
    """Keypoint sampling knobs. ``window`` is the curvature chord length in
    vertices."""

    angle_threshold: float = 0.35
    max_gap: float = 15.0
    min_points: int = 32
    window: int = 3

    def __post_init__(self):
        if not self.angle_threshold > 0:
            raise InvalidParams("angle_threshold must be > 0")
        if not self.max_gap > 0:
            raise InvalidParams("max_gap must be > 0")
        if int(self.min_points) != self.min_points or self.min_points < 4:
            raise InvalidParams("min_points must be an integer >= 4")
        if int(self.window) != self.window or self.window < 1:
            raise InvalidParams("window must be an integer >= 1")


def polygon_area(points):
    x, y = np.asarray(points, dtype=np.float64).T
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def boundary_pixels(mask):
    """Foreground pixels with a 4-neighbour in the background (the image
    border counts as background)."""
    m = as_mask(mask).astype(bool)
    return m & ~ndimage.binary_erosion(m, structure=_FOUR, border_value=0)


def _dedupe_closed(pts):
    keep = np.any(pts != np.roll(pts, 1, axis=0), axis=1)
    if not keep.any():
        return pts[:1]
    return pts[keep]


def trace_contours(mask):
    """Trace the outer boundary of every 8-connected foreground component.

    Returns a list of counter-clockwise :class:`Contour` objects in label
    (raster-scan) order. Holes are filled before tracing, and components with
    fewer than 3 boundary pixels are skipped.
    """
    m = as_mask(mask)
    if not m.any():
        raise NoForeground("mask has no foreground pixels")
    labels, n = ndimage.label(m, structure=_EIGHT)
    out = []
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        comp = labels[sl] == lab
        if boundary_pixels(comp).sum() < 3:
            continue
        comp = ndimage.binary_fill_holes(comp)
        padded = np.pad(comp, 1).astype(np.float64)
        traced = measure.find_contours(padded, 0.5, fully_connected="high")
        rc = max(traced, key=len)
        # (row, col) in the padded crop -> (x, y) in the full mask
        pts = np.column_stack((rc[:, 1] + (sl[1].start - 1), rc[:, 0] + (sl[0].start - 1)))
        pts = _dedupe_closed(pts)
        if polygon_area(pts) < 0:
            pts = pts[::-1].copy()
        out.append(Contour(pts))
    if not out:
        raise ComponentTooSmall("every component has fewer than 3 boundary pixels")
    return out


def largest_contour(contours):
    """Contour with the largest enclosed area (first one on ties)."""
    best = contours[0]
    for c in contours[1:]:
        if abs(c.area) > abs(best.area):
            best = c
    return best


def curvature_profile(contour, window=3):
    """Signed turning angle at every vertex, measured between the chords
    ``p[i-window] -> p[i]`` and ``p[i] -> p[i+window]`` (indices wrap)."""
    if int(window) != window or window < 1:
        raise InvalidParams("window must be an integer >= 1")
    pts = contour.points
    if 2 * window >= len(pts):
        raise WindowTooLarge(f"2*window={2 * window} >= {len(pts)} contour points")
    a = pts - np.roll(pts, window, axis=0)
    b = np.roll(pts, -window, axis=0) - pts
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dot = a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]
    return CurvatureProfile(np.arctan2(cross, dot), int(window))


def _subdivisions(gaps, max_gap, min_points):
    counts = [max(1, math.ceil(g / max_gap - 1e-9)) for g in gaps]
    total = sum(counts)
    if total < min_points:
        heap = [(-g / k, i) for i, (g, k) in enumerate(zip(gaps, counts))]
        heapq.heapify(heap)
        while total < min_points:
            _, i = heapq.heappop(heap)
            counts[i] += 1
            total += 1
            heapq.heappush(heap, (-gaps[i] / counts[i], i))
    return counts


def _point_at(contour, s):
    """Point at arc-length position ``s`` in [0, perimeter)."""
    arc = contour.arc_length
    pts = contour.points
    i = int(np.searchsorted(arc, s, side="right")) - 1
    j = (i + 1) % len(pts)
    seg_end = arc[j] if j else contour.perimeter
    t = (s - arc[i]) / (seg_end - arc[i])
    return pts[i] + t * (pts[j] - pts[i])


def sample_keypoints(contour, profile, params=None):
    """Keep high-curvature vertices, then fill in along the arc.

    Every vertex with ``|angle| >= angle_threshold`` is kept. The arcs between
    kept vertices are split uniformly so no two consecutive samples are more
    than ``max_gap`` apart, and split further (longest spacing first) until at
    least ``min_points`` samples exist. With no curvature hits the contour is
    resampled uniformly starting at vertex 0. Output follows contour order.
    """
    params = params or SamplingParams()
    if len(profile.angles) != len(contour):
        raise InvalidParams("curvature profile does not match contour")
    anchors = np.flatnonzero(np.abs(profile.angles) >= params.angle_threshold)
    if len(anchors) == 0:
        anchors = np.array([0])
    arc = contour.arc_length
    perim = contour.perimeter
    starts = arc[anchors]
    ends = np.append(starts[1:], starts[0] + perim)
    gaps = (ends - starts).tolist()
    counts = _subdivisions(gaps, params.max_gap, params.min_points)

    out = []
    for a, s0, g, k in zip(anchors, starts, gaps, counts):
        out.append(contour.points[a])
        for t in range(1, k):
            s = s0 + t * g / k
            if s >= perim:
                s -= perim
            out.append(_point_at(contour, s))
    return np.array(out, dtype=np.float64)


def keypoints_from_mask(mask, params=None, all_components=False):
    """Trace ``mask`` and sample keypoints from its largest component (or from
    every component, concatenated in label order)."""
    params = params or SamplingParams()
    contours = trace_contours(mask)
    chosen = contours if all_components else [largest_contour(contours)]
    parts = [
        sample_keypoints(c, curvature_profile(c, params.window), params) for c in chosen
    ]
    return np.concatenate(parts, axis=0)


def distance_to_polyline(points, contour):
    """Distance from each point to the closed polyline (brute force)."""
    p = np.asarray(points, dtype=np.float64)[:, None, :]
    a = contour.points[None, :, :]
    b = np.roll(contour.points, -1, axis=0)[None, :, :]
    ab = b - a
    t = np.clip(((p - a) * ab).sum(-1) / (ab * ab).sum(-1), 0.0, 1.0)
    proj = a + t[..., None] * ab
    return np.linalg.norm(p - proj, axis=-1).min(axis=1)
