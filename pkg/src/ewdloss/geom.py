"""Oriented-box and polygon geometry.

Conventions used throughout the package:

* image coordinates, y pointing down;
* "clockwise" means positive shoelace signed area in those coordinates;
* angles in radians.

A box ``(cx, cy, w, h, theta)`` has width vector ``u = w (cos t, sin t)``
and height vector ``v = h (-sin t, cos t)``.  Its corners, clockwise, are
``o - u/2 - v/2``, ``o + u/2 - v/2``, ``o + u/2 + v/2``, ``o - u/2 + v/2``,
so edge 0 is a width edge centred at ``o - v/2``, edge 1 a height edge
centred at ``o + u/2``, and so on.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from ._backend import kernels

HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class OBox5:
    """Rotated rectangle: centre, width, height and angle (radians)."""

    cx: float
    cy: float
    w: float
    h: float
    theta: float

    def __post_init__(self):
        vals = (self.cx, self.cy, self.w, self.h, self.theta)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box parameters: {vals}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box sides must be positive, got w={self.w}, h={self.h}")

    @classmethod
    def from_degrees(cls, cx, cy, w, h, theta_deg) -> "OBox5":
        return cls(float(cx), float(cy), float(w), float(h), math.radians(theta_deg))

    def astuple(self) -> tuple:
        return (self.cx, self.cy, self.w, self.h, self.theta)

    def asarray(self) -> np.ndarray:
        return np.array(self.astuple(), dtype=float)


class BoxDef(enum.Enum):
    """Angle-range conventions for the 5-parameter representation."""

    OC = "oc"    # theta in [-pi/2, 0)
    LE = "le"    # w >= h, theta in [-pi/2, pi/2)
    MIN = "min"  # theta in [-pi/4, pi/4)


Point = tuple


@dataclass(frozen=True)
class DirectedEdge:
    p0: Point
    p1: Point

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.p0, float) + np.asarray(self.p1, float))

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.p1, float) - np.asarray(self.p0, float)

    @property
    def length(self) -> float:
        return float(np.hypot(*self.vector))

    @property
    def angle(self) -> float:
        v = self.vector
        return math.atan2(v[1], v[0])


@dataclass(frozen=True)
class EdgeSeq:
    """Closed directed edge sequence."""

    edges: tuple

    def __post_init__(self):
        n = len(self.edges)
        if n < 3:
            raise ValueError("an edge sequence needs at least 3 edges")
        for i, e in enumerate(self.edges):
            nxt = self.edges[(i + 1) % n]
            if max(abs(float(a) - float(b)) for a, b in zip(e.p1, nxt.p0)) > 1e-9:
                raise ValueError(f"edge {i} does not end where edge {(i + 1) % n} starts")

    def __len__(self):
        return len(self.edges)

    @classmethod
    def from_polygon(cls, points) -> "EdgeSeq":
        pts = [tuple(float(c) for c in p) for p in np.asarray(points, float)]
        n = len(pts)
        return cls(tuple(DirectedEdge(pts[i], pts[(i + 1) % n]) for i in range(n)))

    def vertices(self) -> np.ndarray:
        return np.array([e.p0 for e in self.edges], dtype=float)

    def centers(self) -> np.ndarray:
        return np.array([e.center for e in self.edges])

    def vectors(self) -> np.ndarray:
        return np.array([e.vector for e in self.edges])

    def signed_area(self) -> float:
        return signed_area(self.vertices())


@dataclass(frozen=True)
class Quad:
    """Four corners in clockwise order (y-down)."""

    corners: tuple

    def __post_init__(self):
        pts = np.asarray(self.corners, dtype=float)
        if pts.shape != (4, 2) or not np.all(np.isfinite(pts)):
            raise ValueError("a quad needs four finite 2-D corners")
        if signed_area(pts) <= 0:
            raise ValueError("quad corners must be clockwise (positive signed area, y-down)")
        object.__setattr__(self, "corners", tuple(tuple(float(c) for c in p) for p in pts))

    @classmethod
    def clockwise(cls, points) -> "Quad":
        """Build a quad, reversing the order if the points run counter-clockwise."""
        pts = np.asarray(points, dtype=float)
        if signed_area(pts) < 0:
            pts = pts[::-1]
        return cls(tuple(map(tuple, pts)))

    def asarray(self) -> np.ndarray:
        return np.array(self.corners, dtype=float)

    def edges(self) -> EdgeSeq:
        return EdgeSeq.from_polygon(self.corners)


def signed_area(points) -> float:
    """Shoelace signed area; positive means clockwise in image coordinates."""
    pts = np.asarray(points, dtype=float)
    return float(kernels.signed_area(pts[:, 0].tolist(), pts[:, 1].tolist()))


def box_axes(b: OBox5):
    """Width and height vectors of ``b``."""
    c, s = math.cos(b.theta), math.sin(b.theta)
    return np.array([b.w * c, b.w * s]), np.array([-b.h * s, b.h * c])


def corners_array(b: OBox5) -> np.ndarray:
    o = np.array([b.cx, b.cy])
    u, v = box_axes(b)
    return np.array([o - 0.5 * u - 0.5 * v, o + 0.5 * u - 0.5 * v,
                     o + 0.5 * u + 0.5 * v, o - 0.5 * u + 0.5 * v])


def to_corners(b: OBox5) -> Quad:
    return Quad(tuple(map(tuple, corners_array(b))))


def to_edges(b: OBox5) -> EdgeSeq:
    """Clockwise edges; edge 0 is the width edge centred at ``o - v/2``."""
    return EdgeSeq.from_polygon(corners_array(b))


def shift(b: OBox5, k: int) -> OBox5:
    """Re-express ``b`` so that its edge ``j`` is the old edge ``j - k``.

    The rectangle is unchanged; only the parameterisation moves.
    """
    k %= 4
    w, h = (b.w, b.h) if k % 2 == 0 else (b.h, b.w)
    return OBox5(b.cx, b.cy, w, h, b.theta - k * HALF_PI)


def rotate(b: OBox5, dtheta: float) -> OBox5:
    return OBox5(b.cx, b.cy, b.w, b.h, b.theta + dtheta)


def _reduce_quarter(b: OBox5, lo: float) -> OBox5:
    # move theta into [lo, lo + pi/2) in quarter turns, swapping sides on odd turns
    n = math.floor((b.theta - lo) / HALF_PI)
    theta = b.theta - n * HALF_PI
    w, h = (b.w, b.h) if n % 2 == 0 else (b.h, b.w)
    if theta >= lo + HALF_PI:
        theta -= HALF_PI
        w, h = h, w
    elif theta < lo:
        theta += HALF_PI
        w, h = h, w
    return OBox5(b.cx, b.cy, w, h, theta)


def canonicalize(b: OBox5, box_def: BoxDef) -> OBox5:
    """Same rectangle, with ``theta`` moved into the definition's range."""
    if box_def is BoxDef.OC:
        return _reduce_quarter(b, -HALF_PI)
    if box_def is BoxDef.MIN:
        return _reduce_quarter(b, -0.5 * HALF_PI)
    if box_def is not BoxDef.LE:
        raise ValueError(f"unknown box definition {box_def!r}")
    w, h, theta = b.w, b.h, b.theta
    if w < h:
        w, h, theta = h, w, theta + HALF_PI
    theta = theta - math.pi * math.floor((theta + HALF_PI) / math.pi)
    if theta >= HALF_PI:
        theta -= math.pi
    elif theta < -HALF_PI:
        theta += math.pi
    return OBox5(b.cx, b.cy, w, h, theta)


PolygonLike = Union[OBox5, Quad, Sequence, np.ndarray]


def as_polygon(p: PolygonLike) -> np.ndarray:
    if isinstance(p, OBox5):
        return corners_array(p)
    if isinstance(p, Quad):
        return p.asarray()
    return np.ascontiguousarray(np.asarray(p, dtype=float))


def polygon_area(p: PolygonLike) -> float:
    return abs(signed_area(as_polygon(p)))


def rotated_iou(a: PolygonLike, b: PolygonLike) -> float:
    """Intersection over union of two convex polygons.

    Degenerate (zero-area) inputs give 0 rather than raising.
    """
    pa = np.ascontiguousarray(as_polygon(a))
    pb = np.ascontiguousarray(as_polygon(b))
    inter = kernels.convex_overlap_area(pa, pb)
    area_a = abs(signed_area(pa))
    area_b = abs(signed_area(pb))
    union = area_a + area_b - inter
    if area_a == 0.0 or area_b == 0.0 or union <= 0.0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def same_point_set(a: Iterable, b: Iterable, tol: float = 1e-9) -> bool:
    """True when two corner lists hold the same points in any order."""
    pa = np.asarray(list(a), float)
    pb = np.asarray(list(b), float)
    if pa.shape != pb.shape:
        return False
    used = np.zeros(len(pb), bool)
    for p in pa:
        d = np.max(np.abs(pb - p), axis=1)
        d[used] = np.inf
        j = int(np.argmin(d))
        if d[j] > tol:
            return False
        used[j] = True
    return True
