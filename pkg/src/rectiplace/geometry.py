"""Rectilinear shapes: validation, rectangle decomposition, orientation, rasterization.

Coordinates are microns with y pointing up. Corner lists are stored clockwise,
starting at the lexicographically smallest corner.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

Point = tuple[float, float]

_SNAP = 1e-9


class GeometryError(ValueError):
    pass


class NotAxisParallel(GeometryError):
    pass


class SelfIntersecting(GeometryError):
    pass


class OddCornerCount(GeometryError):
    pass


class Rect(NamedTuple):
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def translate(self, dx: float, dy: float) -> "Rect":
        return Rect(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)

    def intersects(self, other: "Rect") -> bool:
        """Positive-area overlap; touching edges do not count."""
        return (min(self.x1, other.x1) > max(self.x0, other.x0)
                and min(self.y1, other.y1) > max(self.y0, other.y0))


class Side(str, enum.Enum):
    N = "N"
    E = "E"
    S = "S"
    W = "W"


class Orientation(str, enum.Enum):
    """Placement transforms without 90 degree rotation.

    MX mirrors across the x axis (y flips, N<->S), MY mirrors across the
    y axis (x flips, E<->W), R180 does both.
    """

    R0 = "R0"
    MX = "MX"
    MY = "MY"
    R180 = "R180"

    @property
    def flips_y(self) -> bool:
        return self in (Orientation.MX, Orientation.R180)

    @property
    def flips_x(self) -> bool:
        return self in (Orientation.MY, Orientation.R180)

    @classmethod
    def from_flips(cls, flip_x: bool, flip_y: bool) -> "Orientation":
        return _FROM_FLIPS[(bool(flip_x), bool(flip_y))]

    def compose(self, other: "Orientation") -> "Orientation":
        return Orientation.from_flips(self.flips_x ^ other.flips_x, self.flips_y ^ other.flips_y)

    def inverse(self) -> "Orientation":
        # every element of this group is its own inverse
        return self

    @property
    def index(self) -> int:
        return ORIENTATIONS.index(self)


_FROM_FLIPS = {
    (False, False): Orientation.R0,
    (False, True): Orientation.MX,
    (True, False): Orientation.MY,
    (True, True): Orientation.R180,
}
ORIENTATIONS: tuple[Orientation, ...] = (Orientation.R0, Orientation.MX, Orientation.MY, Orientation.R180)


def orient_side(side: Side, o: Orientation) -> Side:
    side = Side(side)
    if o.flips_y and side in (Side.N, Side.S):
        side = Side.S if side is Side.N else Side.N
    if o.flips_x and side in (Side.E, Side.W):
        side = Side.W if side is Side.E else Side.E
    return side


def orient_point(pt: Point, width: float, height: float, o: Orientation) -> Point:
    """Map a point of an origin-anchored width x height frame under ``o``."""
    x, y = pt
    if o.flips_x:
        x = width - x
    if o.flips_y:
        y = height - y
    return (x, y)


def _snap(v: float) -> float:
    r = round(v)
    if abs(v - r) <= _SNAP * max(1.0, abs(v)):
        return float(r)
    return v


def signed_area(corners: Sequence[Point]) -> float:
    """Shoelace area; negative for clockwise winding."""
    s = 0.0
    n = len(corners)
    for i in range(n):
        x0, y0 = corners[i]
        x1, y1 = corners[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def _edges(corners: Sequence[Point]):
    n = len(corners)
    return [(corners[i], corners[(i + 1) % n]) for i in range(n)]


def _segments_touch(a: tuple[Point, Point], b: tuple[Point, Point]) -> bool:
    (ax0, ay0), (ax1, ay1) = a
    (bx0, by0), (bx1, by1) = b
    a_h = ay0 == ay1
    b_h = by0 == by1
    if a_h and b_h:
        return ay0 == by0 and min(max(ax0, ax1), max(bx0, bx1)) >= max(min(ax0, ax1), min(bx0, bx1))
    if not a_h and not b_h:
        return ax0 == bx0 and min(max(ay0, ay1), max(by0, by1)) >= max(min(ay0, ay1), min(by0, by1))
    if not a_h:
        a, b = b, a
        (ax0, ay0), (ax1, ay1) = a
        (bx0, by0), (bx1, by1) = b
    # a horizontal, b vertical
    return (min(ax0, ax1) <= bx0 <= max(ax0, ax1)) and (min(by0, by1) <= ay0 <= max(by0, by1))


@dataclass(frozen=True)
class RectilinearShape:
    """Axis-parallel simple polygon.

    Build through :func:`validate_rectilinear` (or :meth:`from_corners`);
    the plain constructor trusts its input.
    """

    corners: tuple[Point, ...]

    @classmethod
    def from_corners(cls, corners: Iterable[Sequence[float]]) -> "RectilinearShape":
        return validate_rectilinear(corners)

    @classmethod
    def rectangle(cls, width: float, height: float, x: float = 0.0, y: float = 0.0) -> "RectilinearShape":
        return validate_rectilinear([(x, y), (x, y + height), (x + width, y + height), (x + width, y)])

    @cached_property
    def bbox(self) -> Rect:
        xs = [p[0] for p in self.corners]
        ys = [p[1] for p in self.corners]
        return Rect(min(xs), min(ys), max(xs), max(ys))

    @property
    def width(self) -> float:
        return self.bbox.width

    @property
    def height(self) -> float:
        return self.bbox.height

    @cached_property
    def area(self) -> float:
        return abs(signed_area(self.corners))

    @cached_property
    def rects(self) -> tuple[Rect, ...]:
        return tuple(decompose_rectilinear(self))

    @property
    def is_rectangle(self) -> bool:
        return len(self.corners) == 4

    def translate(self, dx: float, dy: float) -> "RectilinearShape":
        return RectilinearShape(tuple((x + dx, y + dy) for x, y in self.corners))

    def normalized(self) -> "RectilinearShape":
        """Same shape with its bbox min corner at the origin."""
        b = self.bbox
        if b.x0 == 0 and b.y0 == 0:
            return self
        return self.translate(-b.x0, -b.y0)

    def edge_sides(self, pt: Point, tol: float = 1e-9) -> set[Side]:
        """Outward sides of every edge containing ``pt`` (empty if off-boundary)."""
        x, y = pt
        sides = set()
        for (x0, y0), (x1, y1) in _edges(self.corners):
            if y0 == y1:
                if abs(y - y0) <= tol and min(x0, x1) - tol <= x <= max(x0, x1) + tol:
                    # clockwise with y up: outward normal is the left normal
                    sides.add(Side.N if x1 > x0 else Side.S)
            else:
                if abs(x - x0) <= tol and min(y0, y1) - tol <= y <= max(y0, y1) + tol:
                    sides.add(Side.W if y1 > y0 else Side.E)
        return sides

    def contains_point(self, pt: Point, tol: float = 1e-9) -> bool:
        """Closed containment (boundary counts as inside)."""
        x, y = pt
        return any(r.x0 - tol <= x <= r.x1 + tol and r.y0 - tol <= y <= r.y1 + tol for r in self.rects)


def validate_rectilinear(corners: Iterable[Sequence[float]]) -> RectilinearShape:
    """Check a corner list and return the normalized shape.

    Raises NotAxisParallel, OddCornerCount or SelfIntersecting. The result is
    wound clockwise and starts at the lexicographically smallest corner.
    """
    pts = [(float(p[0]), float(p[1])) for p in corners]
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts.pop()
    for a, b in _edges(pts):
        if a[0] != b[0] and a[1] != b[1]:
            raise NotAxisParallel(f"edge {a} -> {b} is not axis-parallel")
    if len(pts) % 2:
        raise OddCornerCount(f"{len(pts)} corners; a rectilinear polygon needs an even count")
    if len(pts) < 4:
        raise GeometryError(f"{len(pts)} corners; at least 4 are required")

    # drop repeated points and merge collinear runs
    dedup = [p for i, p in enumerate(pts) if p != pts[i - 1]]
    changed = True
    while changed and len(dedup) >= 3:
        changed = False
        n = len(dedup)
        for i in range(n):
            a, b, c = dedup[i - 1], dedup[i], dedup[(i + 1) % n]
            if (a[0] == b[0] == c[0]) or (a[1] == b[1] == c[1]):
                # spike: the path doubles back on itself
                if (b[0] - a[0]) * (c[0] - b[0]) < 0 or (b[1] - a[1]) * (c[1] - b[1]) < 0:
                    raise SelfIntersecting(f"edge doubles back at {b}")
                del dedup[i]
                changed = True
                break
    if len(dedup) < 4:
        raise SelfIntersecting("degenerate polygon")

    edges = _edges(dedup)
    n = len(edges)
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_touch(edges[i], edges[j]):
                raise SelfIntersecting(f"edges {edges[i]} and {edges[j]} intersect")

    area = signed_area(dedup)
    if area == 0:
        raise SelfIntersecting("zero-area polygon")
    if area > 0:
        dedup.reverse()
    k = min(range(len(dedup)), key=lambda i: dedup[i])
    return RectilinearShape(tuple(dedup[k:] + dedup[:k]))


def _horizontal_edges(shape: RectilinearShape):
    return [(min(a[0], b[0]), max(a[0], b[0]), a[1]) for a, b in _edges(shape.corners) if a[1] == b[1]]


def _slab_intervals(hedges, xa: float, xb: float) -> list[tuple[float, float]]:
    xm = 0.5 * (xa + xb)
    ys = sorted(y for x0, x1, y in hedges if x0 < xm < x1)
    return list(zip(ys[0::2], ys[1::2]))


def _sweep(xs: Sequence[float], intervals_of) -> list[Rect]:
    """Vertical slab sweep; identical intervals in adjacent slabs are merged."""
    out: list[Rect] = []
    open_: dict[tuple[float, float], float] = {}
    for xa, xb in zip(xs, xs[1:]):
        cur = set(intervals_of(xa, xb))
        for iv in list(open_):
            if iv not in cur:
                out.append(Rect(open_.pop(iv), iv[0], xa, iv[1]))
        for iv in cur:
            open_.setdefault(iv, xa)
    if xs:
        for iv, x0 in open_.items():
            out.append(Rect(x0, iv[0], xs[-1], iv[1]))
    out.sort(key=lambda r: (r.x0, r.y0))
    return out


def decompose_rectilinear(shape: RectilinearShape) -> list[Rect]:
    """Split into interior-disjoint rectangles with a vertical slab sweep."""
    hedges = _horizontal_edges(shape)
    xs = sorted({p[0] for p in shape.corners})
    return _sweep(xs, lambda xa, xb: _slab_intervals(hedges, xa, xb))


def complement_nonplaceable(canvas: RectilinearShape, bounding: Rect | None = None) -> list[Rect]:
    """Rectangles covering ``bounding`` minus the canvas polygon."""
    if bounding is None:
        bounding = canvas.bbox
    hedges = _horizontal_edges(canvas)
    xs = sorted({p[0] for p in canvas.corners if bounding.x0 <= p[0] <= bounding.x1} | {bounding.x0, bounding.x1})

    def gaps(xa, xb):
        cur = bounding.y0
        res = []
        for y0, y1 in _slab_intervals(hedges, xa, xb):
            y0, y1 = max(y0, bounding.y0), min(y1, bounding.y1)
            if y0 > cur:
                res.append((cur, y0))
            cur = max(cur, y1)
        if cur < bounding.y1:
            res.append((cur, bounding.y1))
        return res

    return _sweep(xs, gaps)


def apply_orientation(shape: RectilinearShape, o: Orientation) -> RectilinearShape:
    s = shape.normalized()
    if o is Orientation.R0:
        return s
    w, h = s.width, s.height
    return validate_rectilinear([orient_point(p, w, h, o) for p in s.corners])


def cell_span(lo: float, hi: float, cell: float) -> tuple[int, int]:
    """Half-open index range of cells with positive overlap with [lo, hi]."""
    return int(math.floor(_snap(lo / cell))), int(math.ceil(_snap(hi / cell)))


def footprint(shape: RectilinearShape, cell_w: float, cell_h: float) -> np.ndarray:
    """Boolean (rows, cols) mask of cells covered by the shape anchored at cell (0, 0)."""
    s = shape.normalized()
    _, ncols = cell_span(0.0, s.width, cell_w)
    _, nrows = cell_span(0.0, s.height, cell_h)
    fp = np.zeros((max(nrows, 1), max(ncols, 1)), dtype=bool)
    for r in s.rects:
        c0, c1 = cell_span(r.x0, r.x1, cell_w)
        r0, r1 = cell_span(r.y0, r.y1, cell_h)
        fp[r0:r1, c0:c1] = True
    return fp


def rasterize_shape(shape: RectilinearShape, cell_w: float, cell_h: float,
                    anchor: tuple[int, int] = (0, 0)) -> set[tuple[int, int]]:
    """Cells (row, col) with positive overlap when the bbox min sits at ``anchor``."""
    if cell_w <= 0 or cell_h <= 0:
        raise ValueError("cell dimensions must be positive")
    fp = footprint(shape, cell_w, cell_h)
    ar, ac = anchor
    return {(int(r) + ar, int(c) + ac) for r, c in zip(*np.nonzero(fp))}


def rect_coverage(rect: Rect, cell_w: float, cell_h: float, nrows: int, ncols: int,
                  origin: Point = (0.0, 0.0)) -> np.ndarray:
    """Overlap area of ``rect`` with every grid cell, shape (nrows, ncols)."""
    ox, oy = origin
    xe = ox + cell_w * np.arange(ncols + 1)
    ye = oy + cell_h * np.arange(nrows + 1)
    ox_ = np.clip(np.minimum(xe[1:], rect.x1) - np.maximum(xe[:-1], rect.x0), 0.0, None)
    oy_ = np.clip(np.minimum(ye[1:], rect.y1) - np.maximum(ye[:-1], rect.y0), 0.0, None)
    return np.outer(oy_, ox_)
