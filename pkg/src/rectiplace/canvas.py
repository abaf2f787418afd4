"""Placement grid, occupancy and the position-mask stack.

Grid cells are indexed (row, col) with row 0 at the bottom of the canvas
bounding box. A macro's anchor is the cell holding its bbox min corner. All
masks are ``n_max x n_max`` boolean arrays; cells past the real grid are 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy import ndimage

from .geometry import RectilinearShape, cell_span, complement_nonplaceable, rect_coverage
from .netlist import Netlist

N_MAX = 128
FREE = -1
BLOCKED = -2
NO_LEGAL_ACTION_PENALTY = -10.0

_EIGHT = np.ones((3, 3), dtype=bool)


class IllegalPlacement(Exception):
    pass


class NoLegalAction(Exception):
    pass


@dataclass(frozen=True)
class GridSpec:
    n_rows: int
    n_cols: int
    cell_w: float
    cell_h: float
    canvas: RectilinearShape
    n_max: int = N_MAX

    def __post_init__(self):
        if not (1 <= self.n_rows <= self.n_max and 1 <= self.n_cols <= self.n_max):
            raise ValueError(f"grid {self.n_rows}x{self.n_cols} outside 1..{self.n_max}")
        if not (self.cell_w > 0 and self.cell_h > 0):
            raise ValueError("cell dimensions must be positive")

    @property
    def origin(self) -> tuple[float, float]:
        b = self.canvas.bbox
        return (b.x0, b.y0)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def cell_area(self) -> float:
        return self.cell_w * self.cell_h

    def cell_origin(self, row: int, col: int) -> tuple[float, float]:
        ox, oy = self.origin
        return (ox + col * self.cell_w, oy + row * self.cell_h)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        ox, oy = self.origin
        c = min(max(int(math.floor((x - ox) / self.cell_w)), 0), self.n_cols - 1)
        r = min(max(int(math.floor((y - oy) / self.cell_h)), 0), self.n_rows - 1)
        return r, c

    def index(self, row: int, col: int) -> int:
        """Flat action index in the n_max x n_max space."""
        return row * self.n_max + col

    def unindex(self, idx: int) -> tuple[int, int]:
        return divmod(int(idx), self.n_max)

    @cached_property
    def placeable(self) -> np.ndarray:
        """Cells lying entirely inside the canvas polygon."""
        ok = np.ones(self.shape, dtype=bool)
        ox, oy = self.origin
        for r in complement_nonplaceable(self.canvas):
            c0, c1 = cell_span(r.x0 - ox, r.x1 - ox, self.cell_w)
            r0, r1 = cell_span(r.y0 - oy, r.y1 - oy, self.cell_h)
            ok[max(r0, 0):r1, max(c0, 0):c1] = False
        b = self.canvas.bbox
        # grid may overhang the bbox when the cell size does not divide it
        ok[:, int(math.floor(b.width / self.cell_w + 1e-9)):] = False
        ok[int(math.floor(b.height / self.cell_h + 1e-9)):, :] = False
        ok.setflags(write=False)
        return ok

    @cached_property
    def ring(self) -> np.ndarray:
        """Outermost placeable cells: 8-neighbours of non-placeable cells or the grid edge."""
        inner = ndimage.binary_erosion(self.placeable, structure=_EIGHT, border_value=0)
        ring = self.placeable & ~inner
        ring.setflags(write=False)
        return ring


def make_grid(canvas: RectilinearShape, n_rows: int, n_cols: int, n_max: int = N_MAX) -> GridSpec:
    b = canvas.bbox
    return GridSpec(n_rows, n_cols, b.width / n_cols, b.height / n_rows, canvas, n_max)


def select_grid_dims(n: Netlist, n_max: int = N_MAX) -> GridSpec:
    """Cells sized so the smallest macro fits in one cell, capped at n_max per side."""
    if not n.macros:
        raise ValueError("grid selection needs at least one macro")
    b = n.canvas.bbox
    cell_w = min(m.width for m in n.macros)
    cell_h = min(m.height for m in n.macros)
    n_cols = max(1, math.ceil(b.width / cell_w - 1e-9))
    n_rows = max(1, math.ceil(b.height / cell_h - 1e-9))
    if n_cols > n_max:
        n_cols, cell_w = n_max, b.width / n_max
    if n_rows > n_max:
        n_rows, cell_h = n_max, b.height / n_max
    return GridSpec(n_rows, n_cols, cell_w, cell_h, n.canvas, n_max)


class Box(NamedTuple):
    """Footprint bounding box on the grid, in cells."""
    row: int
    col: int
    h: int
    w: int


class Occupancy:
    """Per-cell owner (macro index, FREE or BLOCKED) plus macro area density."""

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.owner = np.full(spec.shape, FREE, dtype=np.int32)
        self.owner[~spec.placeable] = BLOCKED
        self.density = np.zeros(spec.shape, dtype=float)
        self.placed: dict[int, tuple[tuple[int, int], object]] = {}
        self.boxes: dict[int, Box] = {}

    @property
    def free(self) -> np.ndarray:
        return self.owner == FREE

    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.owner != FREE))

    def copy(self) -> "Occupancy":
        o = Occupancy.__new__(Occupancy)
        o.spec = self.spec
        o.owner = self.owner.copy()
        o.density = self.density.copy()
        o.placed = dict(self.placed)
        o.boxes = dict(self.boxes)
        return o


def _embed(spec: GridSpec, grid_mask: np.ndarray) -> np.ndarray:
    out = np.zeros((spec.n_max, spec.n_max), dtype=bool)
    h, w = grid_mask.shape
    out[:h, :w] = grid_mask
    return out


def _anchor_window(spec: GridSpec, fp: np.ndarray) -> tuple[int, int]:
    return spec.n_rows - fp.shape[0] + 1, spec.n_cols - fp.shape[1] + 1


def overlap_free_mask(occ: Occupancy, fp: np.ndarray) -> np.ndarray:
    """Anchors where footprint ``fp`` stays on the grid and covers only free cells."""
    spec = occ.spec
    H, W = _anchor_window(spec, fp)
    if H <= 0 or W <= 0:
        return np.zeros((spec.n_max, spec.n_max), dtype=bool)
    free = occ.free
    ok = np.ones((H, W), dtype=bool)
    for r, c in np.argwhere(fp):
        ok &= free[r:r + H, c:c + W]
    return _embed(spec, ok)


def boundary_mask(spec: GridSpec, fp: np.ndarray) -> np.ndarray:
    """In-grid anchors whose footprint touches the outer placeable ring of the canvas."""
    H, W = _anchor_window(spec, fp)
    if H <= 0 or W <= 0:
        return np.zeros((spec.n_max, spec.n_max), dtype=bool)
    ring = spec.ring
    hit = np.zeros((H, W), dtype=bool)
    for r, c in np.argwhere(fp):
        hit |= ring[r:r + H, c:c + W]
    return _embed(spec, hit)


def alignment_centers(xp: int, yp: int, wp: int, hp: int, wc: int, hc: int):
    """Candidate centers of the current macro next to a placed one, in cells.

    Returns ``(x_lr, y_lr, x_tb, y_tb)``: left/right neighbours take any
    combination of ``x_lr`` and ``y_lr``, top/bottom neighbours any of
    ``x_tb`` and ``y_tb``.
    """
    dx_lr = wp // 2 + wc // 2
    dy_lr = (hp - hc) // 2
    dx_tb = (wp - wc) // 2
    dy_tb = hp // 2 + hc // 2
    return ((xp - dx_lr, xp + dx_lr), (yp - dy_lr, yp + dy_lr),
            (xp - dx_tb, xp + dx_tb), (yp - dy_tb, yp + dy_tb))


def adjacency_anchors(placed: Box, h: int, w: int) -> list[tuple[int, int]]:
    """Anchors putting an h x w box flush against ``placed`` with one edge aligned.

    For even sizes these are exactly the centers of :func:`alignment_centers`
    shifted back by the half extent; the explicit form also stays flush for
    odd sizes.
    """
    r, c, hp, wp = placed
    lr = [(row, col) for col in (c - w, c + wp) for row in (r, r + hp - h)]
    tb = [(row, col) for row in (r - h, r + hp) for col in (c, c + wp - w)]
    seen, out = set(), []
    for a in lr + tb:
        if a not in seen:
            seen.add(a)
            out.append(a)
    return out


def hierarchy_adjacency_mask(spec: GridSpec, placed: Sequence[Box], fp: np.ndarray,
                             occ: Occupancy | None = None) -> np.ndarray:
    """Edge-aligned anchors next to already placed macros of the same group."""
    h, w = fp.shape
    H, W = _anchor_window(spec, fp)
    out = np.zeros((spec.n_max, spec.n_max), dtype=bool)
    for box in placed:
        for row, col in adjacency_anchors(box, h, w):
            if 0 <= row < H and 0 <= col < W:
                out[row, col] = True
    if occ is not None:
        out &= overlap_free_mask(occ, fp)
    return out


def dilate(mask: np.ndarray, spec: GridSpec, fp: np.ndarray) -> np.ndarray:
    H, W = _anchor_window(spec, fp)
    d = ndimage.binary_dilation(mask, structure=_EIGHT)
    valid = np.zeros_like(d)
    valid[:max(H, 0), :max(W, 0)] = True
    return d & valid


MASK_LEVELS = ("hierarchy", "hierarchy_dilated", "boundary", "free")


def compose_position_mask(occ: Occupancy, fps: Sequence[np.ndarray],
                          same_group: Sequence[Box]) -> tuple[np.ndarray, str]:
    """Per-orientation masks for the current macro and the ladder level used.

    First macro of a group: boundary ring. Later macros: edge alignment with
    placed group members. When a level leaves no legal anchor the next one is
    tried: dilated alignment, boundary, then any overlap-free anchor.
    Raises NoLegalAction when even that is empty.
    """
    spec = occ.spec
    cache: dict[bytes, np.ndarray] = {}

    def key(fp):
        return fp.shape[0].to_bytes(2, "little") + fp.tobytes()

    free = []
    for fp in fps:
        k = key(fp)
        if k not in cache:
            cache[k] = overlap_free_mask(occ, fp)
        free.append(cache[k])
    free = np.stack(free)

    if same_group:
        hier = np.stack([hierarchy_adjacency_mask(spec, same_group, fp) for fp in fps])
        m = hier & free
        if m.any():
            return m, "hierarchy"
        m = np.stack([dilate(hm, spec, fp) for hm, fp in zip(hier, fps)]) & free
        if m.any():
            return m, "hierarchy_dilated"
    m = np.stack([boundary_mask(spec, fp) for fp in fps]) & free
    if m.any():
        return m, "boundary"
    if free.any():
        return free, "free"
    raise NoLegalAction("no overlap-free anchor left for the current macro")


def commit_placement(occ: Occupancy, macro_idx: int, fp: np.ndarray, anchor: tuple[int, int],
                     shape: RectilinearShape | None = None, orientation=None) -> Occupancy:
    """Mark the footprint cells as owned by ``macro_idx`` (in place).

    ``shape`` is the oriented macro shape; when given its exact covered area
    is added to the density grid. Raises IllegalPlacement on any conflict.
    """
    spec = occ.spec
    if macro_idx in occ.placed:
        raise IllegalPlacement(f"macro {macro_idx} already placed")
    row, col = anchor
    fh, fw = fp.shape
    if row < 0 or col < 0 or row + fh > spec.n_rows or col + fw > spec.n_cols:
        raise IllegalPlacement(f"anchor {anchor} puts the macro off the grid")
    window = occ.owner[row:row + fh, col:col + fw]
    if np.any(window[fp] != FREE):
        raise IllegalPlacement(f"anchor {anchor} overlaps occupied cells")
    window[fp] = macro_idx
    occ.placed[macro_idx] = ((row, col), orientation)
    occ.boxes[macro_idx] = Box(row, col, fh, fw)
    if shape is not None:
        x, y = spec.cell_origin(row, col)
        for r in shape.normalized().rects:
            occ.density += rect_coverage(r.translate(x, y), spec.cell_w, spec.cell_h,
                                         spec.n_rows, spec.n_cols, spec.origin) / spec.cell_area
    return occ


def write_pgm(mask: np.ndarray, path: str | Path) -> None:
    """Binary PGM, one byte per cell (0 or 255), top image row = highest grid row."""
    img = np.flipud(np.asarray(mask)).astype(np.uint8) * 255
    h, w = img.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + img.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    w, h = map(int, parts[1].split())
    img = np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)
    return np.flipud(img) > 0
