"""Simulated-annealing refinement on a fine grid.

Macros move on a grid about 2000 cells across, obtained by splitting every
coarse cell into ``k x k`` fine cells, so coarse anchors map onto it
exactly. Footprints are kept as integer rectangles in fine-cell units; the
dense occupancy image is only built on request.

Moves are shift (slide toward the nearest canvas edge until contact), swap
(two congruent macros of one group trade places) and flip (mirror in x or
y), drawn with equal probability. A move that causes overlap or blocks a pin
is undone whatever the temperature.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .canvas import GridSpec, Occupancy, overlap_free_mask, select_grid_dims
from .env import place_clusters
from .geometry import ORIENTATIONS, Orientation, Side, apply_orientation, complement_nonplaceable, orient_point, orient_side
from .netlist import Netlist
from .placement import MacroPlacement, Placement
from .proxy import CostModel, ProxyCosts, RewardWeights

FINE_TARGET = 2000
EPS = 1e-9
MOVES = ("shift", "swap", "flip")
SCRATCH_MOVES = MOVES + ("relocate",)
_DIRS = ((-1, 0), (0, -1), (1, 0), (0, 1))  # -x, -y, +x, +y: ties go to the earlier entry


class RefineError(RuntimeError):
    pass


class NoEligiblePair(RefineError):
    pass


@dataclass(frozen=True)
class SASchedule:
    t0: float | None = None  # None: std of cost over random perturbations
    cooling: float = 0.98
    sweeps: int = 200
    moves_per_sweep: int | None = None  # None: one per macro
    perturbations: int = 100

    def __post_init__(self):
        if self.t0 is not None and not self.t0 > 0:
            raise ValueError("t0 must be positive")
        if not 0 < self.cooling < 1:
            raise ValueError("cooling must lie in (0, 1)")


class FineGrid:
    """Fine subdivision of a coarse placement grid."""

    def __init__(self, coarse: GridSpec, target: int = FINE_TARGET):
        self.coarse = coarse
        self.k = max(1, target // max(coarse.n_rows, coarse.n_cols))
        self.n_rows = coarse.n_rows * self.k
        self.n_cols = coarse.n_cols * self.k
        self.cell_w = coarse.cell_w / self.k
        self.cell_h = coarse.cell_h / self.k
        self.origin = coarse.origin
        b = coarse.canvas.bbox
        # usable extent: cells overhanging the canvas bbox are excluded
        self.width = min(self.n_cols, int(math.floor(b.width / self.cell_w + EPS)))
        self.height = min(self.n_rows, int(math.floor(b.height / self.cell_h + EPS)))
        self.obstacles = self.rects_of(complement_nonplaceable(coarse.canvas), self.origin)

    def rects_of(self, rects, origin=(0.0, 0.0)) -> np.ndarray:
        """Conservative integer cell rectangles (x0, y0, x1, y1) covering ``rects``."""
        out = [(math.floor((r.x0 - origin[0]) / self.cell_w + EPS), math.floor((r.y0 - origin[1]) / self.cell_h + EPS),
                math.ceil((r.x1 - origin[0]) / self.cell_w - EPS), math.ceil((r.y1 - origin[1]) / self.cell_h - EPS))
               for r in rects]
        return np.array(out, dtype=np.int64).reshape(len(out), 4)

    def from_coarse(self, anchor: tuple[int, int]) -> tuple[int, int]:
        r, c = anchor
        return c * self.k, r * self.k

    def from_micron(self, x: float, y: float) -> tuple[int, int]:
        return (int(round((x - self.origin[0]) / self.cell_w)), int(round((y - self.origin[1]) / self.cell_h)))

    def to_micron(self, fx, fy):
        return self.origin[0] + fx * self.cell_w, self.origin[1] + fy * self.cell_h

    def inside(self, rects: np.ndarray) -> bool:
        return bool(np.all(rects[:, 0] >= 0) and np.all(rects[:, 1] >= 0)
                    and np.all(rects[:, 2] <= self.width) and np.all(rects[:, 3] <= self.height))

    def contains_cell(self, col: int, row: int) -> bool:
        if not (0 <= col < self.width and 0 <= row < self.height):
            return False
        o = self.obstacles
        return not np.any((o[:, 0] <= col) & (col < o[:, 2]) & (o[:, 1] <= row) & (row < o[:, 3]))


def _overlap(a: np.ndarray, b: np.ndarray) -> bool:
    if len(a) == 0 or len(b) == 0:
        return False
    ix = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    iy = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    return bool(np.any((ix > 0) & (iy > 0)))


def _slide(a: np.ndarray, obstacles: np.ndarray, d: tuple[int, int], fine: FineGrid) -> int:
    """How far rectangles ``a`` can move along ``d`` before touching an obstacle or the grid edge."""
    dx, dy = d
    if dx:
        lo, hi, plo, phi = 0, 2, 1, 3
        edge = fine.width
    else:
        lo, hi, plo, phi = 1, 3, 0, 2
        edge = fine.height
    if (dx or dy) < 0:
        best = int(a[:, lo].min())
    else:
        best = int(edge - a[:, hi].max())
    if len(obstacles):
        b = obstacles
        overlap = np.minimum(a[:, None, phi], b[None, :, phi]) - np.maximum(a[:, None, plo], b[None, :, plo]) > 0
        if (dx or dy) < 0:
            gap = a[:, None, lo] - b[None, :, hi]
        else:
            gap = b[None, :, lo] - a[:, None, hi]
        ok = overlap & (gap >= 0)
        if ok.any():
            best = min(best, int(gap[ok].min()))
    return max(best, 0)


@dataclass
class SAState:
    fx: np.ndarray  # fine-cell bbox min corner per macro
    fy: np.ndarray
    orient: np.ndarray  # orientation index per macro

    def copy(self) -> "SAState":
        return SAState(self.fx.copy(), self.fy.copy(), self.orient.copy())


@dataclass(frozen=True)
class Move:
    kind: str
    macro: int = -1
    other: int = -1
    dx: int = 0
    dy: int = 0
    orientation: int = 0  # resulting orientation for flip / relocate


class Refiner:
    """Geometry, legality and cost of fine-grid placements of one netlist."""

    def __init__(self, n: Netlist, grid: GridSpec | None = None, weights: RewardWeights = RewardWeights(),
                 clusters: dict[int, tuple[float, float]] | None = None, target: int = FINE_TARGET):
        self.netlist = n
        self.grid = grid if grid is not None else select_grid_dims(n)
        self.fine = FineGrid(self.grid, target)
        self.weights = weights
        self.cost_model = CostModel(n, self.grid)
        self.M = M = len(n.macros)
        f = self.fine
        self.rects = [[f.rects_of(apply_orientation(m.shape, o).rects) for o in ORIENTATIONS] for m in n.macros]
        self.pins: list[list[list[tuple[str, float, float, Side]]]] = []
        for m in n.macros:
            per_o = []
            for o in ORIENTATIONS:
                pl = []
                for p in m.pins:
                    x, y = orient_point(p.offset, m.width, m.height, o)
                    pl.append((p.name, x / f.cell_w, y / f.cell_h, orient_side(p.side, o)))
                per_o.append(pl)
            self.pins.append(per_o)
        self.group = [m.group_id for m in n.macros]
        self.congruent = [[j for j in range(M) if j != i and self.group[j] == self.group[i]
                           and n.macros[j].shape == n.macros[i].shape] for i in range(M)]
        self.swap_pairs = [(i, j) for i in range(M) for j in self.congruent[i] if i < j]
        self.clusters = dict(clusters or {})
        self.cxy = np.array([self.clusters.get(c.id, (0.0, 0.0)) for c in n.clusters], dtype=float).reshape(-1, 2)

    # -- conversion ---------------------------------------------------------
    def state_from(self, pl: Placement) -> SAState:
        n, f = self.netlist, self.fine
        fx = np.zeros(self.M, dtype=np.int64)
        fy = np.zeros(self.M, dtype=np.int64)
        orient = np.zeros(self.M, dtype=np.int64)
        for i, m in enumerate(n.macros):
            mp = pl.macros[m.name]
            fx[i], fy[i] = f.from_coarse(mp.anchor) if mp.anchor is not None else f.from_micron(mp.x, mp.y)
            orient[i] = Orientation(mp.orientation).index
        return SAState(fx, fy, orient)

    def placement(self, s: SAState) -> Placement:
        out = {}
        for i, m in enumerate(self.netlist.macros):
            x, y = self.fine.to_micron(int(s.fx[i]), int(s.fy[i]))
            out[m.name] = MacroPlacement(float(x), float(y), ORIENTATIONS[int(s.orient[i])])
        return Placement(out, dict(self.clusters))

    # -- geometry -----------------------------------------------------------
    def placed_rects(self, s: SAState, i: int) -> np.ndarray:
        return self.rects[i][int(s.orient[i])] + np.array([s.fx[i], s.fy[i], s.fx[i], s.fy[i]])

    def others(self, s: SAState, exclude) -> np.ndarray:
        parts = [self.placed_rects(s, j) for j in range(self.M) if j not in exclude]
        return np.concatenate(parts) if parts else np.zeros((0, 4), dtype=np.int64)

    def legal(self, s: SAState, moved) -> bool:
        """No overlap or canvas exit for the ``moved`` macros."""
        moved = list(dict.fromkeys(moved))
        rest = self.others(s, moved)
        for k, i in enumerate(moved):
            a = self.placed_rects(s, i)
            if not self.fine.inside(a) or _overlap(a, self.fine.obstacles) or _overlap(a, rest):
                return False
            for j in moved[k + 1:]:
                if _overlap(a, self.placed_rects(s, j)):
                    return False
        return True

    def pin_violations(self, s: SAState, i: int) -> list[str]:
        """Pins of macro ``i`` whose outside neighbour cell is off-canvas or under another macro."""
        bad = []
        rest = None
        fx, fy = int(s.fx[i]), int(s.fy[i])
        for name, px, py, side in self.pins[i][int(s.orient[i])]:
            if side is Side.E:
                col, row = fx + math.ceil(px - EPS), fy + max(0, math.ceil(py - EPS) - 1)
            elif side is Side.W:
                col, row = fx + math.floor(px + EPS) - 1, fy + max(0, math.ceil(py - EPS) - 1)
            elif side is Side.N:
                col, row = fx + max(0, math.ceil(px - EPS) - 1), fy + math.ceil(py - EPS)
            else:
                col, row = fx + max(0, math.ceil(px - EPS) - 1), fy + math.floor(py + EPS) - 1
            if not self.fine.contains_cell(col, row):
                bad.append(f"{self.netlist.macros[i].name}:{name} faces the canvas edge")
                continue
            if rest is None:
                rest = self.others(s, (i,))
            if len(rest) and np.any((rest[:, 0] <= col) & (col < rest[:, 2]) & (rest[:, 1] <= row) & (row < rest[:, 3])):
                bad.append(f"{self.netlist.macros[i].name}:{name} blocked by a neighbour")
        return bad

    def all_violations(self, s: SAState) -> list[str]:
        return [v for i in range(self.M) for v in self.pin_violations(s, i)]

    def affected(self, s: SAState, moved) -> list[int]:
        """Macros whose pin check can change when ``moved`` change: the movers and their neighbours."""
        return list(range(self.M))

    def occupancy(self, s: SAState) -> np.ndarray:
        """Dense fine-grid owner image (-1 free); for checks and debugging."""
        img = np.full((self.fine.n_rows, self.fine.n_cols), -1, dtype=np.int32)
        for i in range(self.M):
            for x0, y0, x1, y1 in self.placed_rects(s, i):
                img[y0:y1, x0:x1] = i
        return img

    # -- cost ---------------------------------------------------------------
    def costs(self, s: SAState) -> ProxyCosts:
        f = self.fine
        xy = np.stack([f.origin[0] + s.fx * f.cell_w, f.origin[1] + s.fy * f.cell_h], axis=1)
        return self.cost_model.evaluate_arrays(xy, s.orient, self.cxy)

    def cost(self, s: SAState) -> float:
        return self.costs(s).weighted(self.weights)

    # -- moves --------------------------------------------------------------
    def shift_move(self, s: SAState, i: int) -> Move:
        a = self.placed_rects(s, i)
        to_edge = [_slide(a, self.fine.obstacles, d, self.fine) for d in _DIRS]
        d = _DIRS[int(np.argmin(to_edge))]
        rest = self.others(s, (i,))
        obstacles = np.concatenate([self.fine.obstacles, rest]) if len(rest) else self.fine.obstacles
        dist = _slide(a, obstacles, d, self.fine)
        return Move("shift", i, dx=d[0] * dist, dy=d[1] * dist)

    def swap_move(self, i: int, rng: np.random.Generator) -> Move:
        if self.congruent[i]:
            j = self.congruent[i][int(rng.integers(len(self.congruent[i])))]
            return Move("swap", i, j)
        if self.swap_pairs:
            a, b = self.swap_pairs[int(rng.integers(len(self.swap_pairs)))]
            return Move("swap", a, b)
        return Move("swap")  # no eligible pair: a no-op

    def propose(self, s: SAState, rng: np.random.Generator, kinds=MOVES) -> Move:
        kind = kinds[int(rng.integers(len(kinds)))]
        i = int(rng.integers(self.M))
        if kind == "shift":
            return self.shift_move(s, i)
        if kind == "swap":
            return self.swap_move(i, rng)
        if kind == "flip":
            axis = Orientation.MX if rng.random() < 0.5 else Orientation.MY
            return Move("flip", i, orientation=ORIENTATIONS[int(s.orient[i])].compose(axis).index)
        g = self.grid
        r, c = int(rng.integers(g.n_rows)), int(rng.integers(g.n_cols))
        fx, fy = self.fine.from_coarse((r, c))
        return Move("relocate", i, dx=fx - int(s.fx[i]), dy=fy - int(s.fy[i]), orientation=int(rng.integers(4)))

    def apply(self, s: SAState, mv: Move) -> tuple[SAState, list[int]]:
        t = s.copy()
        i = mv.macro
        if mv.kind == "swap":
            if i < 0:
                return t, []
            j = mv.other
            t.fx[i], t.fx[j] = s.fx[j], s.fx[i]
            t.fy[i], t.fy[j] = s.fy[j], s.fy[i]
            t.orient[i], t.orient[j] = s.orient[j], s.orient[i]
            return t, [i, j]
        t.fx[i] += mv.dx
        t.fy[i] += mv.dy
        if mv.kind in ("flip", "relocate"):
            t.orient[i] = mv.orientation
        return t, [i]

    def acceptable(self, s: SAState, moved) -> bool:
        """Legal and free of pin violations."""
        if not moved:
            return True
        return self.legal(s, moved) and not self.all_violations(s)


def pin_accessibility_check(refiner: Refiner, state: SAState, macro: int) -> list[str]:
    return refiner.pin_violations(state, macro)


def propose_move(refiner: Refiner, state: SAState, rng: np.random.Generator) -> Move:
    return refiner.propose(state, rng)


# -- repair ---------------------------------------------------------------------

def repair(ref: Refiner, s: SAState, max_rounds: int = 4) -> SAState:
    """Clear pin violations left by the coarse placer.

    Each offending macro first tries its other orientations in place, then
    the nearest coarse-aligned positions outward from where it sits. A change
    is kept only if it lowers the total violation count without overlap.
    Raises RefineError if violations remain.
    """
    s = s.copy()
    total = len(ref.all_violations(s))
    k = ref.fine.k
    g = ref.grid
    for _ in range(max_rounds):
        if total == 0:
            return s
        for i in range(ref.M):
            if not ref.pin_violations(s, i):
                continue
            best = None
            for o in range(4):
                t = s.copy()
                t.orient[i] = o
                if ref.legal(t, [i]):
                    v = len(ref.all_violations(t))
                    if v < total and (best is None or v < best[0]):
                        best = (v, t)
            if best is None:
                cx, cy = int(s.fx[i]) // k, int(s.fy[i]) // k
                cands = sorted(((abs(c - cx) + abs(r - cy), r, c) for r in range(g.n_rows) for c in range(g.n_cols)))
                for _, r, c in cands:
                    for o in range(4):
                        t = s.copy()
                        t.fx[i], t.fy[i], t.orient[i] = c * k, r * k, o
                        if not ref.legal(t, [i]):
                            continue
                        v = len(ref.all_violations(t))
                        if v < total:
                            best = (v, t)
                            break
                    if best is not None:
                        break
            if best is not None:
                total, s = best
    if total:
        raise RefineError(f"could not clear {total} pin-accessibility violations")
    return s


# -- annealing -------------------------------------------------------------------

@dataclass
class AnnealResult:
    placement: Placement
    initial_cost: float
    final_cost: float
    initial_costs: ProxyCosts
    final_costs: ProxyCosts
    t0: float
    repaired: bool
    trace: list[dict] = field(default_factory=list)


TRACE_FIELDS = ("iteration", "temperature", "move", "cost", "best", "accepted")


def write_trace(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for r in rows:
            w.writerow([r["iteration"], format(r["temperature"], ".17g"), r["move"],
                        format(r["cost"], ".17g"), format(r["best"], ".17g"), int(r["accepted"])])


def estimate_t0(ref: Refiner, s: SAState, rng: np.random.Generator, n: int, kinds=MOVES) -> float:
    """Standard deviation of the cost over ``n`` legal random perturbations of ``s``."""
    costs = [ref.cost(s)]
    for _ in range(n):
        mv = ref.propose(s, rng, kinds)
        t, moved = ref.apply(s, mv)
        if ref.acceptable(t, moved):
            costs.append(ref.cost(t))
    sd = float(np.std(costs))
    return sd if sd > 0 else 1e-6


def _anneal_state(ref: Refiner, s: SAState, schedule: SASchedule, rng: np.random.Generator,
                  kinds=MOVES) -> tuple[SAState, float, list[dict], float]:
    cur = s
    cur_cost = ref.cost(cur)
    best, best_cost = cur, cur_cost
    t0 = schedule.t0 if schedule.t0 is not None else estimate_t0(ref, cur, rng, schedule.perturbations, kinds)
    T = t0
    per_sweep = schedule.moves_per_sweep or max(1, ref.M)
    trace = []
    it = 0
    for _ in range(schedule.sweeps):
        for _ in range(per_sweep):
            mv = ref.propose(cur, rng, kinds)
            cand, moved = ref.apply(cur, mv)
            accepted = False
            if moved and ref.acceptable(cand, moved):
                c = ref.cost(cand)
                delta = c - cur_cost
                if delta <= 0 or rng.random() < math.exp(-delta / T):
                    cur, cur_cost, accepted = cand, c, True
                    if c < best_cost:
                        best, best_cost = cand, c
            trace.append({"iteration": it, "temperature": T, "move": mv.kind, "cost": cur_cost,
                          "best": best_cost, "accepted": accepted})
            it += 1
        T *= schedule.cooling
    return best, best_cost, trace, t0


def anneal(n: Netlist, placement: Placement, grid: GridSpec | None = None, schedule: SASchedule = SASchedule(),
           weights: RewardWeights = RewardWeights(), seed: int = 0, trace_path: str | Path | None = None,
           target: int = FINE_TARGET) -> AnnealResult:
    """Refine ``placement`` and return the best violation-free placement seen.

    Standard-cell clusters keep the positions given in ``placement``.
    """
    rng = np.random.default_rng(seed)
    ref = Refiner(n, grid, weights, placement.clusters, target)
    s0 = ref.state_from(placement)
    if not ref.legal(s0, range(ref.M)):
        raise RefineError("initial placement overlaps or leaves the canvas")
    initial = ref.costs(s0)
    s = s0
    repaired = bool(ref.all_violations(s0))
    if repaired:
        s = repair(ref, s0)
    best, best_cost, trace, t0 = _anneal_state(ref, s, schedule, rng)
    assert ref.legal(best, range(ref.M)) and not ref.all_violations(best)
    if trace_path is not None:
        write_trace(trace, trace_path)
    return AnnealResult(ref.placement(best), initial.weighted(weights), best_cost, initial, ref.costs(best),
                        t0, repaired, trace)


def random_legal_placement(n: Netlist, grid: GridSpec, rng: np.random.Generator) -> Placement:
    """Macros dropped one by one on random overlap-free coarse anchors, then clusters."""
    occ = Occupancy(grid)
    macros = {}
    from .canvas import commit_placement
    from .geometry import footprint
    order = sorted(range(len(n.macros)), key=lambda i: (-n.macros[i].area, n.macros[i].name))
    for i in order:
        m = n.macros[i]
        opts = []
        for o in ORIENTATIONS:
            shp = apply_orientation(m.shape, o)
            fp = footprint(shp, grid.cell_w, grid.cell_h)
            cells = np.argwhere(overlap_free_mask(occ, fp))
            opts.extend((tuple(int(v) for v in c), o, fp, shp) for c in cells)
        if not opts:
            raise RefineError(f"no room left for macro '{m.name}'")
        anchor, o, fp, shp = opts[int(rng.integers(len(opts)))]
        commit_placement(occ, i, fp, anchor, shp, o)
        x, y = grid.cell_origin(*anchor)
        macros[m.name] = MacroPlacement(x, y, o, anchor)
    clusters = place_clusters(n, grid, occ, macros)
    return Placement(macros, clusters)


def sa_place_from_scratch(n: Netlist, grid: GridSpec | None = None, schedule: SASchedule = SASchedule(),
                          weights: RewardWeights = RewardWeights(), seed: int = 0,
                          trace_path: str | Path | None = None, target: int = FINE_TARGET) -> AnnealResult:
    """Baseline placer: random legal start, then annealing with an extra relocate move."""
    grid = grid if grid is not None else select_grid_dims(n)
    rng = np.random.default_rng(seed)
    start = random_legal_placement(n, grid, rng)
    ref = Refiner(n, grid, weights, start.clusters, target)
    s0 = ref.state_from(start)
    initial = ref.costs(s0)
    s = s0
    repaired = bool(ref.all_violations(s0))
    if repaired:
        s = repair(ref, s0)
    best, best_cost, trace, t0 = _anneal_state(ref, s, schedule, rng, SCRATCH_MOVES)
    if trace_path is not None:
        write_trace(trace, trace_path)
    return AnnealResult(ref.placement(best), initial.weighted(weights), best_cost, initial, ref.costs(best),
                        t0, repaired, trace)


def read_trace(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{"iteration": int(r["iteration"]), "temperature": float(r["temperature"]), "move": r["move"],
                 "cost": float(r["cost"]), "best": float(r["best"]), "accepted": r["accepted"] == "1"}
                for r in csv.DictReader(fh)]
