"""Proxy costs (wirelength, congestion, density, hierarchy) and the reward.

Costs are evaluated on a finished placement in microns. The grid only sets the
bins used by the density and congestion estimates.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .canvas import GridSpec
from .geometry import ORIENTATIONS, Rect, apply_orientation, orient_point, rect_coverage
from .netlist import Netlist, PinKind
from .placement import Placement

DENSITY_TOP_FRACTION = 10  # top 1/10 of cells
CONGESTION_TOP_FRACTION = 20  # top 1/20 of cells
MACRO_BLOCKAGE = 0.5


class UnplacedEndpoint(ValueError):
    pass


@dataclass(frozen=True)
class RewardWeights:
    alpha: float = 5.0  # wirelength
    beta: float = 1.0  # congestion
    gamma: float = 0.5  # density
    omega: float = 0.1  # hierarchy

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma, self.omega) < 0:
            raise ValueError("reward weights must be non-negative")


@dataclass(frozen=True)
class ProxyCosts:
    wl: float
    cong: float
    dens: float
    hier: float

    def weighted(self, w: RewardWeights = RewardWeights()) -> float:
        return math.fsum((w.alpha * self.wl, w.beta * self.cong, w.gamma * self.dens, w.omega * self.hier))

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def reward(costs: ProxyCosts, w: RewardWeights = RewardWeights()) -> float:
    """Negative weighted sum of the four proxy costs."""
    return -costs.weighted(w)


def costs_report(costs: ProxyCosts, w: RewardWeights = RewardWeights()) -> dict[str, float]:
    d = costs.as_dict()
    d["weighted_total"] = costs.weighted(w)
    d["reward"] = reward(costs, w)
    return d


def write_costs(costs: ProxyCosts, path: str | Path, w: RewardWeights = RewardWeights()) -> None:
    Path(path).write_text(json.dumps(costs_report(costs, w), indent=1) + "\n")


def top_fraction_mean(values: np.ndarray, denom: int) -> float:
    """Mean of the ceil(N / denom) largest entries."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return 0.0
    k = -(-v.size // denom)
    top = np.partition(v, v.size - k)[v.size - k:]
    return float(top.mean())


def density_cost(cell_density: np.ndarray) -> float:
    """Average density of the densest 10% of grid cells."""
    return top_fraction_mean(cell_density, DENSITY_TOP_FRACTION)


def hierarchy_cost_from_boxes(centers: np.ndarray, sizes: np.ndarray, groups: Sequence[Sequence[int]]) -> float:
    """Mean over groups of summed center distance over summed min(w_i+w_j, h_i+h_j).

    ``centers`` and ``sizes`` are (M, 2) arrays; singleton groups score 0.
    """
    if len(groups) == 0:
        return 0.0
    total = 0.0
    for members in groups:
        idx = np.asarray(members, dtype=int)
        if idx.size < 2:
            continue
        c = centers[idx]
        s = sizes[idx]
        d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
        wij = s[:, None, 0] + s[None, :, 0]
        hij = s[:, None, 1] + s[None, :, 1]
        off = ~np.eye(idx.size, dtype=bool)
        total += d[off].sum() / np.minimum(wij, hij)[off].sum()
    return float(total / len(groups))


class CostModel:
    """Precomputed pin tables for fast repeated cost evaluation.

    Macro state is passed as arrays: ``xy`` (M, 2) bbox min corners and
    ``orient`` (M,) orientation indices, in netlist macro order.
    """

    def __init__(self, n: Netlist, grid: GridSpec, groups: Sequence[Sequence[int]] | None = None,
                 blockage: float = MACRO_BLOCKAGE):
        self.netlist = n
        self.grid = grid
        self.blockage = blockage
        b = n.canvas.bbox
        self.half_perimeter = b.width + b.height
        M = len(n.macros)
        self.sizes = np.array([[m.width, m.height] for m in n.macros], dtype=float).reshape(M, 2)
        if groups is None:
            by_gid: dict[int, list[int]] = {}
            for i, m in enumerate(n.macros):
                by_gid.setdefault(m.group_id if m.group_id is not None else -1, []).append(i)
            groups = [by_gid[g] for g in sorted(by_gid)] if M else []
        self.groups = [list(g) for g in groups]
        self.oriented_rects = [[apply_orientation(m.shape, o).rects for o in ORIENTATIONS] for m in n.macros]

        kinds, owners, offs, net_of = [], [], [], []
        for ni, net in enumerate(n.nets):
            for ref in net.pins:
                kind = PinKind(ref.kind)
                if kind is PinKind.MACRO:
                    mi = n.macro_index[ref.owner]
                    m = n.macros[mi]
                    if ref.pin is None:
                        o = [(0.5 * m.width, 0.5 * m.height)] * 4
                    else:
                        po = m.pin(ref.pin).offset
                        o = [orient_point(po, m.width, m.height, ori) for ori in ORIENTATIONS]
                    kinds.append(0)
                    owners.append(mi)
                    offs.append(o)
                elif kind is PinKind.CLUSTER:
                    kinds.append(1)
                    owners.append(n.cluster_index[ref.owner])
                    offs.append([(0.0, 0.0)] * 4)
                else:
                    kinds.append(2)
                    owners.append(n.port_index[ref.owner])
                    offs.append([(0.0, 0.0)] * 4)
                net_of.append(ni)
        self.pin_kind = np.array(kinds, dtype=int)
        self.pin_owner = np.array(owners, dtype=int)
        self.pin_offset = np.array(offs, dtype=float).reshape(len(kinds), 4, 2)
        self.net_of = np.array(net_of, dtype=int)
        self.net_start = np.searchsorted(self.net_of, np.arange(len(n.nets))) if n.nets else np.zeros(0, int)
        self.net_weight = np.array([net.weight for net in n.nets], dtype=float)
        self.port_xy = np.array([p.position for p in n.ports], dtype=float).reshape(len(n.ports), 2)
        self.cluster_side = np.sqrt(np.array([c.area for c in n.clusters], dtype=float))
        self._is_macro = self.pin_kind == 0
        self._is_cluster = self.pin_kind == 1
        self._is_port = self.pin_kind == 2

    # -- state conversion -------------------------------------------------
    def arrays(self, pl: Placement) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.netlist
        xy = np.zeros((len(n.macros), 2))
        orient = np.zeros(len(n.macros), dtype=int)
        for i, m in enumerate(n.macros):
            mp = pl.macros.get(m.name)
            if mp is None:
                if np.any(self.pin_owner[self._is_macro] == i):
                    raise UnplacedEndpoint(f"macro '{m.name}' is not placed")
                continue
            xy[i] = (mp.x, mp.y)
            orient[i] = mp.orientation.index
        cxy = np.zeros((len(n.clusters), 2))
        for i, c in enumerate(n.clusters):
            pos = pl.clusters.get(c.id)
            if pos is None:
                if np.any(self.pin_owner[self._is_cluster] == i):
                    raise UnplacedEndpoint(f"cluster {c.id} is not placed")
                continue
            cxy[i] = pos
        return xy, orient, cxy

    def pin_positions(self, xy, orient, cxy) -> np.ndarray:
        pos = np.empty((len(self.pin_kind), 2))
        mk = self._is_macro
        own = self.pin_owner[mk]
        pos[mk] = xy[own] + self.pin_offset[mk, orient[own]]
        pos[self._is_cluster] = cxy[self.pin_owner[self._is_cluster]]
        pos[self._is_port] = self.port_xy[self.pin_owner[self._is_port]]
        return pos

    def _net_boxes(self, pos):
        lo_x = np.minimum.reduceat(pos[:, 0], self.net_start)
        hi_x = np.maximum.reduceat(pos[:, 0], self.net_start)
        lo_y = np.minimum.reduceat(pos[:, 1], self.net_start)
        hi_y = np.maximum.reduceat(pos[:, 1], self.net_start)
        return lo_x, hi_x, lo_y, hi_y

    # -- costs --------------------------------------------------------------
    def wirelength(self, pos) -> float:
        if len(self.net_weight) == 0:
            return 0.0
        lo_x, hi_x, lo_y, hi_y = self._net_boxes(pos)
        hpwl = (hi_x - lo_x) + (hi_y - lo_y)
        return float((self.net_weight * hpwl).sum() / (self.net_weight.sum() * self.half_perimeter))

    def macro_coverage(self, xy, orient, placed: np.ndarray | None = None) -> np.ndarray:
        """Fraction of each cell covered by macros."""
        g = self.grid
        cov = np.zeros(g.shape)
        for i, m in enumerate(self.netlist.macros):
            if placed is not None and not placed[i]:
                continue
            for r in self.oriented_rects[i][orient[i]]:
                cov += rect_coverage(r.translate(xy[i, 0], xy[i, 1]), g.cell_w, g.cell_h,
                                     g.n_rows, g.n_cols, g.origin)
        return cov / g.cell_area

    def cluster_coverage(self, cxy) -> np.ndarray:
        """Cluster area spread as a centered square of equal area."""
        g = self.grid
        cov = np.zeros(g.shape)
        for i, side in enumerate(self.cluster_side):
            x, y = cxy[i]
            h = 0.5 * side
            cov += rect_coverage(Rect(x - h, y - h, x + h, y + h), g.cell_w, g.cell_h,
                                 g.n_rows, g.n_cols, g.origin)
        return cov / g.cell_area

    def congestion_grid(self, pos, macro_cov) -> np.ndarray:
        g = self.grid
        demand = np.zeros((g.n_rows + 1, g.n_cols + 1))
        if len(self.net_weight):
            lo_x, hi_x, lo_y, hi_y = self._net_boxes(pos)
            ox, oy = g.origin
            c0 = np.clip(np.floor((lo_x - ox) / g.cell_w), 0, g.n_cols - 1).astype(int)
            c1 = np.clip(np.floor((hi_x - ox) / g.cell_w), 0, g.n_cols - 1).astype(int)
            r0 = np.clip(np.floor((lo_y - oy) / g.cell_h), 0, g.n_rows - 1).astype(int)
            r1 = np.clip(np.floor((hi_y - oy) / g.cell_h), 0, g.n_rows - 1).astype(int)
            hpwl_cells = (hi_x - lo_x) / g.cell_w + (hi_y - lo_y) / g.cell_h
            v = hpwl_cells / ((c1 - c0 + 1) * (r1 - r0 + 1))
            # 2-D difference array, integrated below
            np.add.at(demand, (r0, c0), v)
            np.add.at(demand, (r0, c1 + 1), -v)
            np.add.at(demand, (r1 + 1, c0), -v)
            np.add.at(demand, (r1 + 1, c1 + 1), v)
        demand = demand.cumsum(0).cumsum(1)[:g.n_rows, :g.n_cols]
        capacity = 1.0 - self.blockage * np.clip(macro_cov, 0.0, 1.0)
        return demand / capacity

    def hierarchy(self, xy) -> float:
        return hierarchy_cost_from_boxes(xy + 0.5 * self.sizes, self.sizes, self.groups)

    def evaluate_arrays(self, xy, orient, cxy, macro_cov=None) -> ProxyCosts:
        pos = self.pin_positions(xy, orient, cxy)
        if macro_cov is None:
            macro_cov = self.macro_coverage(xy, orient)
        dens = macro_cov + self.cluster_coverage(cxy)
        return ProxyCosts(
            wl=self.wirelength(pos),
            cong=top_fraction_mean(self.congestion_grid(pos, macro_cov), CONGESTION_TOP_FRACTION),
            dens=density_cost(dens),
            hier=self.hierarchy(xy),
        )

    def evaluate(self, pl: Placement) -> ProxyCosts:
        return self.evaluate_arrays(*self.arrays(pl))


def wirelength_cost(n: Netlist, grid: GridSpec, pl: Placement) -> float:
    """Weighted HPWL over the weighted canvas half-perimeter."""
    cm = CostModel(n, grid)
    return cm.wirelength(cm.pin_positions(*cm.arrays(pl)))


def congestion_cost(n: Netlist, grid: GridSpec, pl: Placement, blockage: float = MACRO_BLOCKAGE) -> float:
    """Top-5% mean of smeared net demand over blockage-reduced capacity."""
    cm = CostModel(n, grid, blockage=blockage)
    xy, orient, cxy = cm.arrays(pl)
    pos = cm.pin_positions(xy, orient, cxy)
    return top_fraction_mean(cm.congestion_grid(pos, cm.macro_coverage(xy, orient)), CONGESTION_TOP_FRACTION)


def cell_density(n: Netlist, grid: GridSpec, pl: Placement) -> np.ndarray:
    cm = CostModel(n, grid)
    xy, orient, cxy = cm.arrays(pl)
    return cm.macro_coverage(xy, orient) + cm.cluster_coverage(cxy)


def hierarchy_cost(n: Netlist, pl: Placement, groups: Sequence[Sequence[str]] | None = None) -> float:
    idx = n.macro_index
    centers = np.array([[pl.macros[m.name].x + 0.5 * m.width, pl.macros[m.name].y + 0.5 * m.height]
                        for m in n.macros]).reshape(len(n.macros), 2)
    sizes = np.array([[m.width, m.height] for m in n.macros], dtype=float).reshape(len(n.macros), 2)
    if groups is None:
        by: dict[int, list[int]] = {}
        for i, m in enumerate(n.macros):
            by.setdefault(m.group_id if m.group_id is not None else -1, []).append(i)
        members = [by[g] for g in sorted(by)]
    else:
        members = [[idx[name] for name in g] for g in groups]
    return hierarchy_cost_from_boxes(centers, sizes, members)


def evaluate_placement(n: Netlist, grid: GridSpec, pl: Placement) -> ProxyCosts:
    return CostModel(n, grid).evaluate(pl)
