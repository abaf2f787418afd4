"""Sequential macro-placement environment.

One episode places every macro in a fixed order (largest group first, larger
macros first within a group), then spreads the standard-cell clusters with a
small force-directed pass and scores the result. Rewards are zero until the
final step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .canvas import (
    NO_LEGAL_ACTION_PENALTY,
    GridSpec,
    NoLegalAction,
    Occupancy,
    commit_placement,
    compose_position_mask,
    make_grid,
    select_grid_dims,
)
from .geometry import ORIENTATIONS, Orientation, apply_orientation, footprint
from .grouping import GroupAssignment, assign_groups
from .netlist import Netlist
from .placement import MacroPlacement, Placement
from .proxy import CostModel, ProxyCosts, RewardWeights, reward

CLUSTER_ITERATIONS = 100
CLUSTER_STEP = 0.5


class IllegalAction(Exception):
    pass


class NotDone(Exception):
    pass


@dataclass(frozen=True)
class StepAction:
    position: int  # flat index into the n_max x n_max action space
    orientation: Orientation = Orientation.R0


@dataclass
class EpisodeState:
    t: int
    order: tuple[int, ...]
    occ: Occupancy
    placed: dict[int, tuple[tuple[int, int], Orientation]] = field(default_factory=dict)
    mask: np.ndarray | None = None  # (n_max, n_max), any orientation legal
    orient_masks: np.ndarray | None = None  # (4, n_max, n_max)
    mask_level: str = ""
    done: bool = False
    aborted: bool = False
    terminal_reward: float | None = None
    costs: ProxyCosts | None = None
    clusters: dict[int, tuple[float, float]] = field(default_factory=dict)
    seed: int | None = None

    @property
    def current(self) -> int | None:
        return None if self.done or self.t >= len(self.order) else self.order[self.t]


@dataclass(frozen=True)
class EpisodeResult:
    costs: ProxyCosts | None
    reward: float
    placement: Placement
    aborted: bool
    actions: tuple[StepAction, ...] = ()


def placement_order(n: Netlist) -> tuple[int, ...]:
    """Groups by total area (descending), then macros by area within a group."""
    groups: dict[int, list[int]] = {}
    for i, m in enumerate(n.macros):
        groups.setdefault(m.group_id if m.group_id is not None else -1, []).append(i)
    garea = {g: sum(n.macros[i].area for i in ms) for g, ms in groups.items()}
    order: list[int] = []
    for g in sorted(groups, key=lambda g: (-garea[g], g)):
        order.extend(sorted(groups[g], key=lambda i: (-n.macros[i].area, n.macros[i].name)))
    return tuple(order)


def place_clusters(n: Netlist, grid: GridSpec, occ: Occupancy, macro_pl: dict[str, MacroPlacement],
                   iterations: int = CLUSTER_ITERATIONS) -> dict[int, tuple[float, float]]:
    """Force-directed cluster placement on the free canvas area.

    Clusters start at the centroid of their fixed pins (macro pins and ports)
    and are then pulled toward their clique-weighted neighbours. Any cluster
    that lands on a macro or outside the canvas is pushed to the nearest free
    cell center.
    """
    if not n.clusters:
        return {}
    K = len(n.clusters)
    cm = CostModel(n, grid)
    fixed_xy = np.zeros((len(n.macros), 2))
    orient = np.zeros(len(n.macros), dtype=int)
    for i, m in enumerate(n.macros):
        mp = macro_pl.get(m.name)
        if mp is not None:
            fixed_xy[i] = (mp.x, mp.y)
            orient[i] = mp.orientation.index

    free = occ.free
    ox, oy = grid.origin
    rows, cols = np.nonzero(free)
    if rows.size:
        free_centroid = (ox + (cols.mean() + 0.5) * grid.cell_w, oy + (rows.mean() + 0.5) * grid.cell_h)
        _, nearest = ndimage.distance_transform_edt(~free, return_indices=True)
    else:
        b = n.canvas.bbox
        free_centroid = (0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1))
        nearest = None

    # clique expansion: (cluster, other pin) pairs with weight w / (p - 1)
    pos0 = cm.pin_positions(fixed_xy, orient, np.zeros((K, 2)))
    pairs_c, pairs_o, pairs_w = [], [], []
    for ni, net in enumerate(n.nets):
        lo = cm.net_start[ni]
        hi = cm.net_start[ni + 1] if ni + 1 < len(n.nets) else len(cm.pin_kind)
        p = hi - lo
        for a in range(lo, hi):
            if cm.pin_kind[a] != 1:
                continue
            for b in range(lo, hi):
                if b != a and not (cm.pin_kind[b] == 1 and cm.pin_owner[b] == cm.pin_owner[a]):
                    pairs_c.append(cm.pin_owner[a])
                    pairs_o.append(b)
                    pairs_w.append(net.weight / (p - 1))
    pc = np.array(pairs_c, dtype=int)
    po = np.array(pairs_o, dtype=int)
    pw = np.array(pairs_w, dtype=float)
    other_is_cluster = cm.pin_kind[po] == 1 if po.size else np.zeros(0, bool)

    xy = np.zeros((K, 2))
    for k in range(K):
        sel = (pc == k) & ~other_is_cluster
        if sel.any():
            xy[k] = np.average(pos0[po[sel]], axis=0, weights=pw[sel])
        else:
            xy[k] = free_centroid

    def project(pt):
        if nearest is None:
            return pt
        r, c = grid.cell_of(*pt)
        if free[r, c]:
            return pt
        nr, nc = nearest[0][r, c], nearest[1][r, c]
        return np.array([ox + (nc + 0.5) * grid.cell_w, oy + (nr + 0.5) * grid.cell_h])

    b = n.canvas.bbox
    for k in range(K):
        xy[k] = project(np.clip(xy[k], (b.x0, b.y0), (b.x1, b.y1)))
    if pc.size:
        wsum = np.bincount(pc, weights=pw, minlength=K)
        for _ in range(iterations):
            pos = cm.pin_positions(fixed_xy, orient, xy)
            pull = np.zeros((K, 2))
            np.add.at(pull, pc, pw[:, None] * pos[po])
            target = np.where(wsum[:, None] > 0, pull / np.maximum(wsum, 1e-300)[:, None], xy)
            xy = xy + CLUSTER_STEP * (target - xy)
            xy = np.clip(xy, (b.x0, b.y0), (b.x1, b.y1))
            for k in range(K):
                xy[k] = project(xy[k])
    return {c.id: (float(xy[k, 0]), float(xy[k, 1])) for k, c in enumerate(n.clusters)}


class PlacementEnv:
    """Masked sequential placement MDP over one netlist.

    The netlist is grouped on construction unless its macros already carry
    group ids (or ``groups`` is given).
    """

    def __init__(self, n: Netlist, groups: GroupAssignment | None = None, grid: GridSpec | None = None,
                 weights: RewardWeights = RewardWeights(), cluster_iterations: int = CLUSTER_ITERATIONS):
        if groups is not None:
            n = n.with_groups(groups.group_of())
        elif n.macros and any(m.group_id is None for m in n.macros):
            n, groups = assign_groups(n)
        self.netlist = n
        self.groups = groups
        self.grid = grid if grid is not None else (select_grid_dims(n) if n.macros else None)
        if self.grid is None:
            self.grid = make_grid(n.canvas, 1, 1)
        self.weights = weights
        self.cluster_iterations = cluster_iterations
        self.order = placement_order(n)
        self.cost_model = CostModel(n, self.grid)
        g = self.grid
        self.oriented = [[apply_orientation(m.shape, o) for o in ORIENTATIONS] for m in n.macros]
        self.footprints = [[footprint(s, g.cell_w, g.cell_h) for s in shapes] for shapes in self.oriented]
        self.state: EpisodeState | None = None

    @property
    def T(self) -> int:
        return len(self.order)

    def reset(self, seed: int | None = None) -> EpisodeState:
        st = EpisodeState(t=0, order=self.order, occ=Occupancy(self.grid), seed=seed)
        self.state = st
        if not self.order:
            self._finish(st)
        else:
            self._refresh_mask(st)
        return st

    def _same_group_boxes(self, st: EpisodeState, idx: int):
        gid = self.netlist.macros[idx].group_id
        return [st.occ.boxes[j] for j in st.placed if self.netlist.macros[j].group_id == gid]

    def _refresh_mask(self, st: EpisodeState) -> None:
        idx = st.order[st.t]
        try:
            masks, level = compose_position_mask(st.occ, self.footprints[idx], self._same_group_boxes(st, idx))
        except NoLegalAction:
            st.orient_masks = np.zeros((4, self.grid.n_max, self.grid.n_max), dtype=bool)
            st.mask = st.orient_masks[0]
            st.mask_level = "none"
            st.done = True
            st.aborted = True
            st.terminal_reward = NO_LEGAL_ACTION_PENALTY
            return
        st.orient_masks = masks
        st.mask = masks.any(axis=0)
        st.mask_level = level

    def macro_placements(self, st: EpisodeState) -> dict[str, MacroPlacement]:
        out = {}
        for idx, (anchor, o) in st.placed.items():
            x, y = self.grid.cell_origin(*anchor)
            out[self.netlist.macros[idx].name] = MacroPlacement(x, y, o, anchor)
        return out

    def snapshot(self, st: EpisodeState | None = None) -> Placement:
        st = st or self.state
        return Placement(self.macro_placements(st), dict(st.clusters))

    def _finish(self, st: EpisodeState) -> None:
        mp = self.macro_placements(st)
        st.clusters = place_clusters(self.netlist, self.grid, st.occ, mp, self.cluster_iterations)
        st.costs = self.cost_model.evaluate(Placement(mp, st.clusters))
        st.terminal_reward = reward(st.costs, self.weights)
        st.done = True

    def legal(self, action: StepAction) -> bool:
        st = self.state
        if st is None or st.done:
            return False
        r, c = self.grid.unindex(action.position)
        if not (0 <= r < self.grid.n_max and 0 <= c < self.grid.n_max):
            return False
        return bool(st.orient_masks[Orientation(action.orientation).index, r, c])

    def step(self, action: StepAction) -> tuple[EpisodeState, float, bool]:
        """Place the current macro; returns (state, reward, done).

        Raises IllegalAction, leaving the state untouched, when the mask
        forbids the (position, orientation) pair.
        """
        st = self.state
        if st is None or st.done:
            raise IllegalAction("episode is finished")
        if not self.legal(action):
            raise IllegalAction(f"position {action.position} / {action.orientation} is masked")
        idx = st.order[st.t]
        o = Orientation(action.orientation)
        anchor = self.grid.unindex(action.position)
        commit_placement(st.occ, idx, self.footprints[idx][o.index], anchor, self.oriented[idx][o.index], o)
        st.placed[idx] = (anchor, o)
        st.t += 1
        if st.t == len(st.order):
            self._finish(st)
        else:
            self._refresh_mask(st)
        return st, (st.terminal_reward if st.done else 0.0), st.done

    def result(self, st: EpisodeState | None = None, actions=()) -> EpisodeResult:
        return episode_result(self, st or self.state, actions)


def episode_result(env: PlacementEnv, st: EpisodeState, actions=()) -> EpisodeResult:
    if not st.done:
        raise NotDone("episode still in progress")
    return EpisodeResult(st.costs, float(st.terminal_reward), env.snapshot(st), st.aborted, tuple(actions))


Policy = Callable[[PlacementEnv, EpisodeState], StepAction]


def random_policy(rng: np.random.Generator) -> Policy:
    """Uniform over legal positions, then uniform over legal orientations there."""

    def act(env: PlacementEnv, st: EpisodeState) -> StepAction:
        cells = np.flatnonzero(st.mask)
        pos = int(cells[rng.integers(cells.size)])
        r, c = env.grid.unindex(pos)
        oris = np.flatnonzero(st.orient_masks[:, r, c])
        return StepAction(pos, ORIENTATIONS[int(oris[rng.integers(oris.size)])])

    return act


def rollout(env: PlacementEnv, policy: Policy, seed: int | None = None) -> EpisodeResult:
    st = env.reset(seed)
    actions = []
    while not st.done:
        a = policy(env, st)
        actions.append(a)
        st, _, _ = env.step(a)
    return env.result(st, actions)


def replay(env: PlacementEnv, actions, seed: int | None = None) -> EpisodeResult:
    return rollout(env, _Scripted(actions), seed)


class _Scripted:
    def __init__(self, actions):
        self._it = iter(actions)

    def __call__(self, env, st):
        return next(self._it)

