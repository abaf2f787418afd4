"""Graph and spatial features for the policy network.

Node order is macros, then clusters, then ports (netlist order within each).
Float node features, all in [0, 1]:

    kind one-hot (3) | width, height | x, y | placed | pin sides (4) | corners (16 x 2)

Sizes and positions are normalized by the canvas bbox; corners by the
object's own bbox. Group ids travel separately as embedding indices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..canvas import FREE
from ..env import EpisodeState, PlacementEnv
from ..geometry import ORIENTATIONS, Side, apply_orientation, orient_side
from ..netlist import PinKind

MAX_CORNERS = 16
CLIQUE_CAP = 8
N_GROUP_IDS = 16
NODE_DIM = 3 + 2 + 2 + 1 + 4 + 2 * MAX_CORNERS
SPATIAL_CHANNELS = 4  # macro-occupied, blocked, legal mask, same-group occupied

_SIDES = (Side.N, Side.E, Side.S, Side.W)
_F_XY = slice(5, 7)
_F_PLACED = 7
_F_SIDES = slice(8, 12)
_F_CORNERS = slice(12, 12 + 2 * MAX_CORNERS)


@dataclass(frozen=True)
class GraphFeatures:
    """One state, or a batch when the leading axis is present."""
    nodes: np.ndarray  # ([B,] n_nodes, NODE_DIM) float32
    group_ids: np.ndarray  # ([B,] n_nodes) int64
    adjacency: np.ndarray  # (n_nodes, n_nodes) float32, row-normalized, shared by the batch
    current: np.ndarray  # ([B]) int64 node index of the macro being placed
    spatial: np.ndarray  # ([B,] SPATIAL_CHANNELS, n_rows, n_cols) float32


def _corner_block(shape) -> np.ndarray:
    out = np.zeros(2 * MAX_CORNERS, dtype=np.float32)
    w, h = shape.width, shape.height
    pts = [(x / w, y / h) for x, y in shape.corners[:MAX_CORNERS]]
    out[:2 * len(pts)] = np.asarray(pts, dtype=np.float32).ravel()
    return out


def _side_hist(macro, orientation) -> np.ndarray:
    out = np.zeros(4, dtype=np.float32)
    for p in macro.pins:
        out[_SIDES.index(orient_side(p.side, orientation))] += 1
    if macro.pins:
        out /= len(macro.pins)
    return out


class DesignEncoder:
    """Per-design constant parts of the features, computed once."""

    def __init__(self, env: PlacementEnv):
        n = env.netlist
        self.env = env
        self.n_macros = M = len(n.macros)
        self.n_clusters = K = len(n.clusters)
        self.n_ports = P = len(n.ports)
        self.n_nodes = M + K + P
        b = n.canvas.bbox
        self.origin = np.array([b.x0, b.y0])
        self.scale = np.array([b.width, b.height])

        base = np.zeros((self.n_nodes, NODE_DIM), dtype=np.float32)
        base[:M, 0] = 1
        base[M:M + K, 1] = 1
        base[M + K:, 2] = 1
        for i, m in enumerate(n.macros):
            base[i, 3:5] = (m.width / b.width, m.height / b.height)
        for k, c in enumerate(n.clusters):
            side = np.sqrt(c.area)
            base[M + k, 3:5] = np.clip((side / b.width, side / b.height), 0, 1)
        for j, p in enumerate(n.ports):
            base[M + K + j, _F_XY] = (np.asarray(p.position) - self.origin) / self.scale
            base[M + K + j, _F_PLACED] = 1
        self.base = base
        # per-orientation corner and pin-side blocks for macros
        self.corners = np.zeros((M, 4, 2 * MAX_CORNERS), dtype=np.float32)
        self.sides = np.zeros((M, 4, 4), dtype=np.float32)
        for i, m in enumerate(n.macros):
            for o in ORIENTATIONS:
                self.corners[i, o.index] = _corner_block(apply_orientation(m.shape, o))
                self.sides[i, o.index] = _side_hist(m, o)
            base[i, _F_CORNERS] = self.corners[i, 0]
            base[i, _F_SIDES] = self.sides[i, 0]

        gids = np.zeros(self.n_nodes, dtype=np.int64)
        for i, m in enumerate(n.macros):
            gids[i] = 1 + (m.group_id if m.group_id is not None else 0) % (N_GROUP_IDS - 1)
        self.group_ids = gids
        self.group_of = np.array([m.group_id if m.group_id is not None else -1 for m in n.macros])
        self.adjacency = self._adjacency()

    def node_of(self, ref) -> int:
        n = self.env.netlist
        kind = PinKind(ref.kind)
        if kind is PinKind.MACRO:
            return n.macro_index[ref.owner]
        if kind is PinKind.CLUSTER:
            return self.n_macros + n.cluster_index[ref.owner]
        return self.n_macros + self.n_clusters + n.port_index[ref.owner]

    def _adjacency(self) -> np.ndarray:
        A = np.zeros((self.n_nodes, self.n_nodes), dtype=np.float64)
        for net in self.env.netlist.nets:
            nodes = list(dict.fromkeys(self.node_of(r) for r in net.pins))[:CLIQUE_CAP]
            p = len(nodes)
            if p < 2:
                continue
            w = net.weight / (p - 1)
            for a in nodes:
                for b in nodes:
                    if a != b:
                        A[a, b] += w
        deg = A.sum(1, keepdims=True)
        A = np.divide(A, deg, out=np.zeros_like(A), where=deg > 0)
        return A.astype(np.float32)

    def encode(self, st: EpisodeState) -> GraphFeatures:
        x = self.base.copy()
        for idx, (anchor, o) in st.placed.items():
            cx, cy = self.env.grid.cell_origin(*anchor)
            x[idx, _F_XY] = np.clip((np.array([cx, cy]) - self.origin) / self.scale, 0, 1)
            x[idx, _F_PLACED] = 1
            x[idx, _F_CORNERS] = self.corners[idx, o.index]
            x[idx, _F_SIDES] = self.sides[idx, o.index]
        cur = st.current if st.current is not None else 0

        g = self.env.grid
        owner = st.occ.owner
        sp = np.zeros((SPATIAL_CHANNELS, g.n_rows, g.n_cols), dtype=np.float32)
        sp[0] = owner >= 0
        sp[1] = owner < FREE
        if st.mask is not None:
            sp[2] = st.mask[:g.n_rows, :g.n_cols]
        if st.current is not None:
            same = np.flatnonzero(self.group_of == self.group_of[cur])
            sp[3] = np.isin(owner, same)
        return GraphFeatures(x, self.group_ids.copy(), self.adjacency, np.int64(cur), sp)


def encode_features(env: PlacementEnv, st: EpisodeState, encoder: DesignEncoder | None = None) -> GraphFeatures:
    """Features of ``st``; pass a cached ``encoder`` when encoding many states."""
    return (encoder or DesignEncoder(env)).encode(st)


def stack_features(fs: list[GraphFeatures]) -> GraphFeatures:
    return GraphFeatures(
        np.stack([f.nodes for f in fs]),
        np.stack([f.group_ids for f in fs]),
        fs[0].adjacency,
        np.array([f.current for f in fs], dtype=np.int64),
        np.stack([f.spatial for f in fs]),
    )
