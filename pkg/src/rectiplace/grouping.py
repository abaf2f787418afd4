"""Macro grouping from hierarchical names, and standard-cell clustering.

Macros are grouped by a tree of common name sub-strings: walking the tree
level by level, the first node (below the root) that branches into more than
one child becomes a group holding every macro beneath it. Standard cells are
collapsed into soft clusters by greedy heavy-edge coarsening, which stands in
for a full multilevel hypergraph partitioner.
"""
from __future__ import annotations

import heapq
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .netlist import Net, Netlist, PinKind, PinRef, StdCellCluster


class GroupingError(ValueError):
    pass


class EmptyInput(GroupingError):
    pass


class KTooLarge(GroupingError):
    pass


@dataclass
class NameNode:
    substring: str
    children: list[int] = field(default_factory=list)
    macros: list[str] = field(default_factory=list)
    parent: int | None = None


@dataclass
class NameTree:
    nodes: dict[int, NameNode]
    root: int = 0
    separator: str = "/"

    def child(self, nid: int, substring: str) -> int | None:
        for c in self.nodes[nid].children:
            if self.nodes[c].substring == substring:
                return c
        return None

    def child_names(self, nid: int) -> list[str]:
        return [self.nodes[c].substring for c in self.nodes[nid].children]

    def path(self, nid: int) -> str:
        parts = []
        while nid is not None:
            node = self.nodes[nid]
            if node.substring:
                parts.append(node.substring)
            nid = node.parent
        return self.separator.join(reversed(parts))

    def subtree_macros(self, nid: int) -> list[str]:
        out: list[str] = []
        stack = [nid]
        while stack:
            node = self.nodes[stack.pop()]
            out.extend(node.macros)
            stack.extend(reversed(node.children))
        return out

    def depth(self) -> int:
        """Sub-string count of the longest name path."""
        best = 0
        stack = [(self.root, 1 if self.nodes[self.root].substring else 0)]
        while stack:
            nid, d = stack.pop()
            best = max(best, d)
            stack.extend((c, d + 1) for c in self.nodes[nid].children)
        return best


@dataclass(frozen=True)
class Group:
    group_id: int
    macro_names: tuple[str, ...]
    name: str = ""


@dataclass(frozen=True)
class GroupAssignment:
    groups: tuple[Group, ...]

    @property
    def G(self) -> int:
        return len(self.groups)

    def group_of(self) -> dict[str, int]:
        return {m: g.group_id for g in self.groups for m in g.macro_names}

    def sizes(self) -> list[int]:
        return [len(g.macro_names) for g in self.groups]

    def to_json(self) -> dict:
        return {g.name or f"group{g.group_id}": list(g.macro_names) for g in self.groups}


def _tokens(name: str, sep: str) -> list[str]:
    toks = [t for t in name.split(sep) if t]
    return toks or [name]


def build_name_tree(macro_names: Sequence[str]) -> NameTree:
    """Prefix tree of name sub-strings.

    Names are split on '/', or on '_' when no name contains '/'. When every
    name starts with the same token that token is the root, otherwise the
    root is an unnamed node.
    """
    names = sorted(macro_names)
    if not names:
        raise EmptyInput("no macro names")
    sep = "/" if any("/" in n for n in names) else "_"
    paths = [_tokens(n, sep) for n in names]
    firsts = {p[0] for p in paths}
    if len(firsts) == 1:
        root_sub = paths[0][0]
        paths = [p[1:] for p in paths]
    else:
        root_sub = ""
    tree = NameTree({0: NameNode(root_sub)}, 0, sep)
    for name, path in zip(names, paths):
        nid = 0
        for tok in path:
            c = tree.child(nid, tok)
            if c is None:
                c = len(tree.nodes)
                tree.nodes[c] = NameNode(tok, parent=nid)
                tree.nodes[nid].children.append(c)
            nid = c
        tree.nodes[nid].macros.append(name)
    return tree


def _assignment(groups: list[tuple[str, list[str]]]) -> GroupAssignment:
    groups = [(label, sorted(ms)) for label, ms in groups if ms]
    groups.sort(key=lambda g: g[1][0])
    return GroupAssignment(tuple(Group(i, tuple(ms), label) for i, (label, ms) in enumerate(groups)))


def extract_groups(tree: NameTree) -> GroupAssignment:
    """Breadth-wise search for branching nodes; every macro lands in one group."""
    found: list[tuple[str, list[str]]] = []
    queue = deque(tree.nodes[tree.root].children)
    while queue:
        nid = queue.popleft()
        node = tree.nodes[nid]
        if len(node.children) > 1 or (node.children and node.macros):
            found.append((tree.path(nid), tree.subtree_macros(nid)))
        elif node.children:
            queue.append(node.children[0])
        else:
            found.append((tree.path(nid), list(node.macros)))
    root = tree.nodes[tree.root]
    if root.macros:
        # names that end at the root match no group at any depth
        found.append((tree.path(tree.root) or "ungrouped", list(root.macros)))
    return _assignment(found)


def groups_from_mapping(mapping: dict[str, Sequence[str]], macro_names: Sequence[str]) -> GroupAssignment:
    """Human-provided groups; must partition ``macro_names`` exactly."""
    seen: dict[str, str] = {}
    for label, members in mapping.items():
        for m in members:
            if m in seen:
                raise GroupingError(f"macro '{m}' listed in groups '{seen[m]}' and '{label}'")
            seen[m] = label
    missing = sorted(set(macro_names) - set(seen))
    unknown = sorted(set(seen) - set(macro_names))
    if missing:
        raise GroupingError(f"macros not in any group: {missing}")
    if unknown:
        raise GroupingError(f"unknown macros in groups file: {unknown}")
    return _assignment([(label, list(ms)) for label, ms in mapping.items()])


def load_groups(path: str | Path, macro_names: Sequence[str]) -> GroupAssignment:
    return groups_from_mapping(json.loads(Path(path).read_text()), macro_names)


def assign_groups(n: Netlist, override: dict[str, Sequence[str]] | None = None) -> tuple[Netlist, GroupAssignment]:
    names = [m.name for m in n.macros]
    if not names:
        return n, GroupAssignment(())
    ga = groups_from_mapping(override, names) if override is not None else extract_groups(build_name_tree(names))
    return n.with_groups(ga.group_of()), ga


# -- standard-cell clustering ------------------------------------------------

@dataclass
class Clustering:
    assignment: np.ndarray  # cell index -> cluster id
    clusters: list[StdCellCluster]
    nets: list[Net]


Endpoint = int | PinRef


def cluster_standard_cells(cell_areas: Sequence[float], nets: Sequence[tuple[float, Sequence[Endpoint]]],
                           k: int, cell_pins: Sequence[int] | None = None,
                           first_cluster_id: int = 0) -> Clustering:
    """Collapse cells into ``k`` clusters and rewire the nets onto them.

    ``nets`` holds ``(weight, endpoints)`` pairs where an int endpoint is a
    cell index and a PinRef is an external pin (macro or port) left as is.
    Pairs are merged greedily by the rating w / (area_u * area_v) of their
    clique-expanded connection. Nets that collapse to a single pin are dropped.
    """
    n = len(cell_areas)
    if k < 1:
        raise GroupingError("k must be >= 1")
    if k > n:
        raise KTooLarge(f"k={k} exceeds cell count {n}")
    area = [float(a) for a in cell_areas]
    pins = list(cell_pins) if cell_pins is not None else [0] * n

    adj: list[dict[int, float]] = [dict() for _ in range(n)]
    for w, eps in nets:
        cells = sorted({e for e in eps if isinstance(e, (int, np.integer))})
        p = len(set(eps))
        if len(cells) < 2 or p < 2:
            continue
        ew = float(w) / (p - 1)
        for i, a in enumerate(cells):
            for b in cells[i + 1:]:
                adj[a][b] = adj[a].get(b, 0.0) + ew
                adj[b][a] = adj[b].get(a, 0.0) + ew

    parent = list(range(n))
    alive = set(range(n))
    version = [0] * n
    heap: list[tuple[float, int, int, int, int]] = []

    def push(u, v):
        a, b = min(u, v), max(u, v)
        heapq.heappush(heap, (-adj[a][b] / (area[a] * area[b]), a, b, version[a], version[b]))

    for u in range(n):
        for v in adj[u]:
            if u < v:
                push(u, v)

    def merge(u, v):
        # v folds into u
        for x, w in adj[v].items():
            if x == u:
                continue
            adj[u][x] = adj[u].get(x, 0.0) + w
            adj[x][u] = adj[u][x]
            del adj[x][v]
        adj[u].pop(v, None)
        adj[v] = {}
        area[u] += area[v]
        pins[u] += pins[v]
        parent[v] = u
        alive.discard(v)
        version[u] += 1
        version[v] += 1
        for x in adj[u]:
            push(u, x)

    while len(alive) > k:
        if heap:
            _, a, b, va, vb = heapq.heappop(heap)
            if a not in alive or b not in alive or va != version[a] or vb != version[b]:
                continue
            merge(a, b)
        else:
            # disconnected remainder: fold the two smallest clusters together
            a, b = sorted(sorted(alive), key=lambda c: area[c])[:2]
            merge(min(a, b), max(a, b))

    def find(c):
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    roots = [find(c) for c in range(n)]
    order = sorted(alive)
    cid = {r: first_cluster_id + i for i, r in enumerate(order)}
    assignment = np.array([cid[r] for r in roots], dtype=int)
    clusters = [StdCellCluster(cid[r], area[r], pins[r]) for r in order]

    new_nets: list[Net] = []
    for idx, (w, eps) in enumerate(nets):
        refs: list[PinRef] = []
        for e in eps:
            ref = PinRef(PinKind.CLUSTER, int(assignment[e])) if isinstance(e, (int, np.integer)) else e
            if ref not in refs:
                refs.append(ref)
        if len(refs) >= 2:
            new_nets.append(Net(idx, tuple(refs), float(w)))
    return Clustering(assignment, clusters, new_nets)
