"""Independent oracles shared by the test modules."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from rectiplace.geometry import RectilinearShape, validate_rectilinear


def random_polyomino(rng: np.random.Generator, size: int = 7, n_cells: int | None = None) -> set[tuple[int, int]]:
    """Random 4-connected, hole-free set of unit cells (row, col)."""
    grid = np.zeros((size, size), dtype=bool)
    grid[rng.integers(size), rng.integers(size)] = True
    n_cells = n_cells or int(rng.integers(1, size * 2))
    for _ in range(n_cells - 1):
        grown = ndimage.binary_dilation(grid, structure=ndimage.generate_binary_structure(2, 1)) & ~grid
        cand = np.argwhere(grown)
        r, c = cand[rng.integers(len(cand))]
        grid[r, c] = True
    grid = ndimage.binary_fill_holes(grid)
    return {(int(r), int(c)) for r, c in np.argwhere(grid)}


def polyomino_outline(cells: set[tuple[int, int]]) -> list[tuple[float, float]] | None:
    """Boundary of the cell union as a vertex loop, or None if it is not a simple polygon."""
    edges = set()
    for r, c in cells:
        loop = [(c, r), (c, r + 1), (c + 1, r + 1), (c + 1, r)]
        for i in range(4):
            e = (loop[i], loop[(i + 1) % 4])
            if (e[1], e[0]) in edges:
                edges.remove((e[1], e[0]))
            else:
                edges.add(e)
    nxt: dict = {}
    for a, b in edges:
        if a in nxt:
            return None  # pinch vertex
        nxt[a] = b
    start = min(nxt)
    out = [start]
    cur = nxt[start]
    while cur != start:
        out.append(cur)
        cur = nxt[cur]
    if len(out) != len(edges):
        return None
    return [(float(x), float(y)) for x, y in out]


def random_rectilinear(rng: np.random.Generator, max_corners: int = 12, size: int = 7):
    """(shape, exact unit-cell rasterization) for a random simple rectilinear polygon."""
    while True:
        cells = random_polyomino(rng, size)
        outline = polyomino_outline(cells)
        if outline is None:
            continue
        shape = validate_rectilinear(outline)
        if len(shape.corners) <= max_corners:
            return shape, cells


def shoelace(corners) -> float:
    s = 0.0
    for i in range(len(corners)):
        x0, y0 = corners[i]
        x1, y1 = corners[(i + 1) % len(corners)]
        s += x0 * y1 - x1 * y0
    return abs(s) / 2


def rasterize_unit(shape: RectilinearShape) -> set[tuple[int, int]]:
    """Brute force: unit cell (r, c) is inside iff its center is inside the polygon (even-odd)."""
    b = shape.bbox
    out = set()
    cs = shape.corners
    for r in range(int(b.y0), int(b.y1)):
        for c in range(int(b.x0), int(b.x1)):
            px, py = c + 0.5, r + 0.5
            inside = False
            for i in range(len(cs)):
                (x0, y0), (x1, y1) = cs[i], cs[(i + 1) % len(cs)]
                if x0 == x1 and (y0 > py) != (y1 > py) and px < x0:
                    inside = not inside
            if inside:
                out.add((r, c))
    return out


def hpwl_oracle(points_per_net, weights, half_perimeter) -> float:
    num = 0.0
    for pts, w in zip(points_per_net, weights):
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        num += w * ((max(xs) - min(xs)) + (max(ys) - min(ys)))
    return num / (sum(weights) * half_perimeter)


def rects_array(rects, dx: float = 0.0, dy: float = 0.0) -> np.ndarray:
    return np.array([[r.x0 + dx, r.y0 + dy, r.x1 + dx, r.y1 + dy] for r in rects], dtype=float).reshape(-1, 4)


def overlaps(a: np.ndarray, b: np.ndarray, eps: float = 1e-9) -> bool:
    """True if any rectangle of ``a`` shares positive area with one of ``b``."""
    if len(a) == 0 or len(b) == 0:
        return False
    ix = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    iy = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    return bool(np.any((ix > eps) & (iy > eps)))


def inside_box(a: np.ndarray, box, eps: float = 1e-9) -> bool:
    x0, y0, x1, y1 = box
    return bool(np.all(a[:, 0] >= x0 - eps) and np.all(a[:, 1] >= y0 - eps)
                and np.all(a[:, 2] <= x1 + eps) and np.all(a[:, 3] <= y1 + eps))


def shares_edge(a, b, eps: float = 1e-9) -> bool:
    """Bboxes a, b = (x0, y0, x1, y1) touch along a segment of positive length."""
    ox = min(a[2], b[2]) - max(a[0], b[0])
    oy = min(a[3], b[3]) - max(a[1], b[1])
    vertical_contact = (abs(a[2] - b[0]) < eps or abs(b[2] - a[0]) < eps) and oy > eps
    horizontal_contact = (abs(a[3] - b[1]) < eps or abs(b[3] - a[1]) < eps) and ox > eps
    return vertical_contact or horizontal_contact


def flush_aligned(a, b, eps: float = 1e-9) -> bool:
    """Edge contact where one side of ``a`` lines up with the matching side of ``b``."""
    if not shares_edge(a, b, eps):
        return False
    side_by_side = abs(a[2] - b[0]) < eps or abs(b[2] - a[0]) < eps
    if side_by_side:
        return abs(a[1] - b[1]) < eps or abs(a[3] - b[3]) < eps
    return abs(a[0] - b[0]) < eps or abs(a[2] - b[2]) < eps


def random_instance(rng: np.random.Generator, max_nets: int = 20, max_pins: int = 10):
    """Random netlist plus a random (possibly overlapping) placement of every object."""
    from rectiplace.geometry import ORIENTATIONS, Side
    from rectiplace.netlist import Macro, MacroPin, Net, Netlist, PinKind, PinRef, Port, StdCellCluster
    from rectiplace.placement import MacroPlacement, Placement

    W, H = float(rng.uniform(20, 200)), float(rng.uniform(20, 200))
    canvas = RectilinearShape.rectangle(W, H, float(rng.uniform(-50, 50)), float(rng.uniform(-50, 50)))
    b = canvas.bbox
    macros = []
    for i in range(int(rng.integers(1, 6))):
        w, h = float(rng.uniform(1, 15)), float(rng.uniform(1, 15))
        pins = (MacroPin("e", (w, float(rng.uniform(0, h))), Side.E),
                MacroPin("n", (float(rng.uniform(0, w)), h), Side.N))
        macros.append(Macro(f"m{i}", RectilinearShape.rectangle(w, h), pins))
    clusters = [StdCellCluster(i, float(rng.uniform(1, 50))) for i in range(int(rng.integers(0, 4)))]
    ports = [Port(f"p{i}", (b.x0, float(rng.uniform(b.y0, b.y1)))) for i in range(int(rng.integers(0, 3)))]
    endpoints = [PinRef(PinKind.MACRO, m.name, p) for m in macros for p in (None, "e", "n")]
    endpoints += [PinRef(PinKind.CLUSTER, c.id) for c in clusters]
    endpoints += [PinRef(PinKind.PORT, p.name) for p in ports]
    nets = []
    for k in range(int(rng.integers(1, max_nets + 1))):
        size = int(rng.integers(2, max_pins + 1))
        pick = rng.choice(len(endpoints), size=size, replace=True)
        nets.append(Net(k, tuple(endpoints[j] for j in pick), float(rng.uniform(0.1, 3))))
    n = Netlist("rand", canvas, tuple(macros), tuple(clusters), tuple(ports), tuple(nets))
    pl = Placement(
        {m.name: MacroPlacement(float(rng.uniform(b.x0, b.x1)), float(rng.uniform(b.y0, b.y1)),
                                ORIENTATIONS[int(rng.integers(4))]) for m in macros},
        {c.id: (float(rng.uniform(b.x0, b.x1)), float(rng.uniform(b.y0, b.y1))) for c in clusters},
    )
    return n, pl


def oracle_wirelength(n, pl) -> float:
    """Brute-force HPWL written without the library's pin transforms."""
    macros = {m.name: m for m in n.macros}
    ports = {p.name: p.position for p in n.ports}
    pts_per_net, weights = [], []
    for net in n.nets:
        pts = []
        for ref in net.pins:
            kind = getattr(ref.kind, "value", ref.kind)
            if kind == "macro":
                m, p = macros[ref.owner], pl.macros[ref.owner]
                if ref.pin is None:
                    dx, dy = m.width / 2, m.height / 2
                else:
                    dx, dy = next(q.offset for q in m.pins if q.name == ref.pin)
                o = getattr(p.orientation, "value", p.orientation)
                if o in ("MY", "R180"):
                    dx = m.width - dx
                if o in ("MX", "R180"):
                    dy = m.height - dy
                pts.append((p.x + dx, p.y + dy))
            elif kind == "cluster":
                pts.append(pl.clusters[ref.owner])
            else:
                pts.append(ports[ref.owner])
        pts_per_net.append(pts)
        weights.append(net.weight)
    b = n.canvas.bbox
    return hpwl_oracle(pts_per_net, weights, (b.x1 - b.x0) + (b.y1 - b.y0))
