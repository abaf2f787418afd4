"""SVG rendering of a placement.

Output is SVG 1.1 with a fixed element order (canvas, macros in netlist
order, pins, clusters) and fixed number formatting, so the same placement
always produces the same bytes.
"""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import quoteattr

from .geometry import Side, apply_orientation
from .netlist import Netlist
from .placement import Placement, pin_position, pin_side

PALETTE = ("#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
           "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6", "#d37295")
UNGROUPED = "#cccccc"
_TICK = {Side.N: (0, 1), Side.S: (0, -1), Side.E: (1, 0), Side.W: (-1, 0)}


class InconsistentPlacement(ValueError):
    pass


def _num(v: float) -> str:
    s = format(float(v), ".6f").rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def group_color(group_id: int | None) -> str:
    return UNGROUPED if group_id is None else PALETTE[group_id % len(PALETTE)]


def check_consistent(n: Netlist, pl: Placement) -> None:
    names = {m.name for m in n.macros}
    extra = sorted(set(pl.macros) - names)
    if extra:
        raise InconsistentPlacement(f"placement has unknown macros: {extra}")
    missing = sorted(names - set(pl.macros))
    if missing:
        raise InconsistentPlacement(f"placement lacks macros: {missing}")
    ids = {c.id for c in n.clusters}
    unknown = sorted(set(pl.clusters) - ids)
    if unknown:
        raise InconsistentPlacement(f"placement has unknown clusters: {unknown}")


def render_svg(pl: Placement, n: Netlist, scale: float = 4.0) -> str:
    """SVG document of ``pl``; the canvas y axis points up."""
    check_consistent(n, pl)
    b = n.canvas.bbox
    pad = 0.02 * max(b.width, b.height)
    tick = 0.015 * max(b.width, b.height)
    W, H = b.width + 2 * pad, b.height + 2 * pad
    x0, y1 = b.x0 - pad, b.y1 + pad

    def X(x):
        return _num(x - x0)

    def Y(y):
        return _num(y1 - y)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_num(W * scale)}" '
        f'height="{_num(H * scale)}" viewBox="0 0 {_num(W)} {_num(H)}">',
        f"<title>{n.name}</title>",
        '<polygon class="canvas" points="' + " ".join(f"{X(x)},{Y(y)}" for x, y in n.canvas.corners)
        + f'" fill="#ffffff" stroke="#000000" stroke-width="{_num(tick / 4)}"/>',
    ]
    for m in n.macros:
        p = pl.macros[m.name]
        color = group_color(m.group_id)
        out.append(f'<g class="macro" id={quoteattr(m.name)}>')
        for r in apply_orientation(m.shape, p.orientation).rects:
            r = r.translate(p.x, p.y)
            out.append(f'<rect x="{X(r.x0)}" y="{Y(r.y1)}" width="{_num(r.width)}" height="{_num(r.height)}" '
                       f'fill="{color}" stroke="none"/>')
        out.append("</g>")
    for m in n.macros:
        p = pl.macros[m.name]
        for pin in m.pins:
            x, y = pin_position(m, p, pin.name)
            dx, dy = _TICK[pin_side(m, p, pin.name)]
            out.append(f'<line class="pin" x1="{X(x)}" y1="{Y(y)}" x2="{X(x + dx * tick)}" y2="{Y(y + dy * tick)}" '
                       f'stroke="#000000" stroke-width="{_num(tick / 3)}"/>')
    for cid, (x, y) in sorted(pl.clusters.items()):
        out.append(f'<circle class="cluster" cx="{X(x)}" cy="{Y(y)}" r="{_num(tick / 2)}" fill="#333333"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(pl: Placement, n: Netlist, path: str | Path) -> None:
    Path(path).write_text(render_svg(pl, n))
