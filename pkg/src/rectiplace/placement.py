"""Placement snapshot shared by the environment, the annealer and the renderer."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import Orientation, Point, apply_orientation, orient_point, orient_side
from .netlist import Macro, Netlist


@dataclass(frozen=True)
class MacroPlacement:
    x: float  # bbox min corner, microns
    y: float
    orientation: Orientation = Orientation.R0
    anchor: tuple[int, int] | None = None  # (row, col) on the coarse grid, if any


@dataclass
class Placement:
    macros: dict[str, MacroPlacement] = field(default_factory=dict)
    clusters: dict[int, Point] = field(default_factory=dict)  # cluster centers

    def copy(self) -> "Placement":
        return Placement(dict(self.macros), dict(self.clusters))

    def translate(self, dx: float, dy: float) -> "Placement":
        return Placement(
            {k: MacroPlacement(v.x + dx, v.y + dy, v.orientation, v.anchor) for k, v in self.macros.items()},
            {k: (x + dx, y + dy) for k, (x, y) in self.clusters.items()},
        )


def macro_center(m: Macro, p: MacroPlacement) -> Point:
    return (p.x + 0.5 * m.width, p.y + 0.5 * m.height)


def placed_shape(m: Macro, p: MacroPlacement):
    return apply_orientation(m.shape, p.orientation).translate(p.x, p.y)


def pin_position(m: Macro, p: MacroPlacement, pin_name: str | None) -> Point:
    if pin_name is None:
        return macro_center(m, p)
    dx, dy = orient_point(m.pin(pin_name).offset, m.width, m.height, p.orientation)
    return (p.x + dx, p.y + dy)


def pin_side(m: Macro, p: MacroPlacement, pin_name: str):
    return orient_side(m.pin(pin_name).side, p.orientation)


def placement_to_dict(n: Netlist, pl: Placement, grid=None) -> dict:
    doc: dict = {"design": n.name}
    if grid is not None:
        doc["grid"] = {"n_rows": grid.n_rows, "n_cols": grid.n_cols,
                       "cell_w": grid.cell_w, "cell_h": grid.cell_h}
    doc["macros"] = [
        {"name": m.name,
         "anchor": None if pl.macros[m.name].anchor is None else list(pl.macros[m.name].anchor),
         "orientation": pl.macros[m.name].orientation.value,
         "x": pl.macros[m.name].x, "y": pl.macros[m.name].y}
        for m in n.macros if m.name in pl.macros
    ]
    doc["clusters"] = [{"id": cid, "x": xy[0], "y": xy[1]} for cid, xy in sorted(pl.clusters.items())]
    return doc


def placement_from_dict(doc: dict) -> Placement:
    macros = {
        d["name"]: MacroPlacement(float(d["x"]), float(d["y"]), Orientation(d.get("orientation", "R0")),
                                  None if d.get("anchor") is None else tuple(int(v) for v in d["anchor"]))
        for d in doc.get("macros", [])
    }
    clusters = {int(d["id"]): (float(d["x"]), float(d["y"])) for d in doc.get("clusters", [])}
    return Placement(macros, clusters)


def save_placement(n: Netlist, pl: Placement, path: str | Path, grid=None) -> None:
    Path(path).write_text(json.dumps(placement_to_dict(n, pl, grid), indent=1) + "\n")


def load_placement(path: str | Path) -> Placement:
    return placement_from_dict(json.loads(Path(path).read_text()))
