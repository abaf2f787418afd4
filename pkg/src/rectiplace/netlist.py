"""Problem-instance data model and its JSON interchange format.

The on-disk layout is described in ``docs/netlist-format.md``. Instances are
immutable once loaded and can be shared freely between rollout workers.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Any

from .geometry import GeometryError, Point, RectilinearShape, Side, validate_rectilinear

FORMAT_VERSION = 1
MAX_NET_PINS = 64


class NetlistError(Exception):
    pass


class ParseError(NetlistError):
    pass


class ValidationError(NetlistError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__(self.violations[0] if self.violations else "invalid netlist")


class PinKind(str, enum.Enum):
    MACRO = "macro"
    CLUSTER = "cluster"
    PORT = "port"


@dataclass(frozen=True)
class MacroPin:
    name: str
    offset: Point
    side: Side


@dataclass(frozen=True)
class Macro:
    name: str
    shape: RectilinearShape
    pins: tuple[MacroPin, ...] = ()
    group_id: int | None = None

    @property
    def width(self) -> float:
        return self.shape.width

    @property
    def height(self) -> float:
        return self.shape.height

    @property
    def area(self) -> float:
        return self.shape.area

    def pin(self, name: str) -> MacroPin:
        for p in self.pins:
            if p.name == name:
                return p
        raise KeyError(name)


@dataclass(frozen=True)
class StdCellCluster:
    id: int
    area: float
    pin_count: int = 0


@dataclass(frozen=True)
class Port:
    name: str
    position: Point


@dataclass(frozen=True)
class PinRef:
    kind: PinKind
    owner: str | int
    pin: str | None = None


@dataclass(frozen=True)
class Net:
    id: int
    pins: tuple[PinRef, ...]
    weight: float = 1.0


@dataclass(frozen=True)
class Netlist:
    name: str
    canvas: RectilinearShape
    macros: tuple[Macro, ...] = ()
    clusters: tuple[StdCellCluster, ...] = ()
    ports: tuple[Port, ...] = ()
    nets: tuple[Net, ...] = ()

    @cached_property
    def macro_index(self) -> dict[str, int]:
        return {m.name: i for i, m in enumerate(self.macros)}

    @cached_property
    def cluster_index(self) -> dict[int, int]:
        return {c.id: i for i, c in enumerate(self.clusters)}

    @cached_property
    def port_index(self) -> dict[str, int]:
        return {p.name: i for i, p in enumerate(self.ports)}

    @property
    def num_macros(self) -> int:
        return len(self.macros)

    def stats(self) -> dict[str, int]:
        return {
            "macros": len(self.macros),
            "clusters": len(self.clusters),
            "ports": len(self.ports),
            "nets": len(self.nets),
        }

    def with_groups(self, group_of: dict[str, int]) -> "Netlist":
        macros = tuple(replace(m, group_id=group_of.get(m.name, m.group_id)) for m in self.macros)
        return replace(self, macros=macros)


def validate_netlist(n: Netlist) -> list[str]:
    """Every violated invariant as a readable string; empty when valid."""
    out: list[str] = []
    seen: set[str] = set()
    for m in n.macros:
        if m.name in seen:
            out.append(f"duplicate macro name '{m.name}'")
        seen.add(m.name)
        if not m.shape.area > 0:
            out.append(f"macro '{m.name}': shape area must be positive")
        pin_names: set[str] = set()
        for p in m.pins:
            if p.name in pin_names:
                out.append(f"macro '{m.name}': duplicate pin '{p.name}'")
            pin_names.add(p.name)
            sides = m.shape.edge_sides(p.offset)
            if not sides:
                out.append(f"macro '{m.name}' pin '{p.name}': offset {p.offset} not on shape boundary")
            elif Side(p.side) not in sides:
                names = "/".join(sorted(s.value for s in sides))
                out.append(f"macro '{m.name}' pin '{p.name}': side {Side(p.side).value} inconsistent with boundary edge {names}")

    cids: set[int] = set()
    for c in n.clusters:
        if c.id in cids:
            out.append(f"duplicate cluster id {c.id}")
        cids.add(c.id)
        if not c.area > 0:
            out.append(f"cluster {c.id}: area must be positive")

    pnames: set[str] = set()
    for p in n.ports:
        if p.name in pnames:
            out.append(f"duplicate port name '{p.name}'")
        pnames.add(p.name)
        if not n.canvas.edge_sides(p.position):
            out.append(f"port '{p.name}': position {p.position} not on canvas boundary")

    macros = {m.name: m for m in n.macros}
    nids: set[int] = set()
    for net in n.nets:
        if net.id in nids:
            out.append(f"duplicate net id {net.id}")
        nids.add(net.id)
        if not (net.weight > 0 and math.isfinite(net.weight)):
            out.append(f"net {net.id}: weight must be positive")
        if len(net.pins) < 2:
            out.append(f"net {net.id}: fewer than 2 pins")
        if len(net.pins) > MAX_NET_PINS:
            out.append(f"net {net.id}: {len(net.pins)} pins exceeds fan-out cap {MAX_NET_PINS}")
        for ref in net.pins:
            kind = PinKind(ref.kind)
            if kind is PinKind.MACRO:
                m = macros.get(ref.owner)
                if m is None:
                    out.append(f"net {net.id}: unknown macro '{ref.owner}'")
                elif ref.pin is not None and all(p.name != ref.pin for p in m.pins):
                    out.append(f"net {net.id}: macro '{ref.owner}' has no pin '{ref.pin}'")
            elif kind is PinKind.CLUSTER:
                if ref.owner not in cids:
                    out.append(f"net {net.id}: unknown cluster {ref.owner}")
            elif ref.owner not in pnames:
                out.append(f"net {net.id}: unknown port '{ref.owner}'")
    return out


def _pt(v: Any, what: str) -> Point:
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ParseError(f"{what}: expected [x, y]")
    try:
        return (float(v[0]), float(v[1]))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{what}: non-numeric coordinate") from exc


def _shape(corners: Any, what: str) -> RectilinearShape:
    if not isinstance(corners, list):
        raise ParseError(f"{what}: 'corners' must be a list")
    pts = [_pt(c, what) for c in corners]
    try:
        return validate_rectilinear(pts)
    except GeometryError as exc:
        raise ValidationError([f"{what}: {type(exc).__name__}: {exc}"]) from exc


def _macro(d: dict) -> Macro:
    name = str(d["name"])
    shape = _shape(d["corners"], f"macro '{name}'")
    pins = []
    for p in d.get("pins", []):
        try:
            side = Side(p["side"])
        except ValueError as exc:
            raise ParseError(f"macro '{name}': bad pin side {p.get('side')!r}") from exc
        pins.append(MacroPin(str(p["name"]), _pt(p["offset"], f"macro '{name}' pin"), side))
    # shapes live in their own frame; shift so the bbox min is the origin
    b = shape.bbox
    if b.x0 != 0 or b.y0 != 0:
        shape = shape.translate(-b.x0, -b.y0)
        pins = [replace(p, offset=(p.offset[0] - b.x0, p.offset[1] - b.y0)) for p in pins]
    gid = d.get("group_id")
    return Macro(name, shape, tuple(pins), None if gid is None else int(gid))


def _pinref(d: dict) -> PinRef:
    try:
        kind = PinKind(d["kind"])
    except ValueError as exc:
        raise ParseError(f"bad pin kind {d.get('kind')!r}") from exc
    owner = int(d["owner"]) if kind is PinKind.CLUSTER else str(d["owner"])
    pin = d.get("pin")
    return PinRef(kind, owner, None if pin is None else str(pin))


def netlist_from_dict(doc: dict) -> Netlist:
    if not isinstance(doc, dict):
        raise ParseError("top-level JSON value must be an object")
    try:
        n = Netlist(
            name=str(doc.get("name", "design")),
            canvas=_shape(doc["canvas"]["corners"], "canvas"),
            macros=tuple(_macro(m) for m in doc.get("macros", [])),
            clusters=tuple(StdCellCluster(int(c["id"]), float(c["area"]), int(c.get("pin_count", 0)))
                           for c in doc.get("clusters", [])),
            ports=tuple(Port(str(p["name"]), _pt(p["position"], f"port {p.get('name')!r}"))
                        for p in doc.get("ports", [])),
            nets=tuple(Net(int(e["id"]), tuple(_pinref(r) for r in e["pins"]), float(e.get("weight", 1.0)))
                       for e in doc.get("nets", [])),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"missing or malformed field: {exc}") from exc
    violations = validate_netlist(n)
    if violations:
        raise ValidationError(violations)
    return n


def load_netlist(path: str | Path) -> Netlist:
    """Read and validate a netlist JSON file.

    Raises ParseError on malformed input and ValidationError naming the
    first failing invariant.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return netlist_from_dict(doc)


def netlist_to_dict(n: Netlist) -> dict:
    def pin(p: MacroPin):
        return {"name": p.name, "offset": list(p.offset), "side": Side(p.side).value}

    def macro(m: Macro):
        d: dict[str, Any] = {"name": m.name, "corners": [list(c) for c in m.shape.corners],
                             "pins": [pin(p) for p in m.pins]}
        if m.group_id is not None:
            d["group_id"] = m.group_id
        return d

    def ref(r: PinRef):
        d: dict[str, Any] = {"kind": PinKind(r.kind).value, "owner": r.owner}
        if r.pin is not None:
            d["pin"] = r.pin
        return d

    return {
        "format_version": FORMAT_VERSION,
        "units": "micron",
        "name": n.name,
        "canvas": {"corners": [list(c) for c in n.canvas.corners]},
        "macros": [macro(m) for m in n.macros],
        "clusters": [{"id": c.id, "area": c.area, "pin_count": c.pin_count} for c in n.clusters],
        "ports": [{"name": p.name, "position": list(p.position)} for p in n.ports],
        "nets": [{"id": e.id, "weight": e.weight, "pins": [ref(r) for r in e.pins]} for e in n.nets],
    }


def save_netlist(n: Netlist, path: str | Path) -> None:
    Path(path).write_text(json.dumps(netlist_to_dict(n), indent=1) + "\n")

