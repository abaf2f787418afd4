"""Two-armed bandit built from a one-macro design.

The canvas holds exactly two anchor cells. A port on the west edge is wired
to the macro, so the west cell is the better arm by a fixed reward margin.
"""
from __future__ import annotations

from ..env import PlacementEnv
from ..geometry import RectilinearShape
from ..netlist import Macro, Net, Netlist, PinKind, PinRef, Port

BEST_ARM = 0  # flat action index of the west cell


def bandit_netlist() -> Netlist:
    canvas = RectilinearShape.rectangle(20.0, 10.0)
    macro = Macro("arm", RectilinearShape.rectangle(10.0, 10.0))
    port = Port("west", (0.0, 5.0))
    net = Net(0, (PinRef(PinKind.MACRO, "arm"), PinRef(PinKind.PORT, "west")))
    return Netlist("bandit", canvas, (macro,), (), (port,), (net,))


def bandit_env() -> PlacementEnv:
    return PlacementEnv(bandit_netlist())
