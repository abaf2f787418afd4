import math

import numpy as np
import pytest

from helpers import oracle_wirelength, random_instance
from rectiplace.canvas import make_grid
from rectiplace.geometry import Orientation, RectilinearShape
from rectiplace.netlist import Macro, MacroPin, Net, Netlist, PinKind, PinRef, Port
from rectiplace.placement import MacroPlacement, Placement
from rectiplace.proxy import (
    CostModel,
    ProxyCosts,
    RewardWeights,
    UnplacedEndpoint,
    congestion_cost,
    costs_report,
    density_cost,
    evaluate_placement,
    hierarchy_cost,
    hierarchy_cost_from_boxes,
    reward,
    wirelength_cost,
    write_costs,
)
from rectiplace.geometry import Side


def two_port_design(a, b, size=10.0):
    canvas = RectilinearShape.rectangle(size, size)
    ports = (Port("a", a), Port("b", b))
    net = Net(0, (PinRef(PinKind.PORT, "a"), PinRef(PinKind.PORT, "b")))
    return Netlist("p", canvas, (), (), ports, (net,))


def test_wirelength_example():
    n = two_port_design((0, 0), (3, 4))
    # ports must sit on the boundary for validation, but the cost itself does not care
    assert wirelength_cost(n, make_grid(n.canvas, 10, 10), Placement()) == pytest.approx(0.35, abs=1e-15)


def test_wirelength_coincident():
    n = two_port_design((0, 5), (0, 5))
    assert wirelength_cost(n, make_grid(n.canvas, 10, 10), Placement()) == 0.0


def test_wirelength_matches_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n, pl = random_instance(rng)
        grid = make_grid(n.canvas, 8, 8)
        assert abs(wirelength_cost(n, grid, pl) - oracle_wirelength(n, pl)) < 1e-12


def test_unplaced_endpoint():
    canvas = RectilinearShape.rectangle(10, 10)
    m = Macro("m", RectilinearShape.rectangle(2, 2))
    n = Netlist("u", canvas, (m,), (), (Port("p", (0, 1)),),
                (Net(0, (PinRef(PinKind.MACRO, "m"), PinRef(PinKind.PORT, "p"))),))
    with pytest.raises(UnplacedEndpoint):
        wirelength_cost(n, make_grid(canvas, 5, 5), Placement())


def test_density_examples():
    assert density_cost(np.array([[1.0, 0.5], [0.2, 0.1]])) == 1.0
    assert density_cost(np.zeros((8, 8))) == 0.0
    assert density_cost(np.full((7, 3), 0.37)) == pytest.approx(0.37)


def test_density_top_tenth():
    v = np.arange(20, dtype=float)
    assert density_cost(v) == pytest.approx((19 + 18) / 2)


def test_congestion_single_net():
    # pins at the centers of two horizontally adjacent cells: HPWL_cells = 1 over 2 cells
    n = two_port_design((0.5, 0.5), (1.5, 0.5))
    assert congestion_cost(n, make_grid(n.canvas, 10, 10), Placement()) == pytest.approx(0.2)


def test_congestion_no_nets():
    n = Netlist("e", RectilinearShape.rectangle(10, 10))
    assert congestion_cost(n, make_grid(n.canvas, 10, 10), Placement()) == 0.0


def test_congestion_ignores_weights():
    rng = np.random.default_rng(2)
    n, pl = random_instance(rng)
    grid = make_grid(n.canvas, 10, 10)
    heavy = Netlist(n.name, n.canvas, n.macros, n.clusters, n.ports,
                    tuple(Net(e.id, e.pins, 2 * e.weight) for e in n.nets))
    assert congestion_cost(heavy, grid, pl) == congestion_cost(n, grid, pl)


def test_congestion_macro_blockage_raises_cost():
    canvas = RectilinearShape.rectangle(10, 10)
    m = Macro("m", RectilinearShape.rectangle(10, 10))
    n = Netlist("b", canvas, (m,), (), (Port("a", (0, 0.5)), Port("b", (10, 0.5))),
                (Net(0, (PinRef(PinKind.PORT, "a"), PinRef(PinKind.PORT, "b"))),))
    grid = make_grid(canvas, 10, 10)
    pl = Placement({"m": MacroPlacement(0, 0)})
    free = congestion_cost(n, grid, pl, blockage=0.0)
    blocked = congestion_cost(n, grid, pl, blockage=0.5)
    assert blocked == pytest.approx(2 * free)


def test_hierarchy_example():
    centers = np.array([[0.0, 0.0], [3.0, 4.0]])
    sizes = np.full((2, 2), 2.0)
    assert hierarchy_cost_from_boxes(centers, sizes, [[0, 1]]) == 1.25


def test_hierarchy_abutting_squares():
    centers = np.array([[1.0, 1.0], [3.0, 1.0]])
    assert hierarchy_cost_from_boxes(centers, np.full((2, 2), 2.0), [[0, 1]]) == 0.5


def test_hierarchy_singletons():
    centers = np.array([[1.0, 1.0], [30.0, 1.0]])
    assert hierarchy_cost_from_boxes(centers, np.full((2, 2), 2.0), [[0], [1]]) == 0.0


def test_hierarchy_decreases_on_approach():
    rng = np.random.default_rng(5)
    sizes = rng.uniform(1, 4, size=(3, 2))
    for _ in range(10):
        centers = rng.uniform(-20, 20, size=(3, 2))
        target = centers[1]
        prev = math.inf
        for t in np.linspace(0, 0.95, 20):
            c = centers.copy()
            c[0] = centers[0] + t * (target - centers[0])
            h = hierarchy_cost_from_boxes(c, sizes, [[0, 1], [2]])
            assert h < prev
            prev = h


def test_hierarchy_cost_uses_macro_centers():
    canvas = RectilinearShape.rectangle(20, 20)
    ms = (Macro("g/a", RectilinearShape.rectangle(2, 2), group_id=0),
          Macro("g/b", RectilinearShape.rectangle(2, 2), group_id=0))
    n = Netlist("h", canvas, ms)
    pl = Placement({"g/a": MacroPlacement(-1, -1), "g/b": MacroPlacement(2, 3)})
    assert hierarchy_cost(n, pl) == 1.25


def test_reward_example():
    assert reward(ProxyCosts(0.1, 0.9, 0.5, 1.0), RewardWeights()) == -1.75


def test_reward_zero_and_three_term():
    assert reward(ProxyCosts(0, 0, 0, 0)) == 0.0
    w = RewardWeights(omega=0.0)
    assert reward(ProxyCosts(0.1, 0.9, 0.5, 123.0), w) == reward(ProxyCosts(0.1, 0.9, 0.5, 0.0))


def test_reward_monotone():
    rng = np.random.default_rng(0)
    for _ in range(100):
        c = rng.uniform(0, 2, size=4)
        base = reward(ProxyCosts(*c))
        for k in range(4):
            d = c.copy()
            d[k] += rng.uniform(0, 1)
            assert reward(ProxyCosts(*d)) <= base


def test_translation_invariance():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n, pl = random_instance(rng)
        dx, dy = rng.uniform(-100, 100, size=2)
        moved = Netlist(n.name, n.canvas.translate(dx, dy), n.macros, n.clusters,
                        tuple(Port(p.name, (p.position[0] + dx, p.position[1] + dy)) for p in n.ports), n.nets)
        a = evaluate_placement(n, make_grid(n.canvas, 9, 7), pl)
        b = evaluate_placement(moved, make_grid(moved.canvas, 9, 7), pl.translate(dx, dy))
        for k in ("wl", "cong", "dens", "hier"):
            assert getattr(a, k) == pytest.approx(getattr(b, k), rel=1e-9, abs=1e-12)


def test_oriented_pin_positions():
    canvas = RectilinearShape.rectangle(20, 20)
    m = Macro("m", RectilinearShape.rectangle(4, 2), (MacroPin("e", (4, 1.5), Side.E),))
    n = Netlist("o", canvas, (m,), (), (Port("p", (0, 0)),),
                (Net(0, (PinRef(PinKind.MACRO, "m", "e"), PinRef(PinKind.PORT, "p"))),))
    cm = CostModel(n, make_grid(canvas, 4, 4))
    for o, expect in [(Orientation.R0, (14, 11.5)), (Orientation.MY, (10, 11.5)),
                      (Orientation.MX, (14, 10.5)), (Orientation.R180, (10, 10.5))]:
        pos = cm.pin_positions(*cm.arrays(Placement({"m": MacroPlacement(10, 10, o)})))
        assert tuple(pos[0]) == expect


def test_costs_report(tmp_path):
    c = ProxyCosts(0.1, 0.9, 0.5, 1.0)
    r = costs_report(c)
    assert r["weighted_total"] == 1.75 and r["reward"] == -1.75
    write_costs(c, tmp_path / "costs.json")
    assert set(__import__("json").loads((tmp_path / "costs.json").read_text())) == {
        "wl", "cong", "dens", "hier", "weighted_total", "reward"}


def test_density_from_macros(toy6):
    from rectiplace.canvas import select_grid_dims
    grid = select_grid_dims(toy6)
    pl = Placement({m.name: MacroPlacement(0.0, 0.0) for m in toy6.macros},
                   {c.id: (40.0, 40.0) for c in toy6.clusters})
    c = evaluate_placement(toy6, grid, pl)
    assert all(math.isfinite(v) and v >= 0 for v in c.as_dict().values())
    assert c.dens > 1.0  # everything stacked at the origin
