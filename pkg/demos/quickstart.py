"""Place the 10-macro fixture with a random legal policy, then refine it.

Run with ``python3 demos/quickstart.py``. Writes before/after SVGs to
``demos/out``.
"""
from pathlib import Path

import numpy as np

from rectiplace import data_path
from rectiplace.env import PlacementEnv, random_policy, rollout
from rectiplace.netlist import load_netlist
from rectiplace.proxy import evaluate_placement
from rectiplace.refine import SASchedule, anneal
from rectiplace.render import write_svg

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

n = load_netlist(data_path("toy10.json"))
env = PlacementEnv(n)
print(f"{n.name}: {len(n.macros)} macros on a {env.grid.n_rows}x{env.grid.n_cols} grid")

# One episode: every step picks a uniformly random legal cell and orientation.
ep = rollout(env, random_policy(np.random.default_rng(0)), seed=0)
before = evaluate_placement(n, env.grid, ep.placement)
print("coarse placement:", before)
write_svg(ep.placement, n, out / "coarse.svg")

res = anneal(n, ep.placement, env.grid, SASchedule(sweeps=100), seed=0)
print(f"annealed: {res.initial_cost:.4f} -> {res.final_cost:.4f} (T0={res.t0:.4g})")
write_svg(res.placement, n, out / "refined.svg")
