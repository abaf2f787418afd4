"""Command-line driver: ``rectiplace {group,train,place,eval,render}``.

Settings come from an optional JSON config file; command-line flags take
precedence. Every file a command writes goes under ``--out``.

Exit codes: 0 success, 2 invalid input, 3 no legal action, 4 training
diverged.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .canvas import N_MAX, make_grid, select_grid_dims
from .env import PlacementEnv, random_policy, rollout
from .grouping import GroupingError, assign_groups
from .netlist import NetlistError, load_netlist
from .placement import load_placement, save_placement
from .proxy import RewardWeights, evaluate_placement, write_costs
from .refine import RefineError, SASchedule, anneal, sa_place_from_scratch
from .render import InconsistentPlacement, write_svg

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NO_LEGAL_ACTION = 3
EXIT_DIVERGED = 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    netlist: str | None = None
    weights: RewardWeights = field(default_factory=RewardWeights)
    grid: tuple[int, int] | None = None  # (n_rows, n_cols) override
    ppo: dict = field(default_factory=dict)  # PPOConfig fields
    sa: SASchedule = field(default_factory=SASchedule)
    seed: int = 0
    workers: int = 1
    updates: int = 100
    snapshot_every: int = 10
    out: str = "out"

    def __post_init__(self):
        if self.grid is not None:
            r, c = self.grid
            if not (1 <= r <= N_MAX and 1 <= c <= N_MAX):
                raise ValueError(f"grid override {self.grid} outside 1..{N_MAX}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.updates < 0:
            raise ValueError("updates must be >= 0")


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    doc = json.loads(Path(path).read_text())
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {unknown}")
    if "weights" in doc:
        doc["weights"] = RewardWeights(**doc["weights"])
    if "sa" in doc:
        doc["sa"] = SASchedule(**doc["sa"])
    if doc.get("grid") is not None:
        doc["grid"] = tuple(doc["grid"])
    return RunConfig(**doc)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    over = {}
    for name in ("netlist", "seed", "workers", "updates", "out"):
        v = getattr(args, name, None)
        if v is not None:
            over[name] = v
    return replace(cfg, **over)


def _load(cfg: RunConfig, groups_path: str | None = None):
    if cfg.netlist is None:
        raise CliError("no netlist given (--netlist or config 'netlist')")
    n = load_netlist(cfg.netlist)
    override = json.loads(Path(groups_path).read_text()) if groups_path else None
    n, ga = assign_groups(n, override)
    grid = make_grid(n.canvas, *cfg.grid) if cfg.grid else select_grid_dims(n)
    return n, ga, grid


def _out(cfg: RunConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1) + "\n")


def cmd_group(args) -> int:
    cfg = resolve_config(args)
    out = _out(cfg)
    if args.groups:
        # an override file is passed through untouched once it checks out
        n, ga, _ = _load(cfg, args.groups)
        (out / "groups.json").write_bytes(Path(args.groups).read_bytes())
    else:
        n, ga, _ = _load(cfg)
        _write_json(out / "groups.json", {
            "groups": ga.to_json(),
            "clusters": {str(c.id): {"area": c.area, "pin_count": c.pin_count} for c in n.clusters},
        })
    print(f"G={ga.G}")
    for g in ga.groups:
        print(f"  {g.name or g.group_id}: {len(g.macro_names)}")
    return EXIT_OK


def _env_factory(n, ga, grid, weights):
    return lambda: PlacementEnv(n, ga, grid, weights)


def cmd_train(args) -> int:
    from .agent import NonFiniteLoss, PPOConfig, evaluate_policy, new_model, train_loop

    cfg = resolve_config(args)
    out = _out(cfg)
    n, ga, grid = _load(cfg, args.groups)
    factory = _env_factory(n, ga, grid, cfg.weights)
    ppo = PPOConfig(**cfg.ppo)
    model = new_model(cfg.seed)
    snaps = out / "snapshots"

    def log(row):
        u = row["update"]
        print(f"update {u}: mean reward {row['mean_reward']:.4f} best {row['best_reward']:.4f}", flush=True)
        if cfg.snapshot_every and (u + 1) % cfg.snapshot_every == 0:
            snaps.mkdir(exist_ok=True)
            ev = evaluate_policy(model, factory, episodes=0, seed=cfg.seed)
            write_svg(ev.greedy.placement, n, snaps / f"update_{u + 1:05d}.svg")
            model.train()

    try:
        train_loop(factory, ppo, cfg.updates, cfg.seed, cfg.workers, model=model, out_dir=out, log=log)
    except NonFiniteLoss as exc:
        raise CliError(f"training diverged: {exc}", EXIT_DIVERGED) from exc
    return EXIT_OK


def cmd_place(args) -> int:
    cfg = resolve_config(args)
    out = _out(cfg)
    n, ga, grid = _load(cfg, args.groups)
    modes = [m for m in ("checkpoint", "sa", "random") if getattr(args, m)]
    if len(modes) != 1:
        raise CliError("choose exactly one of --checkpoint, --sa, --random")
    report = {}
    if args.sa:
        res = sa_place_from_scratch(n, grid, cfg.sa, cfg.weights, cfg.seed)
        pl = res.placement
    else:
        env = PlacementEnv(n, ga, grid, cfg.weights)
        if args.random:
            ep = rollout(env, random_policy(np.random.default_rng(cfg.seed)), cfg.seed)
        else:
            from .agent import evaluate_policy, load_checkpoint
            ep = evaluate_policy(load_checkpoint(args.checkpoint), lambda: env, episodes=0, seed=cfg.seed).greedy
        if ep.aborted:
            raise CliError(f"no legal action after placing {len(ep.actions)} macros", EXIT_NO_LEGAL_ACTION)
        pl = ep.placement
    if args.post:
        report["pre_refinement"] = evaluate_placement(n, grid, pl).weighted(cfg.weights)
        res = anneal(n, pl, grid, cfg.sa, cfg.weights, cfg.seed, trace_path=out / "sa_trace.csv")
        pl = res.placement
    costs = evaluate_placement(n, grid, pl)
    save_placement(n, pl, out / "placement.json", grid)
    write_costs(costs, out / "costs.json", cfg.weights)
    if report:
        doc = json.loads((out / "costs.json").read_text())
        doc.update(report)
        _write_json(out / "costs.json", doc)
    write_svg(pl, n, out / "layout.svg")
    print(f"weighted cost {costs.weighted(cfg.weights):.6f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    out = _out(cfg)
    n, _, grid = _load(cfg, args.groups)
    pl = load_placement(args.placement)
    from .render import check_consistent
    check_consistent(n, pl)
    costs = evaluate_placement(n, grid, pl)
    write_costs(costs, out / "costs.json", cfg.weights)
    for k, v in asdict(costs).items():
        print(f"{k} {v:.6f}")
    print(f"weighted {costs.weighted(cfg.weights):.6f}")
    return EXIT_OK


def cmd_render(args) -> int:
    cfg = resolve_config(args)
    out = _out(cfg)
    n, _, _ = _load(cfg, args.groups)
    write_svg(load_placement(args.placement), n, out / "layout.svg")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rectiplace", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--netlist")
        p.add_argument("--config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--groups", help="JSON mapping of group label to macro names")
        return p

    common(sub.add_parser("group", help="derive macro groups")).set_defaults(func=cmd_group)
    p = common(sub.add_parser("train", help="train the placement policy"))
    p.add_argument("--workers", type=int)
    p.add_argument("--updates", type=int)
    p.set_defaults(func=cmd_train)
    p = common(sub.add_parser("place", help="place with a checkpoint or a baseline"))
    p.add_argument("--checkpoint")
    p.add_argument("--sa", action="store_true", help="annealing from scratch")
    p.add_argument("--random", action="store_true", help="uniform random legal policy")
    p.add_argument("--post", action="store_true", help="refine the result by annealing")
    p.set_defaults(func=cmd_place)
    p = common(sub.add_parser("eval", help="proxy costs of a placement file"))
    p.add_argument("--placement", required=True)
    p.set_defaults(func=cmd_eval)
    p = common(sub.add_parser("render", help="SVG of a placement file"))
    p.add_argument("--placement", required=True)
    p.set_defaults(func=cmd_render)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (NetlistError, GroupingError, InconsistentPlacement, RefineError, ValueError, KeyError,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
