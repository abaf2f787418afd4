"""Rollout collection, the training loop and policy evaluation.

Each collector owns its environments and steps its episodes in lockstep so a
single batched forward pass serves all of them. With several workers the
collectors run in threads against a frozen copy of the model; the trainer
is the only writer of the live parameters.
"""
from __future__ import annotations

import copy
import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import torch

from ..env import EpisodeResult, PlacementEnv, StepAction, random_policy, rollout
from ..geometry import ORIENTATIONS
from .features import NODE_DIM, SPATIAL_CHANNELS, DesignEncoder, stack_features
from .model import ModelConfig, PolicyModel, orient_logp, save_checkpoint
from .ppo import PPOConfig, Transitions, ppo_update

EnvFactory = Callable[[], PlacementEnv]

METRIC_FIELDS = ("update", "episodes", "mean_reward", "std_reward", "best_reward", "aborted",
                 "wl", "cong", "dens", "hier", "policy_loss", "value_loss", "entropy", "approx_kl")


class Collector:
    """Runs batches of episodes on private environments."""

    def __init__(self, env_factory: EnvFactory, n_envs: int):
        self.envs = [env_factory() for _ in range(n_envs)]
        self.encoder = DesignEncoder(self.envs[0])
        self.n_max = self.envs[0].grid.n_max

    def run(self, model: PolicyModel, rng: np.random.Generator, greedy: bool = False,
            gamma: float = 1.0) -> tuple[Transitions, list[EpisodeResult]]:
        envs = self.envs
        g = envs[0].grid
        nr, nc, n_max = g.n_rows, g.n_cols, self.n_max
        states = [env.reset(int(rng.integers(2**31))) for env in envs]
        steps: list[list[tuple]] = [[] for _ in envs]
        actions: list[list[StepAction]] = [[] for _ in envs]
        while True:
            live = [i for i, st in enumerate(states) if not st.done]
            if not live:
                break
            feats = stack_features([self.encoder.encode(states[i]) for i in live])
            masks = np.stack([states[i].mask[:nr, :nc] for i in live])
            with torch.no_grad():
                out = model(feats, torch.as_tensor(masks))
            pos_p = out.pos_logp.exp().double().numpy()
            for j, i in enumerate(live):
                st = states[i]
                p = pos_p[j]
                if greedy:
                    cell = int(np.argmax(p))
                else:
                    c = np.cumsum(p)
                    cell = int(min(np.searchsorted(c, rng.random() * c[-1], side="right"), p.size - 1))
                r, col = divmod(cell, nc)
                legal = st.orient_masks[:, r, col].copy()
                olp = orient_logp(out.orient_logits[j:j + 1], torch.as_tensor(legal)[None])[0]
                q = olp.exp().double().numpy()
                if greedy:
                    o = int(np.argmax(q))
                else:
                    cq = np.cumsum(q)
                    o = int(min(np.searchsorted(cq, rng.random() * cq[-1], side="right"), 3))
                logp = float(out.pos_logp[j, cell]) + float(olp[o])
                steps[i].append((feats.nodes[j], feats.group_ids[j], int(feats.current[j]), feats.spatial[j],
                                 masks[j], cell, o, legal, logp, float(out.value[j])))
                a = StepAction(r * n_max + col, ORIENTATIONS[o])
                actions[i].append(a)
                envs[i].step(a)
        results = [env.result(st, acts) for env, st, acts in zip(envs, states, actions)]
        rows = []
        for res, ep in zip(results, steps):
            T = len(ep)
            for t, s in enumerate(ep):
                rows.append(s + (res.reward * gamma ** (T - 1 - t),))
        return self._pack(rows), results

    def _pack(self, rows) -> Transitions:
        g = self.envs[0].grid
        e = self.encoder
        if not rows:
            # every episode aborted before its first decision
            z = np.zeros(0)
            return Transitions(np.zeros((0, e.n_nodes, NODE_DIM), np.float32), np.zeros((0, e.n_nodes), np.int64),
                               e.adjacency, np.zeros(0, np.int64),
                               np.zeros((0, SPATIAL_CHANNELS, g.n_rows, g.n_cols), np.float32),
                               np.zeros((0, g.n_rows, g.n_cols), bool), np.zeros(0, np.int64),
                               np.zeros(0, np.int64), np.zeros((0, 4), bool), z, z, z)
        cols = list(zip(*rows))
        return Transitions(
            nodes=np.stack(cols[0]), group_ids=np.stack(cols[1]), adjacency=e.adjacency,
            current=np.array(cols[2], dtype=np.int64), spatial=np.stack(cols[3]), masks=np.stack(cols[4]),
            cell=np.array(cols[5], dtype=np.int64), orient=np.array(cols[6], dtype=np.int64),
            orient_legal=np.stack(cols[7]), logp=np.array(cols[8]), value=np.array(cols[9]),
            ret=np.array(cols[10]),
        )


@dataclass
class TrainResult:
    model: PolicyModel
    metrics: list[dict] = field(default_factory=list)


def _split(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def _mean(vals) -> float:
    vals = list(vals)
    return float(np.mean(vals)) if vals else float("nan")


def episode_metrics(results: list[EpisodeResult]) -> dict:
    rewards = np.array([r.reward for r in results])
    ok = [r for r in results if not r.aborted]
    return {
        "episodes": len(results),
        "mean_reward": float(rewards.mean()),
        "std_reward": float(rewards.std()),
        "best_reward": float(rewards.max()),
        "aborted": sum(r.aborted for r in results),
        "wl": _mean(r.costs.wl for r in ok),
        "cong": _mean(r.costs.cong for r in ok),
        "dens": _mean(r.costs.dens for r in ok),
        "hier": _mean(r.costs.hier for r in ok),
    }


def write_metrics(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_FIELDS)
        for row in rows:
            w.writerow([row[k] if isinstance(row[k], int) else format(row[k], ".17g") for k in METRIC_FIELDS])


def new_model(seed: int, cfg: ModelConfig = ModelConfig()) -> PolicyModel:
    torch.manual_seed(seed)
    return PolicyModel(cfg)


def train_loop(env_factory: EnvFactory, cfg: PPOConfig = PPOConfig(), updates: int = 100, seed: int = 0,
               workers: int = 1, model: PolicyModel | None = None, out_dir: str | Path | None = None,
               log: Callable[[dict], None] | None = None,
               stop: Callable[[list[dict]], bool] | None = None) -> TrainResult:
    """Train with PPO for ``updates`` rounds of ``cfg.episodes_per_update`` episodes.

    When ``out_dir`` is given, ``metrics.csv`` and ``checkpoint.json`` are
    written there. ``stop`` may end training early after any update.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    model = model if model is not None else new_model(seed)
    metrics: list[dict] = []
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    if updates > 0:
        shares = [s for s in _split(cfg.episodes_per_update, workers) if s]
        collectors = [Collector(env_factory, s) for s in shares]
        optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
        root = np.random.SeedSequence(seed)
        pool = ThreadPoolExecutor(len(collectors)) if len(collectors) > 1 else None
        try:
            for u in range(updates):
                update_seq = root.spawn(1)[0]
                rngs = [np.random.default_rng(s) for s in update_seq.spawn(len(collectors) + 1)]
                snapshot = copy.deepcopy(model).eval()
                jobs = [(c, r) for c, r in zip(collectors, rngs)]
                if pool is None:
                    parts = [c.run(snapshot, r, gamma=cfg.gamma) for c, r in jobs]
                else:
                    parts = list(pool.map(lambda job: job[0].run(snapshot, job[1], gamma=cfg.gamma), jobs))
                batch = Transitions.concat([p[0] for p in parts])
                results = [r for p in parts for r in p[1]]
                row = {"update": u, **episode_metrics(results)}
                if len(batch):
                    row.update(ppo_update(model, optimizer, batch, cfg, rngs[-1]))
                else:
                    row.update(policy_loss=0.0, value_loss=0.0, entropy=0.0, approx_kl=0.0)
                row.pop("clip_frac", None)
                metrics.append(row)
                if log is not None:
                    log(row)
                if stop is not None and stop(metrics):
                    break
        finally:
            if pool is not None:
                pool.shutdown()
    if out is not None:
        write_metrics(metrics, out / "metrics.csv")
        save_checkpoint(model, out / "checkpoint.json", {"seed": seed, "updates": len(metrics)})
    return TrainResult(model, metrics)


@dataclass(frozen=True)
class PolicyEval:
    greedy_reward: float
    greedy: EpisodeResult
    stochastic_mean: float
    stochastic_std: float
    stochastic_costs: dict


def evaluate_policy(model: PolicyModel, env_factory: EnvFactory, episodes: int = 32, seed: int = 0) -> PolicyEval:
    """Greedy rollout plus ``episodes`` stochastic rollouts; works on unseen designs."""
    model = model.eval()
    greedy_tr, greedy_res = Collector(env_factory, 1).run(model, np.random.default_rng(seed), greedy=True)
    stoch = []
    if episodes > 0:
        _, stoch = Collector(env_factory, episodes).run(model, np.random.default_rng(seed + 1))
    m = episode_metrics(stoch) if stoch else {}
    return PolicyEval(
        greedy_reward=greedy_res[0].reward,
        greedy=greedy_res[0],
        stochastic_mean=m.get("mean_reward", math.nan),
        stochastic_std=m.get("std_reward", math.nan),
        stochastic_costs={k: m[k] for k in ("wl", "cong", "dens", "hier")} if m else {},
    )


@dataclass(frozen=True)
class Baseline:
    mean: float
    std: float
    se: float
    episodes: int


def random_baseline(env: PlacementEnv, episodes: int = 200, seed: int = 0) -> Baseline:
    """Reward statistics of the uniform random legal policy."""
    rng = np.random.default_rng(seed)
    pol = random_policy(rng)
    r = np.array([rollout(env, pol, int(rng.integers(2**31))).reward for _ in range(episodes)])
    sd = float(r.std(ddof=1)) if episodes > 1 else 0.0
    return Baseline(float(r.mean()), sd, sd / math.sqrt(episodes), episodes)
