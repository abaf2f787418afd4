"""Clipped-surrogate PPO over the joint (position, orientation) action."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .features import GraphFeatures
from .model import PolicyModel, orient_logp


class NonFiniteLoss(FloatingPointError):
    pass


@dataclass(frozen=True)
class PPOConfig:
    clip: float = 0.2
    epochs: int = 4
    minibatch: int = 64
    lr: float = 3e-4
    gamma: float = 1.0
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    episodes_per_update: int = 32
    max_grad_norm: float = 0.5
    normalize_advantage: bool = True

    def __post_init__(self):
        if not 0 < self.clip < 1:
            raise ValueError("clip must lie in (0, 1)")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.epochs < 1 or self.minibatch < 1 or self.episodes_per_update < 1:
            raise ValueError("epochs, minibatch and episodes_per_update must be positive")


@dataclass
class Transitions:
    """Flat arrays of decision steps from one design."""
    nodes: np.ndarray
    group_ids: np.ndarray
    adjacency: np.ndarray
    current: np.ndarray
    spatial: np.ndarray
    masks: np.ndarray  # (N, n_rows, n_cols) bool
    cell: np.ndarray  # chosen cell, row-major on the real grid
    orient: np.ndarray  # chosen orientation index
    orient_legal: np.ndarray  # (N, 4) legality at the chosen cell
    logp: np.ndarray  # joint log-prob under the collecting policy
    value: np.ndarray
    ret: np.ndarray

    def __len__(self) -> int:
        return len(self.cell)

    def features(self, idx=slice(None)) -> GraphFeatures:
        return GraphFeatures(self.nodes[idx], self.group_ids[idx], self.adjacency, self.current[idx],
                             self.spatial[idx])

    @staticmethod
    def concat(parts: list["Transitions"]) -> "Transitions":
        parts = [p for p in parts if len(p)]
        fields = {}
        for name in Transitions.__dataclass_fields__:
            if name == "adjacency":
                fields[name] = parts[0].adjacency
            else:
                fields[name] = np.concatenate([getattr(p, name) for p in parts])
        return Transitions(**fields)


def evaluate_actions(model: PolicyModel, batch: Transitions, idx):
    """Joint log-prob, summed entropy of both heads and value for stored actions."""
    out = model(batch.features(idx), torch.as_tensor(batch.masks[idx]))
    cell = torch.as_tensor(batch.cell[idx])
    orient = torch.as_tensor(batch.orient[idx])
    legal = torch.as_tensor(batch.orient_legal[idx])
    olp = orient_logp(out.orient_logits, legal)
    rows = torch.arange(len(cell))
    logp = out.pos_logp[rows, cell] + olp[rows, orient]

    def entropy(lp):
        # masked entries are -inf; zero them before the product so no NaN reaches the gradient
        safe = torch.where(torch.isfinite(lp), lp, torch.zeros_like(lp))
        return -(safe.exp() * safe * torch.isfinite(lp)).sum(-1)

    return logp, entropy(out.pos_logp) + entropy(olp), out.value


def ppo_update(model: PolicyModel, optimizer: torch.optim.Optimizer, batch: Transitions,
               cfg: PPOConfig, rng: np.random.Generator) -> dict[str, float]:
    """Several epochs of clipped-surrogate minibatch updates; returns mean diagnostics."""
    if len(batch) == 0:
        raise ValueError("empty buffer")
    adv = batch.ret - batch.value
    if cfg.normalize_advantage and len(adv) > 1:
        sd = adv.std()
        adv = (adv - adv.mean()) / sd if sd > 1e-8 else adv - adv.mean()
    dtype = model.embed.weight.dtype
    adv_t = torch.as_tensor(adv, dtype=dtype)
    ret_t = torch.as_tensor(batch.ret, dtype=dtype)
    old_t = torch.as_tensor(batch.logp, dtype=dtype)

    stats = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "approx_kl": 0.0, "clip_frac": 0.0}
    n_steps = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(len(batch))
        for start in range(0, len(batch), cfg.minibatch):
            idx = np.sort(perm[start:start + cfg.minibatch])
            logp, ent, value = evaluate_actions(model, batch, idx)
            ratio = torch.exp(logp - old_t[idx])
            a = adv_t[idx]
            surr = torch.min(ratio * a, torch.clamp(ratio, 1 - cfg.clip, 1 + cfg.clip) * a)
            pl = -surr.mean()
            vl = ((value - ret_t[idx]) ** 2).mean()
            el = ent.mean()
            loss = pl + cfg.value_coef * vl - cfg.entropy_coef * el
            if not torch.isfinite(loss):
                raise NonFiniteLoss(f"loss became {loss.item()}")
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.max_grad_norm)
            optimizer.step()
            with torch.no_grad():
                stats["policy_loss"] += pl.item()
                stats["value_loss"] += vl.item()
                stats["entropy"] += el.item()
                stats["approx_kl"] += (old_t[idx] - logp).mean().item()
                stats["clip_frac"] += ((ratio - 1).abs() > cfg.clip).double().mean().item()
            n_steps += 1
    out = {k: v / n_steps for k, v in stats.items()}
    if not all(math.isfinite(v) for v in out.values()):
        raise NonFiniteLoss(f"non-finite diagnostics {out}")
    return out
