"""Two-head policy with a value head.

A small message-passing encoder turns the netlist graph into a context
vector. The position head decodes that vector into a coarse logit image,
resizes it to the real grid and adds a convolutional term read off the
occupancy maps. The orientation head scores the four orientations; at a
chosen cell only the orientations legal there keep their mass.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..geometry import ORIENTATIONS
from ..env import StepAction
from .features import N_GROUP_IDS, NODE_DIM, SPATIAL_CHANNELS, GraphFeatures

CHECKPOINT_FORMAT = "rectiplace-policy"
CHECKPOINT_VERSION = 1


class EmptyMask(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    hidden: int = 64
    rounds: int = 3
    group_dim: int = 8
    decoder_base: int = 4  # decoder starts from a base x base map, upsampled 4x


@dataclass
class PolicyOutput:
    """Batched head outputs on the real grid (n_rows * n_cols cells, row-major)."""
    pos_logp: torch.Tensor  # (B, cells), -inf where masked
    orient_logits: torch.Tensor  # (B, 4), before per-cell masking
    value: torch.Tensor  # (B,)
    n_rows: int
    n_cols: int


class PolicyModel(nn.Module):
    def __init__(self, cfg: ModelConfig = ModelConfig()):
        super().__init__()
        self.cfg = cfg
        H = cfg.hidden
        self.group_emb = nn.Embedding(N_GROUP_IDS, cfg.group_dim)
        self.embed = nn.Linear(NODE_DIM + cfg.group_dim, H)
        self.self_w = nn.ModuleList(nn.Linear(H, H) for _ in range(cfg.rounds))
        self.nbr_w = nn.ModuleList(nn.Linear(H, H, bias=False) for _ in range(cfg.rounds))
        self.context = nn.Linear(2 * H, H)

        b = cfg.decoder_base
        self.dec_in = nn.Linear(H, 32 * b * b)
        self.deconv1 = nn.ConvTranspose2d(32, 16, 4, stride=2, padding=1)
        self.deconv2 = nn.ConvTranspose2d(16, 8, 4, stride=2, padding=1)
        self.dec_out = nn.Conv2d(8, 1, 1)
        self.spatial1 = nn.Conv2d(SPATIAL_CHANNELS, 16, 3, padding=1)
        self.spatial2 = nn.Conv2d(16, 1, 3, padding=1)

        self.orient = nn.Linear(H, len(ORIENTATIONS))
        self.value1 = nn.Linear(H, H)
        self.value2 = nn.Linear(H, 1)

        # zero-initialized output layers: the untrained policy is uniform over legal actions
        for layer in (self.dec_out, self.spatial2, self.orient):
            nn.init.zeros_(layer.weight)
            nn.init.zeros_(layer.bias)

    def encode(self, nodes, group_ids, adjacency, current):
        h = F.relu(self.embed(torch.cat([nodes, self.group_emb(group_ids)], dim=-1)))
        for sw, nw in zip(self.self_w, self.nbr_w):
            h = F.relu(sw(h) + nw(torch.matmul(adjacency, h)))
        pooled = h.mean(dim=1)
        cur = h[torch.arange(h.shape[0]), current]
        return F.relu(self.context(torch.cat([pooled, cur], dim=-1)))

    def forward(self, f: GraphFeatures, masks: torch.Tensor) -> PolicyOutput:
        """``masks``: (B, n_rows, n_cols) bool legality on the real grid."""
        nodes = torch.as_tensor(f.nodes)
        dtype = self.embed.weight.dtype
        ctx = self.encode(nodes.to(dtype), torch.as_tensor(f.group_ids),
                          torch.as_tensor(f.adjacency).to(dtype), torch.as_tensor(f.current))
        B = ctx.shape[0]
        spatial = torch.as_tensor(f.spatial).to(dtype)
        nr, nc = spatial.shape[-2:]
        b = self.cfg.decoder_base
        z = F.relu(self.dec_in(ctx)).view(B, 32, b, b)
        z = F.relu(self.deconv2(F.relu(self.deconv1(z))))
        coarse = self.dec_out(z)
        logits = F.interpolate(coarse, size=(nr, nc), mode="bilinear", align_corners=False)
        logits = logits + self.spatial2(F.relu(self.spatial1(spatial)))
        logits = logits.view(B, nr * nc)
        flat_mask = masks.reshape(B, nr * nc)
        if not bool(flat_mask.any(dim=1).all()):
            raise EmptyMask("every state needs at least one legal position")
        pos_logp = torch.log_softmax(logits.masked_fill(~flat_mask, -math.inf), dim=-1)
        value = self.value2(F.relu(self.value1(ctx))).squeeze(-1)
        return PolicyOutput(pos_logp, self.orient(ctx), value, nr, nc)


def orient_logp(orient_logits: torch.Tensor, legal: torch.Tensor) -> torch.Tensor:
    """Log-probabilities over orientations restricted to ``legal`` (B, 4) bool."""
    return torch.log_softmax(orient_logits.masked_fill(~legal, -math.inf), dim=-1)


def policy_value_forward(model: PolicyModel, f: GraphFeatures, mask: np.ndarray, n_max: int):
    """Single-state distributions in the full ``n_max x n_max`` action space.

    Returns ``(pos_probs (n_max*n_max,), orient_logits (4,), value)``; the
    orientation logits still need the per-cell legality from the state.
    """
    nr, nc = f.spatial.shape[-2:]
    if not mask.any():
        raise EmptyMask("mask has no legal position")
    batched = GraphFeatures(f.nodes[None], f.group_ids[None], f.adjacency,
                            np.asarray([f.current]), f.spatial[None])
    with torch.no_grad():
        out = model(batched, torch.as_tensor(mask[:nr, :nc])[None])
    probs = np.zeros((n_max, n_max))
    probs[:nr, :nc] = out.pos_logp.exp().double().numpy().reshape(nr, nc)
    return probs.ravel(), out.orient_logits[0].double().numpy(), float(out.value[0])


def _choose(p: np.ndarray, rng: np.random.Generator | None, greedy: bool) -> int:
    if greedy:
        return int(np.argmax(p))
    c = np.cumsum(p)
    return int(min(np.searchsorted(c, rng.random() * c[-1], side="right"), len(p) - 1))


def sample_action(pos_probs: np.ndarray, orient_logits: np.ndarray, orient_legal: np.ndarray,
                  n_max: int, rng: np.random.Generator | None = None, greedy: bool = False) -> StepAction:
    """Draw a position, then an orientation among those legal at that cell.

    ``orient_legal`` is the (4, n_max, n_max) per-orientation mask.
    """
    pos = _choose(pos_probs, rng, greedy)
    legal = orient_legal[:, pos // n_max, pos % n_max]
    lg = np.where(legal, orient_logits, -np.inf)
    q = np.exp(lg - lg.max())
    o = _choose(q / q.sum(), rng, greedy)
    return StepAction(pos, ORIENTATIONS[o])


# -- checkpoints ---------------------------------------------------------------

def checkpoint_dict(model: PolicyModel, extra: dict | None = None) -> dict:
    state = {}
    for name, t in model.state_dict().items():
        a = t.detach().cpu().double().numpy()
        state[name] = {"shape": list(a.shape), "data": [float(v) for v in a.ravel()]}
    return {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION,
            "model": asdict(model.cfg), "state": state, "extra": extra or {}}


def save_checkpoint(model: PolicyModel, path: str | Path, extra: dict | None = None) -> None:
    Path(path).write_text(json.dumps(checkpoint_dict(model, extra), separators=(",", ":")) + "\n")


def model_from_dict(doc: dict) -> PolicyModel:
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not a policy checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    model = PolicyModel(ModelConfig(**doc["model"]))
    ref = model.state_dict()
    state = {}
    for name, t in ref.items():
        entry = doc["state"][name]
        state[name] = torch.tensor(entry["data"], dtype=torch.float64).reshape(entry["shape"]).to(t.dtype)
    model.load_state_dict(state)
    return model


def load_checkpoint(path: str | Path) -> PolicyModel:
    return model_from_dict(json.loads(Path(path).read_text()))
