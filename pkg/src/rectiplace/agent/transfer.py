"""Helpers for transfer experiments: perturbed designs and convergence counting."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..netlist import Netlist


def perturb_design(n: Netlist, rng: np.random.Generator, port_jitter: float = 0.15,
                   weight_range: tuple[float, float] = (0.7, 1.3)) -> Netlist:
    """A sibling design: ports slide along their canvas edge and net weights are rescaled.

    Each port moves by up to ``port_jitter`` of its edge length; each net
    weight is multiplied by a factor drawn uniformly from ``weight_range``.
    Macros, clusters and connectivity stay unchanged. Ports are only
    guaranteed to stay on the boundary of a rectangular canvas.
    """
    b = n.canvas.bbox
    ports = []
    for p in n.ports:
        x, y = p.position
        if np.isclose(x, b.x0) or np.isclose(x, b.x1):
            y = float(np.clip(y + rng.uniform(-port_jitter, port_jitter) * b.height, b.y0, b.y1))
        else:
            x = float(np.clip(x + rng.uniform(-port_jitter, port_jitter) * b.width, b.x0, b.x1))
        ports.append(replace(p, position=(x, y)))
    nets = tuple(replace(net, weight=net.weight * float(rng.uniform(*weight_range))) for net in n.nets)
    return replace(n, name=n.name + "-perturbed", ports=tuple(ports), nets=nets)


def trailing_mean(values, window: int = 10) -> np.ndarray:
    """Mean of the last ``window`` entries at every position (shorter at the start)."""
    v = np.asarray(values, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(1, len(v) + 1)
    lo = np.maximum(0, idx - window)
    return (c[idx] - c[lo]) / (idx - lo)


def updates_to_reach(rewards, target: float, window: int = 10) -> int | None:
    """Updates needed until the trailing mean reward first reaches ``target``; None if never."""
    hit = np.flatnonzero(trailing_mean(rewards, window) >= target)
    return int(hit[0]) + 1 if hit.size else None
