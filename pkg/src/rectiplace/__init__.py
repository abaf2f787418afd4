"""Rectilinear macro placement: grouping, masked RL environment, proxy costs, PPO agent, SA refinement."""
from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def data_path(name: str) -> Path:
    """Path of a bundled fixture netlist, e.g. ``data_path("toy6.json")``."""
    return Path(str(resources.files(__name__) / "data" / name))
