"""ContextLoRA: dependency-aware multi-task LoRA planning, toy training and
pipeline scheduling.

Graphs and cost profiles may be given as dicts or as paths to JSON files.
"""

import json
import os

from . import _core
from ._core import ConfigError, CycleError, Error, InfeasibleError

__all__ = [
    "ConfigError",
    "CycleError",
    "Error",
    "InfeasibleError",
    "layers",
    "minimize_gap",
    "optimize",
    "plan",
    "simulate",
    "train",
]

__version__ = "0.1.0"


def _doc(obj):
    if isinstance(obj, (str, os.PathLike)):
        with open(obj) as f:
            return f.read()
    return json.dumps(obj)


def layers(graph):
    """Topological layers as lists of task names."""
    return json.loads(_core.layers(_doc(graph)))["layers"]


def plan(graph, d_out=4, d_in=0, rank=2, frozen_ratio=None, delta=None):
    """Stage plan; d_in=0 picks 4 columns per task."""
    return json.loads(_core.plan(_doc(graph), d_out, d_in, rank, frozen_ratio, delta))


def train(graph, seed, d_out=4, d_in=0, rank=2, frozen_ratio=None, delta=None,
          steps=200, lr=0.05, samples=32, noise=0.01):
    """Sliding-window toy training on synthetic teacher data."""
    return json.loads(_core.train(_doc(graph), seed, d_out, d_in, rank, frozen_ratio, delta,
                                  steps, lr, samples, noise))


def simulate(costs, train_devices, partition, k, dataset_size, offload=(), serial=False):
    """Simulate one grouping/partition/batch assignment; task roles come from the profile."""
    return json.loads(_core.simulate(_doc(costs), list(train_devices), list(partition), k,
                                     dataset_size, list(offload), serial))


def optimize(costs, k_max, dataset_size, devices=None):
    return json.loads(_core.optimize(_doc(costs), k_max, dataset_size,
                                     None if devices is None else list(devices)))


def minimize_gap(costs, devices=None):
    return json.loads(_core.minimize_gap(_doc(costs), None if devices is None else list(devices)))
