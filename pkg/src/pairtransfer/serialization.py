"""Checkpoints and run manifests (JSON text, floats written round-trip exact)."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .classifier import ClassifierState, architecture_from_dict

CHECKPOINT_FORMAT = "pairtransfer-checkpoint"
CHECKPOINT_VERSION = 1


def checkpoint_dict(state: ClassifierState) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "architecture": state.architecture.to_dict(),
        "rng_seed": int(state.rng_seed),
        "init_scheme": state.init_scheme,
        "theta": [float(x) for x in state.theta],
    }


def save_checkpoint(state: ClassifierState, path) -> None:
    Path(path).write_text(json.dumps(checkpoint_dict(state)) + "\n")


def load_checkpoint(path) -> ClassifierState:
    d = json.loads(Path(path).read_text())
    if d.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a checkpoint file")
    if d.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {d.get('version')}")
    return ClassifierState(
        architecture_from_dict(d["architecture"]),
        np.array(d["theta"], dtype=float),
        int(d["rng_seed"]),
        d.get("init_scheme", "uniform01"),
    )


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")
