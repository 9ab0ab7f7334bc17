"""Flat JSON serialization of named parameter arrays."""

from __future__ import annotations

import json
import os

import numpy as np

PARAMS_FORMAT = "shadowsynth-params/1"


def params_to_dict(state: dict) -> dict:
    return {
        "format": PARAMS_FORMAT,
        "params": {
            name: {"shape": list(np.shape(v)), "values": np.asarray(v, dtype=np.float64).ravel().tolist()}
            for name, v in state.items()
        },
    }


def params_from_dict(doc: dict) -> dict:
    if doc.get("format") != PARAMS_FORMAT:
        raise ValueError(f"unsupported parameter format {doc.get('format')!r}")
    state = {}
    for name, item in doc["params"].items():
        values = np.asarray(item["values"], dtype=np.float64)
        shape = tuple(item["shape"])
        if values.size != int(np.prod(shape)):
            raise ValueError(f"{name}: {values.size} values do not fill shape {shape}")
        state[name] = values.reshape(shape)
    return state


def save_params(state: dict, path) -> None:
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        json.dump(params_to_dict(state), fh)
        fh.write("\n")


def load_params(path) -> dict:
    with open(os.fspath(path), encoding="utf-8") as fh:
        return params_from_dict(json.load(fh))
