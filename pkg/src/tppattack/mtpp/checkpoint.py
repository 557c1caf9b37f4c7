"""Checkpoint files: a versioned JSON map of name -> shape -> values."""
from __future__ import annotations

import json

import numpy as np

from ..ctes.io import atomic_write_text

__all__ = ["save_params", "load_params", "FORMAT_VERSION"]

FORMAT_VERSION = 1


def save_params(path, values: dict, kind: str, meta=None):
    doc = {
        "version": FORMAT_VERSION,
        "kind": kind,
        "meta": dict(meta or {}),
        "params": {
            name: {"shape": list(arr.shape), "values": arr.ravel().tolist()}
            for name, arr in values.items()
        },
    }
    atomic_write_text(path, json.dumps(doc))


def load_params(path, kind=None, expected_shapes=None):
    """Load a checkpoint; returns (values dict, meta dict).

    Rejects version/kind mismatches, inconsistent entries, and (when
    ``expected_shapes`` is given) any shape that differs from it.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    if kind is not None and doc.get("kind") != kind:
        raise ValueError(f"{path}: checkpoint kind {doc.get('kind')!r}, expected {kind!r}")
    values = {}
    for name, entry in doc["params"].items():
        shape = tuple(entry["shape"])
        arr = np.asarray(entry["values"], dtype=np.float64)
        expected = int(np.prod(shape)) if shape else 1
        if arr.size != expected:
            raise ValueError(f"{path}: {name}: {arr.size} values do not fill shape {shape}")
        values[name] = arr.reshape(shape)
    if expected_shapes is not None:
        if set(values) != set(expected_shapes):
            raise ValueError(f"{path}: parameter names {sorted(values)} do not match "
                             f"expected {sorted(expected_shapes)}")
        for name, shape in expected_shapes.items():
            if values[name].shape != tuple(shape):
                raise ValueError(f"{path}: {name}: shape {values[name].shape} "
                                 f"!= expected {tuple(shape)}")
    return values, doc.get("meta", {})
