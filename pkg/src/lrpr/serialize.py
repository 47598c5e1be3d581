"""JSON helpers: float64 payloads as base64 little-endian bytes."""

import base64
import hashlib
import json

import numpy as np

from . import __version__


def encode_array(arr):
    arr = np.asarray(arr)
    is_complex = np.iscomplexobj(arr)
    if is_complex:
        flat = np.stack([arr.real, arr.imag], axis=-1).astype("<f8")
    else:
        flat = arr.astype("<f8")
    payload = np.ascontiguousarray(flat).tobytes()
    return {
        "dtype": "complex128" if is_complex else "float64",
        "shape": list(arr.shape),
        "b64": base64.b64encode(payload).decode("ascii"),
    }


def decode_array(doc):
    raw = np.frombuffer(base64.b64decode(doc["b64"]), dtype="<f8")
    shape = tuple(doc["shape"])
    if doc["dtype"] == "complex128":
        raw = raw.reshape(shape + (2,))
        return raw[..., 0] + 1j * raw[..., 1]
    if doc["dtype"] != "float64":
        raise ValueError(f"unsupported dtype {doc['dtype']!r}")
    return raw.reshape(shape).copy()


def dumps(doc):
    """Canonical JSON text (sorted keys, fixed separators, trailing newline)."""
    return json.dumps(doc, sort_keys=True, indent=1, separators=(",", ": ")) + "\n"


def write_json(path, doc):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(doc))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def config_hash(config):
    return hashlib.sha256(dumps(config).encode()).hexdigest()[:16]


def manifest(config, seed):
    return {"tool_version": __version__, "config_hash": config_hash(config), "seed": seed}
