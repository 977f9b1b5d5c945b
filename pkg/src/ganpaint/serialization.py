"""Deterministic weight serialization.

Checkpoints are directories: one raw binary payload per network plus a
JSON manifest. The payload is the concatenation of every state-dict
tensor in sorted key order, so save -> load -> save is byte-identical.
"""

import hashlib
import json
import os

import numpy as np
import torch

from .errors import CheckpointError

MANIFEST_NAME = "manifest.json"


def state_dict_bytes(module):
    """Deterministic (index, payload) for a module's state dict."""
    index = []
    chunks = []
    offset = 0
    sd = module.state_dict()
    for name in sorted(sd):
        arr = sd[name].detach().cpu().contiguous().numpy()
        raw = arr.tobytes()
        index.append(
            {
                "name": name,
                "dtype": str(arr.dtype),
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    return index, b"".join(chunks)


def write_payload(module, path):
    index, payload = state_dict_bytes(module)
    with open(path, "wb") as f:
        f.write(payload)
    return {"tensors": index, "sha256": hashlib.sha256(payload).hexdigest()}


def read_payload(module, path, index):
    try:
        with open(path, "rb") as f:
            payload = f.read()
    except OSError as e:
        raise CheckpointError(f"cannot read weight payload {path}: {e}") from e
    if isinstance(index, dict):
        digest = hashlib.sha256(payload).hexdigest()
        if digest != index["sha256"]:
            raise CheckpointError(f"weight payload {path} fails checksum")
        index = index["tensors"]
    sd = {}
    for entry in index:
        raw = payload[entry["offset"] : entry["offset"] + entry["nbytes"]]
        if len(raw) != entry["nbytes"]:
            raise CheckpointError(f"truncated weight payload for {entry['name']}")
        arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"])
        sd[entry["name"]] = torch.as_tensor(arr.copy())
    try:
        module.load_state_dict(sd)
    except RuntimeError as e:
        raise CheckpointError(f"weight payload inconsistent with architecture: {e}") from e


def write_manifest(directory, manifest):
    with open(os.path.join(directory, MANIFEST_NAME), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)


def read_manifest(directory):
    path = os.path.join(directory, MANIFEST_NAME)
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read checkpoint manifest {path}: {e}") from e
