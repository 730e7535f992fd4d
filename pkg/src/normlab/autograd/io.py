"""Flat little-endian tensor files and name -> file manifests.

File layout: ``u32 rank``, ``rank x u32 dims``, then the raw values. The
value width (float32 or float64) is recovered from the payload size.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError

MANIFEST = "manifest.json"


def save_tensor(path, array) -> None:
    array = np.asarray(array)
    if array.dtype not in (np.float32, np.float64):
        array = array.astype(np.float64)
    header = struct.pack(f"<I{array.ndim}I", array.ndim, *array.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(array.astype(array.dtype.newbyteorder("<"), copy=False).tobytes(order="C"))


def load_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise FormatError(f"{path}: truncated header at byte 0")
    (rank,) = struct.unpack_from("<I", raw, 0)
    offset = 4 + 4 * rank
    if rank > 4 or len(raw) < offset:
        raise FormatError(f"{path}: bad rank {rank} in header at byte 0")
    dims = struct.unpack_from(f"<{rank}I", raw, 4)
    count = math.prod(dims)
    payload = len(raw) - offset
    if count == 0 and payload == 0:
        return np.zeros(dims, dtype=np.float32)
    if payload == 4 * count:
        dtype = np.dtype("<f4")
    elif payload == 8 * count:
        dtype = np.dtype("<f8")
    else:
        raise FormatError(f"{path}: payload of {payload} bytes at byte {offset} does not "
                          f"match {count} float32 or float64 values")
    return np.frombuffer(raw, dtype=dtype, offset=offset).reshape(dims).astype(dtype.newbyteorder("="))


def save_state(state: dict[str, np.ndarray], directory) -> Path:
    """Write each array to ``<name>.bin`` plus a JSON manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = {}
    for name, array in state.items():
        fname = f"{name}.bin"
        save_tensor(directory / fname, array)
        entries[name] = {"file": fname, "shape": list(np.shape(array)),
                         "dtype": str(np.asarray(array).dtype)}
    manifest = directory / MANIFEST
    manifest.write_text(json.dumps({"tensors": entries}, indent=2, sort_keys=True) + "\n")
    return manifest


def load_state(directory) -> dict[str, np.ndarray]:
    directory = Path(directory)
    meta = json.loads((directory / MANIFEST).read_text())
    state = {}
    for name, entry in meta["tensors"].items():
        array = load_tensor(directory / entry["file"])
        if list(array.shape) != entry["shape"]:
            raise FormatError(f"{entry['file']}: shape {array.shape} disagrees with manifest")
        state[name] = array.astype(entry["dtype"])
    return state


def state_hash(directory) -> str:
    """SHA-256 over the manifest and every tensor file, in manifest order."""
    directory = Path(directory)
    digest = hashlib.sha256()
    manifest = (directory / MANIFEST).read_bytes()
    digest.update(manifest)
    for name, entry in sorted(json.loads(manifest)["tensors"].items()):
        digest.update(name.encode())
        digest.update((directory / entry["file"]).read_bytes())
    return digest.hexdigest()
