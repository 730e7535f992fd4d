"""CIFAR-10/100 binary record parsing.

CIFAR-10 records are ``<label:1><pixels:3072>``; CIFAR-100 records are
``<coarse:1><fine:1><pixels:3072>``. Pixels are channel-major 32x32 bytes.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ConfigError, DataError, FormatError
from .dataset import Dataset

PIXELS = 3 * 32 * 32
VARIANTS = {
    # variant: (label bytes, class count, subdirectory, train files, test files, counts)
    "c10": (1, 10, "cifar-10-batches-bin",
            [f"data_batch_{i}.bin" for i in range(1, 6)], ["test_batch.bin"], (50000, 10000)),
    "c100": (2, 100, "cifar-100-binary", ["train.bin"], ["test.bin"], (50000, 10000)),
}


def _variant(variant: str):
    try:
        return VARIANTS[variant]
    except KeyError:
        raise ConfigError(f"variant must be one of {sorted(VARIANTS)}, got {variant!r}") from None


def record_size(variant: str) -> int:
    return _variant(variant)[0] + PIXELS


def parse_records(raw: bytes, variant: str, source: str = "<bytes>"):
    """Decode raw records into ``(pixels uint8 [N,3,32,32], labels, coarse or None)``."""
    label_bytes, classes = _variant(variant)[:2]
    size = label_bytes + PIXELS
    if len(raw) == 0:
        raise FormatError(f"{source}: empty file at byte offset 0")
    if len(raw) % size:
        offset = len(raw) - len(raw) % size
        raise FormatError(f"{source}: truncated record at byte offset {offset} "
                          f"({len(raw) % size} of {size} bytes)")
    table = np.frombuffer(raw, dtype=np.uint8).reshape(-1, size)
    labels = table[:, label_bytes - 1].astype(np.int64)
    bad = np.flatnonzero(labels >= classes)
    if bad.size:
        raise FormatError(f"{source}: label {labels[bad[0]]} >= {classes} at byte offset "
                          f"{bad[0] * size + label_bytes - 1}")
    coarse = table[:, 0].astype(np.int64) if label_bytes == 2 else None
    pixels = table[:, label_bytes:].reshape(-1, 3, 32, 32)
    return pixels, labels, coarse


def serialize_records(pixels: np.ndarray, labels, variant: str, coarse=None) -> bytes:
    """Inverse of :func:`parse_records`."""
    label_bytes = _variant(variant)[0]
    pixels = np.asarray(pixels, dtype=np.uint8).reshape(len(labels), PIXELS)
    head = [np.asarray(labels, dtype=np.uint8)[:, None]]
    if label_bytes == 2:
        if coarse is None:
            raise ConfigError("CIFAR-100 records need coarse labels")
        head.insert(0, np.asarray(coarse, dtype=np.uint8)[:, None])
    return np.concatenate(head + [pixels], axis=1).tobytes()


def to_float(pixels: np.ndarray) -> np.ndarray:
    return pixels.astype(np.float32) / np.float32(255.0)


def to_bytes(images: np.ndarray) -> np.ndarray:
    """Map [0, 1] floats back to the byte grid."""
    return np.clip(np.rint(np.asarray(images) * 255.0), 0, 255).astype(np.uint8)


def _root(path: Path, subdir: str, files: list[str]) -> Path:
    for candidate in (path, path / subdir):
        if (candidate / files[0]).is_file():
            return candidate
    raise DataError(f"no CIFAR files ({files[0]}) under {path} or {path / subdir}")


def _load_split(root: Path, files: list[str], variant: str, name: str, expected: int | None) -> Dataset:
    parts = []
    for fname in files:
        fpath = root / fname
        if not fpath.is_file():
            raise DataError(f"missing CIFAR file {fpath}")
        parts.append(parse_records(fpath.read_bytes(), variant, str(fpath)))
    pixels = np.concatenate([p for p, _, _ in parts])
    labels = np.concatenate([lab for _, lab, _ in parts])
    coarse = None if parts[0][2] is None else np.concatenate([c for _, _, c in parts])
    if expected is not None and len(labels) != expected:
        raise FormatError(f"{name}: expected {expected} records, found {len(labels)}")
    return Dataset(to_float(pixels), labels, _variant(variant)[1], name, coarse_labels=coarse)


def load_cifar(path, variant: str = "c10", strict_counts: bool = True) -> tuple[Dataset, Dataset]:
    """Load the train and test splits from a CIFAR binary directory.

    With ``strict_counts`` the splits must hold exactly 50000 and 10000 records.
    """
    _, _, subdir, train_files, test_files, counts = _variant(variant)
    root = _root(Path(path), subdir, train_files)
    train = _load_split(root, train_files, variant, f"{variant}-train",
                        counts[0] if strict_counts else None)
    test = _load_split(root, test_files, variant, f"{variant}-test",
                       counts[1] if strict_counts else None)
    return train, test
