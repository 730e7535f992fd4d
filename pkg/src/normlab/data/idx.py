"""IDX (MNIST / FashionMNIST) parsing and conversion to 3x32x32 geometry."""
from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from ..errors import DataError, FormatError
from .dataset import Dataset

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

SPLIT_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _read(path: Path) -> bytes:
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


def parse_idx(raw: bytes, expected_magic: int, source: str = "<bytes>") -> np.ndarray:
    """Decode one IDX payload into a uint8 array."""
    if len(raw) < 4:
        raise FormatError(f"{source}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise FormatError(f"{source}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{source}: header truncated at byte offset {len(raw)}")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header != count:
        raise FormatError(f"{source}: dims {dims} need {count} payload bytes, found "
                          f"{len(raw) - header} (payload starts at byte offset {header})")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)


def serialize_idx(array: np.ndarray) -> bytes:
    array = np.asarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    return struct.pack(f">I{array.ndim}I", magic, *array.shape) + array.tobytes()


def to_cifar_geometry(gray: np.ndarray) -> np.ndarray:
    """Zero-pad ``[N,28,28]`` bytes to 32x32, scale to [0,1] and replicate to 3 channels."""
    gray = np.asarray(gray)
    if gray.ndim != 3:
        raise DataError(f"expected [N,H,W] grayscale images, got shape {gray.shape}")
    n, h, w = gray.shape
    if h > 32 or w > 32:
        raise DataError(f"images of {h}x{w} do not fit a 32x32 canvas")
    top, left = (32 - h) // 2, (32 - w) // 2
    canvas = np.zeros((n, 32, 32), dtype=np.float32)
    canvas[:, top:top + h, left:left + w] = gray.astype(np.float32) / np.float32(255.0)
    return np.repeat(canvas[:, None], 3, axis=1)


def _find(root: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx"), stem.replace("-idx", ".idx") + ".gz"):
        for candidate in (root / name, root / "raw" / name):
            if candidate.is_file():
                return candidate
    raise DataError(f"missing IDX file {stem} under {root}")


def load_idx(images_path, labels_path, name: str = "idx") -> Dataset:
    """Load a pair of IDX files as a 3x32x32 :class:`Dataset` with 10 classes."""
    images_path, labels_path = Path(images_path), Path(labels_path)
    images = parse_idx(_read(images_path), IMAGE_MAGIC, str(images_path))
    labels = parse_idx(_read(labels_path), LABEL_MAGIC, str(labels_path))
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    return Dataset(to_cifar_geometry(images), labels.astype(np.int64), 10, name)


def load_idx_dir(root, split: str = "train", name: str = "mnist") -> Dataset:
    """Load a split from a directory holding the standard IDX file names."""
    img, lab = SPLIT_FILES[split]
    root = Path(root)
    return load_idx(_find(root, img), _find(root, lab), f"{name}-{split}")
