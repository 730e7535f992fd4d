"""Seeded mini-batch iteration."""
from __future__ import annotations

from typing import Iterator

import numpy as np

from ..errors import ConfigError
from .dataset import Dataset


def epoch_order(n: int, seed: int, epoch: int, shuffle: bool = True) -> np.ndarray:
    if not shuffle:
        return np.arange(n)
    return np.random.default_rng([seed, epoch]).permutation(n)


def batch_indices(n: int, batch_size: int, seed: int = 0, epoch: int = 0,
                  shuffle: bool = True, train: bool = True) -> list[np.ndarray]:
    """Index arrays for one epoch; train mode drops the last partial batch."""
    if batch_size < 1:
        raise ConfigError(f"batch_size must be positive, got {batch_size}")
    if batch_size > n:
        raise ConfigError(f"batch_size {batch_size} exceeds dataset size {n}")
    order = epoch_order(n, seed, epoch, shuffle)
    stop = (n // batch_size) * batch_size if train else n
    return [order[i:i + batch_size] for i in range(0, stop, batch_size)]


def batch_iter(dataset: Dataset, batch_size: int, seed: int = 0, shuffle: bool = True,
               train: bool = True, epoch: int = 0) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(images, labels)`` batches in a per-epoch seeded order."""
    for idx in batch_indices(len(dataset), batch_size, seed, epoch, shuffle, train):
        yield dataset.images[idx], dataset.labels[idx]
