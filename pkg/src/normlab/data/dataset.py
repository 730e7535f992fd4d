"""In-memory image classification datasets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError

IMAGE_SHAPE = (3, 32, 32)


@dataclass
class Dataset:
    """Images ``[N, 3, 32, 32]`` (float32, [0, 1] before normalization) with integer labels.

    ``mean``/``std`` hold per-channel normalization statistics once
    :meth:`normalized` has been applied; ``coarse_labels`` is only set for
    CIFAR-100 so records can be re-serialized.
    """

    images: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = "dataset"
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    coarse_labels: np.ndarray | None = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.images) == 0:
            raise DataError(f"{self.name}: dataset is empty")
        if len(self.images) != len(self.labels):
            raise DataError(f"{self.name}: {len(self.images)} images but {len(self.labels)} labels")
        if self.labels.min() < 0 or self.labels.max() >= self.class_count:
            raise DataError(f"{self.name}: labels must lie in [0, {self.class_count})")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices)
        coarse = None if self.coarse_labels is None else self.coarse_labels[indices]
        return Dataset(self.images[indices], self.labels[indices], self.class_count,
                       self.name, self.mean, self.std, coarse)

    def normalized(self, mean, std) -> "Dataset":
        """Standardize each channel with the given statistics."""
        mean = np.asarray(mean, dtype=np.float64)
        std = np.asarray(std, dtype=np.float64)
        images = ((self.images - mean[None, :, None, None]) / std[None, :, None, None])
        return Dataset(images.astype(self.images.dtype), self.labels, self.class_count,
                       self.name, mean, std, self.coarse_labels)


def channel_stats(images: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and (population) std, accumulated in float64."""
    x = np.asarray(images, dtype=np.float64)
    return x.mean(axis=(0, 2, 3)), x.std(axis=(0, 2, 3))


def normalize_splits(train: Dataset, *others: Dataset) -> list[Dataset]:
    """Normalize every split with statistics of ``train``."""
    mean, std = channel_stats(train.images)
    std = np.where(std > 0, std, 1.0)
    return [d.normalized(mean, std) for d in (train, *others)]


def desk_subset(dataset: Dataset, count: int, seed: int = 0) -> Dataset:
    """First ``count`` samples after a fixed-seed shuffle."""
    if count >= len(dataset):
        return dataset
    order = np.random.default_rng(seed).permutation(len(dataset))
    return dataset.subset(order[:count])
