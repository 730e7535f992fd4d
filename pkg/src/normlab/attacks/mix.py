"""Mix-dataset attack: contaminate each training batch with out-of-distribution images.

Contaminant samples enter every batch statistic but are excluded from the
loss; they carry the sentinel label ``SENTINEL_LABEL``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError

SENTINEL_LABEL = -1
CONTAMINANTS = ("mnist", "fashion")


@dataclass(frozen=True)
class MixDatasetSpec:
    primary: str = "cifar100"
    contaminant: str = "mnist"
    k: int = 2
    primary_batch: int = 100
    contaminant_unit: int = 120
    joint_labels: bool = False

    def __post_init__(self):
        if self.contaminant not in CONTAMINANTS:
            raise ConfigError(f"contaminant must be one of {CONTAMINANTS}, got {self.contaminant!r}")
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 0:
            raise ConfigError(f"k must be a non-negative integer, got {self.k!r}")
        if self.primary_batch < 1 or self.contaminant_unit < 1:
            raise ConfigError("batch counts must be positive")

    @property
    def contaminant_batch(self) -> int:
        return self.contaminant_unit * self.k

    @property
    def batch_size(self) -> int:
        return self.primary_batch + self.contaminant_batch


def compose_mixed_batch(primary_images: np.ndarray, primary_labels: np.ndarray,
                        contaminant_images: np.ndarray, spec: MixDatasetSpec,
                        rng: np.random.Generator, contaminant_labels: np.ndarray | None = None,
                        num_primary_classes: int | None = None):
    """Concatenate a primary and a contaminant batch in a seeded random order.

    Returns ``(images, labels, loss_mask)``. ``loss_mask`` is true for primary
    samples. With ``spec.joint_labels`` contaminant samples instead get labels
    ``num_primary_classes + label`` and stay in the loss.
    """
    n_p, n_c = spec.primary_batch, spec.contaminant_batch
    if len(primary_images) < n_p or len(primary_labels) < n_p:
        raise DataError(f"need {n_p} primary samples, got {len(primary_images)}")
    if len(contaminant_images) < n_c:
        raise DataError(f"need {n_c} contaminant samples, got {len(contaminant_images)}")
    p_img = np.asarray(primary_images[:n_p])
    c_img = np.asarray(contaminant_images[:n_c], dtype=p_img.dtype)
    if c_img.shape[1:] != p_img.shape[1:]:
        raise DataError(f"contaminant geometry {c_img.shape[1:]} != primary {p_img.shape[1:]}")
    if spec.joint_labels:
        if contaminant_labels is None or num_primary_classes is None:
            raise ConfigError("joint-label mode needs contaminant labels and the primary class count")
        c_lab = num_primary_classes + np.asarray(contaminant_labels[:n_c], dtype=np.int64)
        c_mask = np.ones(n_c, dtype=bool)
    else:
        c_lab = np.full(n_c, SENTINEL_LABEL, dtype=np.int64)
        c_mask = np.zeros(n_c, dtype=bool)
    images = np.concatenate([p_img, c_img])
    labels = np.concatenate([np.asarray(primary_labels[:n_p], dtype=np.int64), c_lab])
    mask = np.concatenate([np.ones(n_p, dtype=bool), c_mask])
    order = rng.permutation(n_p + n_c)
    return images[order], labels[order], mask[order]
