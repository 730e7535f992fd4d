"""Gaussian-blob image classes for fast training runs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .dataset import IMAGE_SHAPE, Dataset

SPLITS = {"train": 0, "test": 1}


@dataclass(frozen=True)
class SyntheticSpec:
    """Isotropic Gaussian classes around orthogonal means.

    Class means are ``center + (margin / sqrt(2)) * u_k`` for orthonormal
    directions ``u_k``, so every pair of means is ``margin`` apart in image
    space. The directions are spatially smooth (per-channel low-frequency
    cosines) so that small convolutional networks pick them up quickly.
    Samples add noise with covariance ``cov_scale * I``.
    """

    class_count: int = 10
    samples_per_class: int = 100
    margin: float = 8.0
    cov_scale: float = 0.01
    center: float = 0.5
    seed: int = 0
    image_shape: tuple[int, int, int] = IMAGE_SHAPE

    def __post_init__(self):
        if self.class_count < 2:
            raise ConfigError(f"class_count must be >= 2, got {self.class_count}")
        if self.samples_per_class < 1:
            raise ConfigError(f"samples_per_class must be positive, got {self.samples_per_class}")
        if not np.isfinite(self.cov_scale) or self.cov_scale < 0:
            raise ConfigError(f"covariance scale must be non-negative, got {self.cov_scale}")
        if self.class_count > int(np.prod(self.image_shape)):
            raise ConfigError("more classes than image dimensions")

    @property
    def dim(self) -> int:
        return int(np.prod(self.image_shape))

    def bayes_accuracy(self) -> float:
        """Closed-form Bayes accuracy for two classes: Phi(margin / (2 sigma))."""
        from math import erf, sqrt
        if self.cov_scale == 0:
            return 1.0
        z = self.margin / (2.0 * sqrt(self.cov_scale))
        return 0.5 * (1.0 + erf(z / sqrt(2.0)))


def smooth_basis(image_shape, count: int) -> np.ndarray:
    """Orthonormal rows spanning per-channel cosine patterns, at least ``count`` of them."""
    C, H, W = image_shape
    freq = 0
    while C * (freq + 1) ** 2 < count:
        freq += 1
    ys, xs = np.arange(H) + 0.5, np.arange(W) + 0.5
    patterns = []
    for c in range(C):
        for fy in range(freq + 1):
            for fx in range(freq + 1):
                img = np.zeros(image_shape)
                img[c] = np.outer(np.cos(np.pi * fy * ys / H), np.cos(np.pi * fx * xs / W))
                patterns.append(img.reshape(-1))
    q, _ = np.linalg.qr(np.array(patterns).T)
    return q.T


def class_means(spec: SyntheticSpec) -> np.ndarray:
    rng = np.random.default_rng([spec.seed, 7])
    basis = smooth_basis(spec.image_shape, spec.class_count)
    mix, _ = np.linalg.qr(rng.normal(size=(len(basis), spec.class_count)))
    directions = mix.T @ basis
    return spec.center + (spec.margin / np.sqrt(2.0)) * directions


def make_synthetic(spec: SyntheticSpec, split: str = "train") -> Dataset:
    """Draw one split; all splits of a spec share the class means."""
    if split not in SPLITS:
        raise ConfigError(f"split must be one of {sorted(SPLITS)}, got {split!r}")
    means = class_means(spec)
    rng = np.random.default_rng([spec.seed, SPLITS[split]])
    labels = np.repeat(np.arange(spec.class_count), spec.samples_per_class)
    noise = rng.standard_normal((len(labels), spec.dim)) * np.sqrt(spec.cov_scale)
    images = (means[labels] + noise).astype(np.float32).reshape(-1, *spec.image_shape)
    order = rng.permutation(len(labels))
    return Dataset(images[order], labels[order], spec.class_count, f"synthetic-{split}")
