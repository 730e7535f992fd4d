"""Train-time augmentation: 4-pixel zero pad, random 32x32 crop, horizontal flip."""
from __future__ import annotations

import numpy as np

PAD = 4


def crop_flip(batch: np.ndarray, offsets: np.ndarray, flips: np.ndarray) -> np.ndarray:
    """Deterministic core of :func:`augment`.

    ``offsets[i] = (dy, dx)`` in ``[0, 2*PAD]`` picks the crop window of image
    ``i`` inside the padded canvas; ``flips[i]`` mirrors it horizontally.
    """
    n, c, h, w = batch.shape
    padded = np.pad(batch, ((0, 0), (0, 0), (PAD, PAD), (PAD, PAD)))
    out = np.empty_like(batch)
    for i, ((dy, dx), flip) in enumerate(zip(offsets, flips)):
        window = padded[i, :, dy:dy + h, dx:dx + w]
        out[i] = window[:, :, ::-1] if flip else window
    return out


def augment(batch: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent random crop and flip (p=0.5) per image."""
    n = len(batch)
    offsets = rng.integers(0, 2 * PAD + 1, size=(n, 2))
    flips = rng.random(n) < 0.5
    return crop_flip(batch, offsets, flips)
