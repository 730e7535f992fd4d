"""Dataset loading, synthetic data, augmentation and batching."""
from .augment import augment, crop_flip
from .cifar import load_cifar, parse_records, serialize_records
from .dataset import Dataset, channel_stats, desk_subset, normalize_splits
from .idx import load_idx, load_idx_dir, parse_idx, serialize_idx, to_cifar_geometry
from .loader import batch_indices, batch_iter
from .synthetic import SyntheticSpec, make_synthetic

__all__ = [
    "Dataset", "channel_stats", "normalize_splits", "desk_subset", "load_cifar",
    "parse_records", "serialize_records", "load_idx", "load_idx_dir", "parse_idx",
    "serialize_idx", "to_cifar_geometry", "augment", "crop_flip", "batch_iter",
    "batch_indices", "SyntheticSpec", "make_synthetic",
]
