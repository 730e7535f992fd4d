import numpy as np
import pytest

from normlab.autograd.tensor import precision
from normlab.data.cifar import serialize_records
from normlab.data.idx import serialize_idx
from normlab.experiment.train import clear_data_cache


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def f64():
    with precision(np.float64):
        yield


@pytest.fixture(autouse=True)
def _fresh_data_cache():
    clear_data_cache()
    yield
    clear_data_cache()


def write_fake_cifar(root, variant="c10", train_per_file=20, test_count=20, seed=0):
    """Random CIFAR-format files under ``root``; returns the directory."""
    rng = np.random.default_rng(seed)
    classes = 10 if variant == "c10" else 100
    root.mkdir(parents=True, exist_ok=True)

    def blob(n):
        pixels = rng.integers(0, 256, size=(n, 3, 32, 32), dtype=np.uint8)
        labels = rng.integers(0, classes, size=n)
        coarse = rng.integers(0, 20, size=n) if variant == "c100" else None
        return serialize_records(pixels, labels, variant, coarse)

    if variant == "c10":
        for i in range(1, 6):
            (root / f"data_batch_{i}.bin").write_bytes(blob(train_per_file))
        (root / "test_batch.bin").write_bytes(blob(test_count))
    else:
        (root / "train.bin").write_bytes(blob(train_per_file * 5))
        (root / "test.bin").write_bytes(blob(test_count))
    return root


def write_fake_idx(root, count=600, seed=0):
    """Random MNIST-style IDX train files under ``root``."""
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    images = rng.integers(0, 256, size=(count, 28, 28), dtype=np.uint8)
    labels = rng.integers(0, 10, size=count).astype(np.uint8)
    (root / "train-images-idx3-ubyte").write_bytes(serialize_idx(images))
    (root / "train-labels-idx1-ubyte").write_bytes(serialize_idx(labels))
    return images, labels


def tiny_overrides(out, **extra):
    """A seconds-scale synthetic configuration."""
    values = {
        "data.dataset": "synthetic",
        "data.synthetic": {"class_count": 4, "samples_per_class": 16, "test_per_class": 8,
                           "margin": 8.0, "cov_scale": 0.01, "seed": 0},
        "model.widths": [4, 8],
        "model.blocks_per_stage": 1,
        "optim.batch_size": 16,
        "schedule.epochs": 2,
        "schedule.milestones": [1],
        "seeds": [0],
        "out": str(out),
    }
    values.update(extra)
    return values


# -- acceptance reporting ------------------------------------------------------

_ACCEPTANCE: dict[int, str] = {}


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        detail = self.detail if exc_type is None else f"{exc_type.__name__}: {exc}".splitlines()[0]
        line = f"criterion {self.number:2d} {status}  {self.title}" + (f" | {detail}" if detail else "")
        _ACCEPTANCE[self.number] = line
        print(line)
        return False


@pytest.fixture
def criterion():
    """``with criterion(n, title) as c:`` records a PASS/FAIL line for criterion ``n``."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
