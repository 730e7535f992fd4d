"""Training and evaluation loop with seeded data order, metrics CSV and checkpoints."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..attacks import MixDatasetSpec, compose_mixed_batch
from ..autograd import ops
from ..autograd.io import save_state, state_hash
from ..autograd.module import Module, forward_hook
from ..autograd.optim import SGD
from ..autograd.tensor import Tensor, backward, get_default_dtype, no_grad, precision
from ..data import (Dataset, SyntheticSpec, augment, batch_indices, desk_subset, load_cifar,
                    load_idx_dir, make_synthetic, normalize_splits)
from ..errors import DataError, NonFiniteError
from ..models import build_model
from .config import ExperimentConfig

log = logging.getLogger(__name__)

METRIC_FIELDS = ("epoch", "train_loss", "train_acc", "test_loss", "test_acc", "wall_seconds", "lr")

# independent RNG streams per seed
_AUGMENT_STREAM, _MIX_STREAM, _CONTAMINANT_STREAM = 101, 202, 303


@dataclass
class MetricsRecord:
    epoch: int
    train_loss: float
    train_acc: float
    test_loss: float
    test_acc: float
    wall_seconds: float | None
    lr: float

    def row(self) -> list[str]:
        wall = "" if self.wall_seconds is None else repr(float(self.wall_seconds))
        return [str(self.epoch), repr(float(self.train_loss)), repr(float(self.train_acc)),
                repr(float(self.test_loss)), repr(float(self.test_acc)), wall,
                repr(float(self.lr))]


@dataclass
class RunResult:
    seed: int
    out_dir: Path
    records: list[MetricsRecord] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def final_test_acc(self) -> float:
        return self.records[-1].test_acc


# -- data ---------------------------------------------------------------------

_CACHE: dict = {}


def _contaminant(config: ExperimentConfig) -> Dataset:
    spec = config.attack
    roots = [config.data.contaminant_dir] if config.data.contaminant_dir else []
    if config.data.data_dir:
        roots.append(str(Path(config.data.data_dir) / spec.contaminant))
    errors = []
    for root in roots:
        try:
            return load_idx_dir(root, "train", spec.contaminant)
        except DataError as exc:
            errors.append(str(exc))
    raise DataError(f"no {spec.contaminant} IDX files found; tried {roots or 'nothing'}: "
                    + "; ".join(errors))


def load_data(config: ExperimentConfig):
    """Normalized ``(train, test, contaminant-or-None)`` for ``config`` (cached)."""
    d = config.data
    attack = config.attack if isinstance(config.attack, MixDatasetSpec) else None
    key = (d.dataset, d.data_dir, d.contaminant_dir, d.train_subset, d.test_subset, d.full,
           yaml.safe_dump(d.synthetic, sort_keys=True), attack and attack.contaminant)
    if key in _CACHE:
        return _CACHE[key]
    if d.dataset == "synthetic":
        options = dict(d.synthetic)
        test_per_class = options.pop("test_per_class", options.get("samples_per_class", 50))
        spec = SyntheticSpec(**options)
        train = make_synthetic(spec, "train")
        test_spec = SyntheticSpec(**{**options, "samples_per_class": test_per_class})
        test = make_synthetic(test_spec, "test")
    else:
        if d.data_dir is None:
            raise DataError(f"{d.dataset} needs a data directory (--data-dir)")
        variant = "c10" if d.dataset == "cifar10" else "c100"
        train, test = load_cifar(d.data_dir, variant)
        if not d.full:
            train = desk_subset(train, d.train_subset, seed=0)
            test = desk_subset(test, d.test_subset, seed=0)
    pieces = [train, test]
    if attack is not None and attack.k > 0:
        pieces.append(_contaminant(config))
    normalized = normalize_splits(*pieces)
    result = (normalized[0], normalized[1], normalized[2] if len(normalized) > 2 else None)
    _CACHE[key] = result
    return result


def clear_data_cache() -> None:
    _CACHE.clear()


# -- non-finite diagnosis --------------------------------------------------------

def locate_nonfinite(model: Module, images: np.ndarray) -> str:
    """Name of the first module whose output is non-finite on ``images``."""
    names = {id(m): (name or "model") for name, m in model.named_modules()}
    found: list[str] = []

    def hook(module, out):
        if not found and isinstance(out, Tensor) and not np.isfinite(out.data).all():
            found.append(names.get(id(module), type(module).__name__))

    with no_grad(), forward_hook(hook):
        model(_input(images))
    return found[0] if found else "loss"


def _input(images: np.ndarray) -> Tensor:
    return Tensor(images.astype(get_default_dtype(), copy=False))


# -- loops ----------------------------------------------------------------------

def evaluate(model: Module, dataset: Dataset, batch_size: int) -> tuple[float, float]:
    """Mean loss and accuracy (percent) in eval mode, every sample exactly once."""
    model.eval()
    total_loss, correct = 0.0, 0
    with no_grad():
        for idx in batch_indices(len(dataset), min(batch_size, len(dataset)), shuffle=False,
                                 train=False):
            logits = model(_input(dataset.images[idx]))
            labels = dataset.labels[idx]
            total_loss += float(ops.cross_entropy(logits, labels).item()) * len(idx)
            correct += int((logits.data.argmax(axis=1) == labels).sum())
    model.train()
    return total_loss / len(dataset), 100.0 * correct / len(dataset)


class _ContaminantStream:
    """Endless seeded sequence of contaminant batches."""

    def __init__(self, dataset: Dataset, seed: int):
        self.dataset, self.seed = dataset, seed
        self.cycle, self.order, self.pos = 0, np.arange(0), 0

    def take(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        if n > len(self.dataset):
            raise DataError(f"need {n} contaminant samples per batch, dataset has {len(self.dataset)}")
        if self.pos + n > len(self.order):
            self.order = np.random.default_rng([self.seed, _CONTAMINANT_STREAM, self.cycle]) \
                .permutation(len(self.dataset))
            self.cycle += 1
            self.pos = 0
        idx = self.order[self.pos:self.pos + n]
        self.pos += n
        return self.dataset.images[idx], self.dataset.labels[idx]


def _write_csv(path: Path, records: list[MetricsRecord]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_FIELDS)
        for r in records:
            writer.writerow(r.row())


def _summary_line(config: ExperimentConfig, seed: int, records: list[MetricsRecord]) -> str:
    final, best = records[-1].test_acc, max(r.test_acc for r in records[1:] or records)
    return (f"{config.name} seed={seed} norm={config.norm.kind}: final test acc {final:.2f}%, "
            f"best {best:.2f}%")


def run_experiment(config: ExperimentConfig, seed: int | None = None,
                   out_dir=None) -> RunResult:
    """Train one seed of ``config`` and write ``metrics.csv``, ``summary.json`` and a checkpoint.

    Row 0 of the metrics is an evaluation before any update; row ``e >= 1``
    reports training epoch ``e``, run at ``lr0 * gamma ** (#milestones <= e)``.
    Raises :class:`NonFiniteError` (after writing the partial metrics) when the
    loss stops being finite.
    """
    seed = config.seeds[0] if seed is None else seed
    out = Path(out_dir if out_dir is not None else Path(config.out) / f"seed_{seed}")
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(yaml.safe_dump(config.to_dict(), sort_keys=True))
    dtype = np.float32 if config.precision == "float32" else np.float64
    result = RunResult(seed, out)
    started = time.perf_counter()

    with precision(dtype):
        train, test, contaminant = load_data(config)
        model_spec = config.model
        if config.attack is not None and not isinstance(config.attack, MixDatasetSpec):
            model_spec = _with_noise(model_spec, config.attack)
        model = build_model(model_spec, seed)
        opt = SGD(model.parameters(), lr=config.optim.lr, momentum=config.optim.momentum,
                  weight_decay=config.optim.weight_decay)
        aug_rng = np.random.default_rng([seed, _AUGMENT_STREAM])
        mix_rng = np.random.default_rng([seed, _MIX_STREAM])
        mix = config.attack if isinstance(config.attack, MixDatasetSpec) else None
        stream = _ContaminantStream(contaminant, seed) if contaminant is not None else None
        batch_size = mix.primary_batch if mix is not None else config.optim.batch_size
        eval_bs = config.optim.eval_batch_size

        def wall():
            return time.perf_counter() - started if config.record_wall_time else None

        tr_loss, tr_acc = evaluate(model, train, eval_bs)
        te_loss, te_acc = evaluate(model, test, eval_bs)
        result.records.append(MetricsRecord(0, tr_loss, tr_acc, te_loss, te_acc, wall(),
                                            config.schedule.lr_at(config.optim.lr, 0)))

        for epoch in range(1, config.schedule.epochs + 1):
            opt.lr = config.schedule.lr_at(config.optim.lr, epoch)
            model.train()
            loss_sum, correct, seen = 0.0, 0, 0
            for idx in batch_indices(len(train), batch_size, seed=seed, epoch=epoch):
                images, labels = train.images[idx], train.labels[idx]
                if config.data.augment:
                    images = augment(images, aug_rng)
                mask = None
                if stream is not None:
                    c_img, c_lab = stream.take(mix.contaminant_batch)
                    images, labels, mask = compose_mixed_batch(
                        images, labels, c_img, mix, mix_rng, c_lab, train.class_count)
                logits = model(_input(images))
                loss = ops.cross_entropy(logits, labels, mask)
                value = loss.item()
                if not math.isfinite(value):
                    site = locate_nonfinite(model, images)
                    _write_csv(out / "metrics.csv", result.records)
                    result.summary = {"status": "aborted", "seed": seed, "epoch": epoch,
                                      "site": site}
                    (out / "summary.json").write_text(json.dumps(result.summary, indent=2) + "\n")
                    raise NonFiniteError(f"non-finite loss at epoch {epoch}; first non-finite "
                                         f"tensor produced by {site}", site=site)
                opt.zero_grad()
                backward(loss)
                opt.step()
                active = np.ones(len(labels), dtype=bool) if mask is None else mask
                n_active = int(active.sum())
                loss_sum += value * n_active
                correct += int((logits.data.argmax(axis=1) == labels)[active].sum())
                seen += n_active
            te_loss, te_acc = evaluate(model, test, eval_bs)
            record = MetricsRecord(epoch, loss_sum / seen, 100.0 * correct / seen, te_loss,
                                   te_acc, wall(), opt.lr)
            result.records.append(record)
            log.info("epoch %d: train loss %.4f acc %.2f | test loss %.4f acc %.2f | lr %g",
                     epoch, record.train_loss, record.train_acc, te_loss, te_acc, opt.lr)

    _write_csv(out / "metrics.csv", result.records)
    save_state(model.state_dict(), out / "checkpoint")
    line = _summary_line(config, seed, result.records)
    result.summary = {
        "status": "completed", "seed": seed, "name": config.name, "norm": config.norm.kind,
        "final_test_acc": result.records[-1].test_acc,
        "best_test_acc": max(r.test_acc for r in result.records[1:] or result.records),
        "checkpoint_hash": state_hash(out / "checkpoint"),
        "wall_seconds": time.perf_counter() - started, "summary": line,
    }
    (out / "summary.json").write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    log.info(line)
    return result


def _with_noise(spec, noise):
    from dataclasses import replace
    return replace(spec, norm=spec.norm.replace(noise=noise))
