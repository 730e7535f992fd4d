"""Ablation sweeps: one cell per override set, mean and std of final accuracy over seeds."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..norm.config import ACTIVATIONS, OPERATORS, POSITIONS
from .config import ExperimentConfig, with_overrides
from .train import run_experiment

log = logging.getLogger(__name__)

SUMMARY_FIELDS = ("cell", "overrides", "seeds", "completed", "mean_test_acc", "std_test_acc",
                  "status", "error")

GRIDS: dict[str, list[dict]] = {
    "init": [{"norm.kind": "iebn", "norm.gamma_hat_init": g, "norm.beta_hat_init": b}
             for g in (1.0, 0.0, -1.0) for b in (1.0, 0.0, -1.0)],
    "operator": [{"norm.kind": "iebn", "norm.operator": op} for op in OPERATORS],
    "position": [{"norm.kind": "iebn", "norm.position": pos} for pos in POSITIONS],
    "activation": [{"norm.kind": "iebn", "norm.activation": act} for act in ACTIVATIONS],
    "norm": [{"norm.kind": kind} for kind in ("bn", "iebn", "bn_plus_se", "in")],
}
GRIDS["ablation"] = GRIDS["init"] + GRIDS["operator"] + GRIDS["position"] + GRIDS["activation"]


def cell_name(overrides: dict) -> str:
    parts = [f"{key.split('.')[-1]}={value}" for key, value in overrides.items()
             if key != "norm.kind" or len(overrides) == 1]
    return ",".join(parts) or "base"


def mean_std(values) -> tuple[float, float]:
    """Mean and sample standard deviation; a single value has std 0."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return float("nan"), float("nan")
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return float(values.mean()), std


@dataclass
class CellResult:
    cell: str
    overrides: dict
    seeds: tuple[int, ...]
    accuracies: list[float] = field(default_factory=list)
    error: str = ""

    @property
    def status(self) -> str:
        return "failed" if self.error else "completed"

    def row(self) -> dict:
        mean, std = mean_std(self.accuracies)
        return {"cell": self.cell, "overrides": json.dumps(self.overrides, sort_keys=True),
                "seeds": " ".join(map(str, self.seeds)), "completed": len(self.accuracies),
                "mean_test_acc": repr(mean), "std_test_acc": repr(std), "status": self.status,
                "error": self.error}


def resolve_grid(names) -> list[dict]:
    from ..errors import ConfigError
    cells = []
    for name in names:
        if name not in GRIDS:
            raise ConfigError(f"unknown grid {name!r}; choose from {sorted(GRIDS)}")
        cells.extend(GRIDS[name])
    return cells


def run_sweep(base: ExperimentConfig, grid: list[dict], seeds=None, out_dir=None) -> list[CellResult]:
    """Run every cell of ``grid`` for each seed and write ``sweep_summary.csv``.

    A cell whose configuration or training fails is recorded with its error
    and the sweep moves on.
    """
    seeds = tuple(base.seeds if seeds is None else seeds)
    if not seeds:
        from ..errors import ConfigError
        raise ConfigError("a sweep needs at least one seed")
    out = Path(out_dir if out_dir is not None else base.out)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for overrides in grid:
        name = cell_name(overrides)
        result = CellResult(name, dict(overrides), seeds)
        try:
            config = with_overrides(base, overrides)
            for seed in seeds:
                run = run_experiment(config, seed, out / name / f"seed_{seed}")
                result.accuracies.append(run.final_test_acc)
        except Exception as exc:  # a failed cell is recorded, not fatal
            result.error = f"{type(exc).__name__}: {exc}"
            log.warning("cell %s failed: %s", name, result.error)
        results.append(result)
        write_summary(out / "sweep_summary.csv", results)
    return results


def write_summary(path: Path, results: list[CellResult]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in results:
            writer.writerow(r.row())
