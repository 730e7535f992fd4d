"""Merge metrics CSVs into one long-format table for external plotting."""
from __future__ import annotations

import csv
from pathlib import Path

from ..errors import FormatError
from .train import METRIC_FIELDS

PLOT_METRICS = ("train_loss", "train_acc", "test_loss", "test_acc")
PLOT_FIELDS = ("run_id", "epoch", "metric", "value")


def read_metrics(path) -> list[dict]:
    """Parse one metrics CSV, checking the header and every numeric field."""
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != METRIC_FIELDS:
            raise FormatError(f"{path}:1: expected header {','.join(METRIC_FIELDS)}")
        for line_no, values in enumerate(reader, start=2):
            if len(values) != len(METRIC_FIELDS):
                raise FormatError(f"{path}:{line_no}: expected {len(METRIC_FIELDS)} fields, "
                                  f"got {len(values)}")
            row = dict(zip(METRIC_FIELDS, values))
            try:
                row["epoch"] = int(row["epoch"])
                for name in PLOT_METRICS + ("lr",):
                    row[name] = float(row[name]) if row[name] != "" else None
            except ValueError as exc:
                raise FormatError(f"{path}:{line_no}: {exc}") from None
            rows.append(row)
    return rows


def _run_ids(paths: list[Path]) -> list[str]:
    ids = [p.parent.name or p.stem for p in paths]
    if len(set(ids)) == len(ids):
        return ids
    return [str(p.with_suffix("")) for p in paths]


def emit_plot_data(paths, out_path=None, run_ids=None) -> list[tuple[str, int, str, float]]:
    """Long-format ``(run_id, epoch, metric, value)`` rows; missing values are skipped."""
    paths = [Path(p) for p in paths]
    if not paths:
        raise FormatError("no metrics CSV given")
    run_ids = list(run_ids) if run_ids is not None else _run_ids(paths)
    rows = []
    for run_id, path in zip(run_ids, paths):
        for record in read_metrics(path):
            for metric in PLOT_METRICS:
                if record[metric] is not None:
                    rows.append((run_id, record["epoch"], metric, record[metric]))
    if out_path is not None:
        with Path(out_path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(PLOT_FIELDS)
            for run_id, epoch, metric, value in rows:
                writer.writerow([run_id, epoch, metric, repr(value)])
    return rows


def read_plot_data(path) -> list[tuple[str, int, str, float]]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        if tuple(next(reader, ())) != PLOT_FIELDS:
            raise FormatError(f"{path}:1: expected header {','.join(PLOT_FIELDS)}")
        out = []
        for line_no, row in enumerate(reader, start=2):
            try:
                out.append((row[0], int(row[1]), row[2], float(row[3])))
            except (IndexError, ValueError) as exc:
                raise FormatError(f"{path}:{line_no}: {exc}") from None
    return out
