"""Result record shared by every oracle check."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, fields

import numpy as np


@dataclass(frozen=True)
class OracleReport:
    """Outcome of one check; ``passed`` holds exactly when the discrepancy is within tolerance.

    ``metric`` names which discrepancy is compared: ``abs`` or ``rel``.
    """

    check: str
    max_abs: float
    max_rel: float
    tolerance: float
    fingerprint: str = ""
    metric: str = "abs"
    message: str = ""

    @property
    def discrepancy(self) -> float:
        return self.max_rel if self.metric == "rel" else self.max_abs

    @property
    def passed(self) -> bool:
        d = self.discrepancy
        return bool(np.isfinite(d) and d <= self.tolerance)

    def row(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def compare(check: str, actual, expected, tolerance: float, fingerprint: str = "") -> OracleReport:
    """Elementwise comparison of two arrays as an absolute-discrepancy report."""
    a = np.asarray(actual, dtype=np.float64)
    e = np.asarray(expected, dtype=np.float64)
    if a.shape != e.shape:
        return OracleReport(check, float("inf"), float("inf"), tolerance, fingerprint,
                            message=f"shape {a.shape} != {e.shape}")
    diff = np.abs(a - e)
    rel = diff / np.maximum(np.maximum(np.abs(a), np.abs(e)), 1e-8)
    return OracleReport(check, float(diff.max(initial=0.0)), float(rel.max(initial=0.0)),
                        tolerance, fingerprint)


def reports_to_csv(reports) -> str:
    """Render reports as CSV text with a header row."""
    names = [f.name for f in fields(OracleReport)] + ["passed"]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(r.row())
    return buf.getvalue()
