"""Central finite-difference gradient checking in 64-bit."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..autograd.tensor import Tensor, backward, no_grad
from .report import OracleReport


def _scalar(out) -> float:
    return float(np.asarray(out.data if isinstance(out, Tensor) else out).reshape(-1)[0])


def gradcheck(fn: Callable[..., Tensor], inputs: Sequence, h: float = 1e-5,
              exclude: Sequence | None = None, tolerance: float = 1e-4,
              check: str = "gradcheck", fingerprint: str = "") -> OracleReport:
    """Compare autodiff gradients of scalar ``fn(*inputs)`` with central differences.

    ``inputs`` are float64 tensors (parameters of a layer may be passed and
    ignored by ``fn``); they are perturbed in place and restored. Plain arrays
    are wrapped. ``exclude`` optionally gives one boolean mask per input marking
    entries to skip, e.g. non-differentiable points. The error metric is
    ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    tensors = [t if isinstance(t, Tensor) else Tensor(np.asarray(t, dtype=np.float64))
               for t in inputs]
    for i, t in enumerate(tensors):
        if t.dtype != np.float64:
            return OracleReport(check, np.inf, np.inf, tolerance, fingerprint, "rel",
                                f"input {i} is {t.dtype}; gradcheck needs float64")
        t.requires_grad = True
        t.grad = None

    out = fn(*tensors)
    if out.data.size != 1:
        return OracleReport(check, np.inf, np.inf, tolerance, fingerprint, "rel",
                            f"fn must return a scalar, got shape {out.shape}")
    if not np.isfinite(out.data).all():
        return OracleReport(check, np.inf, np.inf, tolerance, fingerprint, "rel",
                            "non-finite output at the unperturbed point")
    backward(out)
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]

    max_abs = max_rel = 0.0
    for i, t in enumerate(tensors):
        mask = None if exclude is None or exclude[i] is None else np.asarray(exclude[i], dtype=bool)
        flat = t.data.reshape(-1)
        grad = analytic[i].reshape(-1)
        for k in range(flat.size):
            if mask is not None and mask.reshape(-1)[k]:
                continue
            orig = flat[k]
            with no_grad():
                flat[k] = orig + h
                f_plus = _scalar(fn(*tensors))
                flat[k] = orig - h
                f_minus = _scalar(fn(*tensors))
            flat[k] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            if not (np.isfinite(numeric) and np.isfinite(grad[k])):
                where = np.unravel_index(k, t.shape)
                return OracleReport(check, np.inf, np.inf, tolerance, fingerprint, "rel",
                                    f"non-finite value at input {i} index {tuple(map(int, where))}")
            err = abs(grad[k] - numeric)
            max_abs = max(max_abs, err)
            max_rel = max(max_rel, err / max(abs(grad[k]), abs(numeric), 1e-8))
    for t in tensors:
        t.grad = None
    return OracleReport(check, max_abs, max_rel, tolerance, fingerprint, "rel")
