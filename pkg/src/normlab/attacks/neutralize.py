"""Algebra of the constant-noise attack.

With ``D = (x - mu) / sigma`` and noise ``(a, b)``:

(a) attacked BN with ``(gamma / a, beta - b * gamma / a)`` equals clean BN with ``(gamma, beta)``
(b) attacked IEBN (gate on gamma) equals ``D * (a gamma d) + (b gamma d + beta)``
(c) attacked IEBN (gate on beta) equals ``D * a gamma + (b gamma + beta d)``
"""
from __future__ import annotations

import numpy as np

from ..autograd.tensor import Tensor, precision
from ..norm.layers import BatchNorm2d, IEBN2d
from .noise import ConstantNoiseSpec


def _standardized(x: np.ndarray, eps: float) -> np.ndarray:
    mu = x.mean(axis=(0, 2, 3), keepdims=True)
    var = ((x - mu) ** 2).mean(axis=(0, 2, 3), keepdims=True)
    return (x - mu) / np.sqrt(var + eps)


def _gate(x: np.ndarray, gamma_hat: np.ndarray, beta_hat: np.ndarray) -> np.ndarray:
    m = x.mean(axis=(2, 3))
    return 1.0 / (1.0 + np.exp(-(gamma_hat * m + beta_hat)))


def _set(layer, **params) -> None:
    for name, value in params.items():
        getattr(layer, name).data = np.array(value, dtype=np.float64)


def neutralization_discrepancies(x, spec: ConstantNoiseSpec, gamma, beta,
                                 gamma_hat=None, beta_hat=None, eps: float = 1e-5) -> dict[str, float]:
    """Max absolute discrepancy of identities (a), (b) and (c) in float64."""
    x = np.asarray(x, dtype=np.float64)
    C = x.shape[1]
    gamma = np.broadcast_to(np.asarray(gamma, dtype=np.float64), (C,))
    beta = np.broadcast_to(np.asarray(beta, dtype=np.float64), (C,))
    gamma_hat = np.zeros(C) if gamma_hat is None else np.broadcast_to(gamma_hat, (C,)).astype(float)
    beta_hat = np.full(C, -1.0) if beta_hat is None else np.broadcast_to(beta_hat, (C,)).astype(float)
    a, b = spec.n_a, spec.n_b
    xt = Tensor(x, dtype=np.float64)
    g4, b4 = gamma.reshape(1, C, 1, 1), beta.reshape(1, C, 1, 1)

    with precision(np.float64):
        clean = BatchNorm2d(C, eps)
        attacked = BatchNorm2d(C, eps, noise=spec)
        gate_gamma = IEBN2d(C, eps, position="gamma_only", noise=spec)
        gate_beta = IEBN2d(C, eps, position="beta_only", noise=spec)
    _set(clean, gamma=gamma, beta=beta)
    _set(attacked, gamma=gamma / a, beta=beta - b * gamma / a)
    for layer in (gate_gamma, gate_beta):
        _set(layer, gamma=gamma, beta=beta, gamma_hat=gamma_hat, beta_hat=beta_hat)

    D = _standardized(x, eps)
    d = _gate(x, gamma_hat, beta_hat)[:, :, None, None]
    expected_b = D * (a * g4 * d) + (b * g4 * d + b4)
    expected_c = D * a * g4 + (b * g4 + b4 * d)
    return {
        "a": float(np.max(np.abs(attacked(xt).data - clean(xt).data))),
        "b": float(np.max(np.abs(gate_gamma(xt).data - expected_b))),
        "c": float(np.max(np.abs(gate_beta(xt).data - expected_c))),
    }


def neutralization_oracle(x, spec: ConstantNoiseSpec, gamma, beta,
                          gamma_hat=None, beta_hat=None, eps: float = 1e-5) -> float:
    """Largest discrepancy across the three noise identities."""
    return max(neutralization_discrepancies(x, spec, gamma, beta, gamma_hat, beta_hat, eps).values())
