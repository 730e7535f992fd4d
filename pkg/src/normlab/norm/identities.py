"""Rescaling-form check: every normalizer written as ``scale * X + shift``.

BN:     (gamma / sigma_c) X + beta - (mu_c / sigma_c) gamma
IN:     the same with per-(b, c) statistics
BN+SE:  (gamma d / sigma_c) X + beta d - (mu_c / sigma_c) gamma d, d = SE gate
IEBN:   (gamma d / sigma_c) X + beta - (mu_c / sigma_c) gamma d, d = IEBN gate
"""
from __future__ import annotations

import numpy as np

from ..autograd.module import Module
from ..autograd.tensor import Tensor, precision
from .config import NormLayerConfig
from .layers import BatchNorm2d, BNPlusSE, IEBN2d, InstanceNorm2d, make_norm


def _expanded(x, mu, sigma, gamma, beta, noise):
    """``gamma * (a (x - mu)/sigma + b) + beta`` expanded into scale * x + shift."""
    a, b = (noise.n_a, noise.n_b) if noise is not None else (1.0, 0.0)
    scale = gamma * a / sigma
    shift = beta + gamma * b - gamma * a * mu / sigma
    return scale * x + shift


def rescaling_form(x: np.ndarray, layer: Module) -> np.ndarray:
    """Evaluate the expanded form using statistics/gates recorded by the last forward."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(layer, InstanceNorm2d):
        mu = layer.last_mean[:, :, None, None]
        sigma = np.sqrt(layer.last_var[:, :, None, None] + layer.eps)
        gamma = layer.gamma.data.reshape(1, -1, 1, 1)
        beta = layer.beta.data.reshape(1, -1, 1, 1)
        return _expanded(x, mu, sigma, gamma, beta, None)
    bn = layer.bn if isinstance(layer, BNPlusSE) else layer
    mu = bn.last_mean.reshape(1, -1, 1, 1)
    sigma = np.sqrt(bn.last_var.reshape(1, -1, 1, 1) + bn.eps)
    gamma = bn.gamma.data.reshape(1, -1, 1, 1)
    beta = bn.beta.data.reshape(1, -1, 1, 1)
    noise = bn.noise
    if isinstance(layer, BNPlusSE):
        d = layer.se.last_delta[:, :, None, None]
        return _expanded(x, mu, sigma, gamma * d, beta * d, noise)
    if isinstance(layer, IEBN2d):
        d = layer.last_delta[:, :, None, None]
        if layer.position == "gamma_only":
            return _expanded(x, mu, sigma, gamma * d, beta, noise)
        if layer.position == "beta_only":
            return _expanded(x, mu, sigma, gamma, beta * d, noise)
        return _expanded(x, mu, sigma, gamma * d, beta * d, noise)
    if isinstance(layer, BatchNorm2d):
        return _expanded(x, mu, sigma, gamma, beta, noise)
    raise TypeError(f"no rescaling form for {type(layer).__name__}")


def rescaling_form_check(x, layer) -> float:
    """Max |normalized form - expanded form| for one train-mode forward.

    ``layer`` is a layer instance or a kind name (``bn``, ``in``, ``iebn``,
    ``bn_plus_se``) built with default settings.
    """
    x = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    if isinstance(layer, str):
        with precision(np.float64):
            layer = make_norm(NormLayerConfig(kind=layer), x.shape[1])
    layer.train()
    out = layer(Tensor(x, dtype=np.float64)).data
    return float(np.max(np.abs(out - rescaling_form(x, layer))))
