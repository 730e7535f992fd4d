"""Textbook loop implementations of the normalization layers.

Everything here works on plain Python floats (64-bit) and nested lists; it
deliberately imports nothing from the engine so that agreement between the
two is meaningful. Inputs are small: at most 4x8x8x8.
"""
from __future__ import annotations

import math

import numpy as np


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _act(values: list[float], kind: str) -> list[float]:
    if kind == "sigmoid":
        return [_sigmoid(v) for v in values]
    if kind == "tanh":
        return [math.tanh(v) for v in values]
    if kind == "relu":
        return [v if v > 0 else 0.0 for v in values]
    if kind == "softmax":
        top = max(values)
        e = [math.exp(v - top) for v in values]
        s = sum(e)
        return [v / s for v in e]
    raise ValueError(f"unknown activation {kind!r}")


def _dims(x):
    return len(x), len(x[0]), len(x[0][0]), len(x[0][0][0])


def _channel_stats(x, c):
    B, _, H, W = _dims(x)
    n = B * H * W
    total = 0.0
    for b in range(B):
        for i in range(H):
            for j in range(W):
                total += x[b][c][i][j]
    mu = total / n
    sq = 0.0
    for b in range(B):
        for i in range(H):
            for j in range(W):
                sq += (x[b][c][i][j] - mu) ** 2
    return mu, sq / n


def _instance_avg(x, b, c):
    H, W = len(x[b][c]), len(x[b][c][0])
    total = 0.0
    for i in range(H):
        for j in range(W):
            total += x[b][c][i][j]
    return total / (H * W)


def _matvec(weight, v):
    return [sum(weight[r][k] * v[k] for k in range(len(v))) for r in range(len(weight))]


def _fc_gate_input(m, fc1, fc2):
    hidden = [h if h > 0 else 0.0 for h in _matvec(fc1, m)]
    return _matvec(fc2, hidden)


def _bn_core(x, eps, mean=None, var=None, noise=(1.0, 0.0)):
    """Normalize with batch (or given running) statistics; return xhat nested list."""
    B, C, H, W = _dims(x)
    a, nb = noise
    out = [[[[0.0] * W for _ in range(H)] for _ in range(C)] for _ in range(B)]
    for c in range(C):
        if mean is None:
            mu, v = _channel_stats(x, c)
        else:
            mu, v = float(mean[c]), float(var[c])
        sigma = math.sqrt(v + eps)
        for b in range(B):
            for i in range(H):
                for j in range(W):
                    out[b][c][i][j] = ((x[b][c][i][j] - mu) / sigma) * a + nb
    return out


def oracle_bn(x, gamma, beta, eps=1e-5, running_mean=None, running_var=None, noise=(1.0, 0.0)):
    """``gamma * (x - mu) / sqrt(var + eps) + beta`` per channel.

    Batch statistics unless ``running_mean``/``running_var`` are given.
    """
    x = np.asarray(x, dtype=np.float64).tolist()
    gamma, beta = list(map(float, gamma)), list(map(float, beta))
    xhat = _bn_core(x, eps, running_mean, running_var, noise)
    B, C, H, W = _dims(x)
    for b in range(B):
        for c in range(C):
            for i in range(H):
                for j in range(W):
                    xhat[b][c][i][j] = xhat[b][c][i][j] * gamma[c] + beta[c]
    return np.array(xhat)


def oracle_in(x, gamma, beta, eps=1e-5):
    """Per-(instance, channel) normalization with a per-channel affine."""
    x = np.asarray(x, dtype=np.float64).tolist()
    B, C, H, W = _dims(x)
    out = [[[[0.0] * W for _ in range(H)] for _ in range(C)] for _ in range(B)]
    for b in range(B):
        for c in range(C):
            mu = _instance_avg(x, b, c)
            v = 0.0
            for i in range(H):
                for j in range(W):
                    v += (x[b][c][i][j] - mu) ** 2
            sigma = math.sqrt(v / (H * W) + eps)
            for i in range(H):
                for j in range(W):
                    out[b][c][i][j] = gamma[c] * (x[b][c][i][j] - mu) / sigma + beta[c]
    return np.array(out)


def oracle_se_gate(x, fc1, fc2):
    """``sigmoid(fc2 @ relu(fc1 @ avg(x_b)))`` for every instance, shape [B, C]."""
    x = np.asarray(x, dtype=np.float64).tolist()
    fc1, fc2 = np.asarray(fc1, dtype=np.float64).tolist(), np.asarray(fc2, dtype=np.float64).tolist()
    B, C = len(x), len(x[0])
    gates = []
    for b in range(B):
        m = [_instance_avg(x, b, c) for c in range(C)]
        gates.append(_act(_fc_gate_input(m, fc1, fc2), "sigmoid"))
    return np.array(gates)


def oracle_se(x, fc1, fc2):
    """Squeeze-and-excitation: every channel of ``x`` times its gate."""
    g = oracle_se_gate(x, fc1, fc2)
    x = np.asarray(x, dtype=np.float64).tolist()
    B, C, H, W = _dims(x)
    out = [[[[x[b][c][i][j] * g[b][c] for j in range(W)] for i in range(H)]
            for c in range(C)] for b in range(B)]
    return np.array(out)


def oracle_iebn_gate(x, gamma_hat=None, beta_hat=None, operator="linear",
                     activation="sigmoid", fc1=None, fc2=None):
    """``act(op(avg(x_bc)))`` for every instance and channel, shape [B, C]."""
    x = np.asarray(x, dtype=np.float64).tolist()
    B, C = len(x), len(x[0])
    gates = []
    for b in range(B):
        m = [_instance_avg(x, b, c) for c in range(C)]
        if operator == "linear":
            z = [float(gamma_hat[c]) * m[c] + float(beta_hat[c]) for c in range(C)]
        elif operator == "identity":
            z = m
        elif operator == "fc":
            z = _fc_gate_input(m, np.asarray(fc1, dtype=np.float64).tolist(),
                               np.asarray(fc2, dtype=np.float64).tolist())
        else:
            raise ValueError(f"unknown operator {operator!r}")
        gates.append(_act(z, activation))
    return np.array(gates)


def oracle_iebn(x, gamma, beta, gamma_hat=None, beta_hat=None, eps=1e-5, operator="linear",
                position="gamma_only", activation="sigmoid", fc1=None, fc2=None,
                running_mean=None, running_var=None, noise=(1.0, 0.0)):
    """Instance-enhanced BN: the BN affine with ``delta`` on gamma, beta or both.

    Default ``gamma_hat``/``beta_hat`` are the initial values 0 and -1.
    """
    xa = np.asarray(x, dtype=np.float64)
    C = xa.shape[1]
    if gamma_hat is None:
        gamma_hat = [0.0] * C
    if beta_hat is None:
        beta_hat = [-1.0] * C
    d = oracle_iebn_gate(xa, gamma_hat, beta_hat, operator, activation, fc1, fc2).tolist()
    xl = xa.tolist()
    gamma, beta = list(map(float, gamma)), list(map(float, beta))
    xhat = _bn_core(xl, eps, running_mean, running_var, noise)
    B, _, H, W = _dims(xl)
    for b in range(B):
        for c in range(C):
            g = gamma[c] * d[b][c] if position in ("gamma_only", "both") else gamma[c]
            s = beta[c] * d[b][c] if position in ("beta_only", "both") else beta[c]
            for i in range(H):
                for j in range(W):
                    xhat[b][c][i][j] = xhat[b][c][i][j] * g + s
    return np.array(xhat)


def oracle_conv2d(x, weight, stride=1, padding=0):
    """Direct six-loop cross-correlation without bias."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(weight, dtype=np.float64)
    B, C, H, W = x.shape
    K, _, kh, kw = w.shape
    Ho = (H + 2 * padding - kh) // stride + 1
    Wo = (W + 2 * padding - kw) // stride + 1
    xl, wl = x.tolist(), w.tolist()
    out = np.zeros((B, K, Ho, Wo))
    for b in range(B):
        for k in range(K):
            for oi in range(Ho):
                for oj in range(Wo):
                    acc = 0.0
                    for c in range(C):
                        for i in range(kh):
                            for j in range(kw):
                                r = oi * stride + i - padding
                                s = oj * stride + j - padding
                                if 0 <= r < H and 0 <= s < W:
                                    acc += xl[b][c][r][s] * wl[k][c][i][j]
                    out[b, k, oi, oj] = acc
    return out
