from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from ..errors import ConfigError
from .tensor import Tensor


class SGD:
    """SGD with heavy-ball momentum and L2 weight decay.

    Update per parameter ``w`` with gradient ``g``::

        v <- momentum * v + (g + weight_decay * w)
        w <- w - lr * v
    """

    def __init__(self, params: Iterable[Tensor], lr: float, momentum: float = 0.0,
                 weight_decay: float = 0.0):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        if not 0.0 <= momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {momentum}")
        if weight_decay < 0:
            raise ConfigError(f"weight decay must be non-negative, got {weight_decay}")
        self.params: list[Tensor] = list(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity: list[np.ndarray | None] = [None] * len(self.params)

    def step(self) -> None:
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            v = self.velocity[i]
            v = g.copy() if v is None else self.momentum * v + g
            self.velocity[i] = v
            p.data = p.data - np.asarray(self.lr * v, dtype=p.dtype)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def sgd_step(params: Sequence[Tensor], lr: float, momentum: float = 0.0,
             weight_decay: float = 0.0, velocity: list | None = None) -> list:
    """Functional single update; returns the (possibly new) velocity list."""
    opt = SGD(params, lr=lr, momentum=momentum, weight_decay=weight_decay)
    if velocity is not None:
        opt.velocity = list(velocity)
    opt.step()
    return opt.velocity
