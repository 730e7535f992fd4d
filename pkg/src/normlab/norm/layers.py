"""BN, IN, SE, BN+SE and instance-enhanced BN (IEBN) layers.

All layers take [B, C, H, W] input. Statistics use the biased variance and
``sigma = sqrt(var + eps)``.
"""
from __future__ import annotations

import numpy as np

from ..attacks.noise import ConstantNoiseSpec, inject_constant_noise
from ..autograd import ops
from ..autograd.module import Module, Parameter
from ..autograd.tensor import Tensor, get_default_dtype
from ..errors import ConfigError, ShapeError, StatisticsError
from .config import NormLayerConfig


def _check_input(x: Tensor, num_channels: int, name: str) -> None:
    if x.ndim != 4:
        raise ShapeError(f"{name} expects [B, C, H, W] input, got {x.shape}")
    if x.shape[1] != num_channels:
        raise ShapeError(f"{name} built for {num_channels} channels, got input {x.shape}")


def _per_channel(t: Tensor) -> Tensor:
    return ops.reshape(t, (1, t.shape[0], 1, 1))


def _per_instance(t: Tensor) -> Tensor:
    return ops.reshape(t, (t.shape[0], t.shape[1], 1, 1))


def _fc_init(rng: np.random.Generator, out_features: int, in_features: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(in_features)
    return rng.uniform(-bound, bound, size=(out_features, in_features))


def se_hidden_units(num_channels: int, reduction: int) -> int:
    return max(1, num_channels // reduction)


class BatchNorm2d(Module):
    """Batch normalization with EMA running statistics.

    An optional constant-noise spec is injected right after the
    batch-normalized step, before ``gamma`` and ``beta`` are applied.
    """

    def __init__(self, num_channels: int, eps: float = 1e-5, momentum: float = 0.1,
                 noise: ConstantNoiseSpec | None = None, noise_at_eval: bool = False):
        super().__init__()
        if eps <= 0:
            raise ConfigError(f"eps must be positive, got {eps}")
        self.num_channels = num_channels
        self.eps = eps
        self.momentum = momentum
        self.noise = noise
        self.noise_at_eval = noise_at_eval
        dtype = get_default_dtype()
        self.gamma = Parameter(np.ones(num_channels))
        self.beta = Parameter(np.zeros(num_channels))
        self.register_buffer("running_mean", np.zeros(num_channels, dtype=dtype))
        self.register_buffer("running_var", np.ones(num_channels, dtype=dtype))
        # batch statistics of the most recent train-mode call, shape [C]
        self.last_mean: np.ndarray | None = None
        self.last_var: np.ndarray | None = None

    def normalized(self, x: Tensor) -> Tensor:
        """The batch-normalized step, with noise injected when configured."""
        _check_input(x, self.num_channels, type(self).__name__)
        if self.training:
            B, _, H, W = x.shape
            if B * H * W < 2:
                raise StatisticsError(f"batch statistics need B*H*W >= 2, got {B}*{H}*{W}")
            xhat, mu, var = ops.normalize(x, (0, 2, 3), self.eps)
            mu, var = mu.reshape(-1), var.reshape(-1)
            self.last_mean, self.last_var = mu, var
            m = self.momentum
            rm_dtype = self.running_mean.dtype
            self.running_mean = ((1.0 - m) * self.running_mean + m * mu).astype(rm_dtype)
            self.running_var = ((1.0 - m) * self.running_var + m * var).astype(rm_dtype)
        else:
            C = self.num_channels
            mean = self.running_mean.astype(x.dtype).reshape(1, C, 1, 1)
            inv_std = (1.0 / np.sqrt(self.running_var.astype(np.float64) + self.eps))
            inv_std = inv_std.astype(x.dtype).reshape(1, C, 1, 1)
            xhat = ops.mul(ops.sub(x, mean), inv_std)
        if self.noise is not None and (self.training or self.noise_at_eval):
            xhat = inject_constant_noise(xhat, self.noise)
        return xhat

    def reparameterize(self, xhat: Tensor, x: Tensor) -> Tensor:
        return ops.add(ops.mul(xhat, _per_channel(self.gamma)), _per_channel(self.beta))

    def forward(self, x: Tensor) -> Tensor:
        return self.reparameterize(self.normalized(x), x)


class InstanceNorm2d(Module):
    """Per-(instance, channel) normalization followed by a per-channel affine."""

    def __init__(self, num_channels: int, eps: float = 1e-5):
        super().__init__()
        self.num_channels = num_channels
        self.eps = eps
        self.gamma = Parameter(np.ones(num_channels))
        self.beta = Parameter(np.zeros(num_channels))
        self.last_mean: np.ndarray | None = None
        self.last_var: np.ndarray | None = None

    def forward(self, x: Tensor) -> Tensor:
        _check_input(x, self.num_channels, "InstanceNorm2d")
        H, W = x.shape[2:]
        if H * W < 2:
            raise StatisticsError(f"instance statistics need H*W >= 2, got {H}*{W}")
        xhat, mu, var = ops.normalize(x, (2, 3), self.eps)
        self.last_mean, self.last_var = mu[:, :, 0, 0], var[:, :, 0, 0]
        return ops.add(ops.mul(xhat, _per_channel(self.gamma)), _per_channel(self.beta))


class SEModule(Module):
    """Squeeze-and-excitation gate: ``x * sigmoid(fc2 @ relu(fc1 @ avg(x)))``."""

    def __init__(self, num_channels: int, reduction: int = 16,
                 rng: np.random.Generator | None = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        hidden = se_hidden_units(num_channels, reduction)
        self.num_channels = num_channels
        self.reduction = reduction
        self.fc1_weight = Parameter(_fc_init(rng, hidden, num_channels))
        self.fc2_weight = Parameter(_fc_init(rng, num_channels, hidden))
        self.last_delta: np.ndarray | None = None

    def coefficients(self, x: Tensor) -> Tensor:
        _check_input(x, self.num_channels, "SEModule")
        m = ops.avgpool_channel(x)
        z = ops.linear(ops.relu(ops.linear(m, self.fc1_weight)), self.fc2_weight)
        delta = ops.sigmoid(z)
        self.last_delta = delta.data
        return delta

    def forward(self, x: Tensor) -> Tensor:
        return ops.mul(x, _per_instance(self.coefficients(x)))


class BNPlusSE(Module):
    """BN whose output is recalibrated by an SE gate (gates both gamma and beta)."""

    def __init__(self, num_channels: int, eps: float = 1e-5, momentum: float = 0.1,
                 reduction: int = 16, noise: ConstantNoiseSpec | None = None,
                 noise_at_eval: bool = False, rng: np.random.Generator | None = None):
        super().__init__()
        self.num_channels = num_channels
        self.bn = BatchNorm2d(num_channels, eps, momentum, noise, noise_at_eval)
        self.se = SEModule(num_channels, reduction, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.se(self.bn(x))


class IEBN2d(BatchNorm2d):
    """Instance Enhancement Batch Normalization.

    For each instance ``b`` and channel ``c`` a gate
    ``delta[b, c] = act(op(avg(x[b, c])))`` is computed from the input before
    normalization, then multiplies gamma, beta, or both in the affine step.
    The gate is computed per instance in eval mode too.
    """

    def __init__(self, num_channels: int, eps: float = 1e-5, momentum: float = 0.1,
                 operator: str = "linear", position: str = "gamma_only",
                 activation: str = "sigmoid", gamma_hat_init: float = 0.0,
                 beta_hat_init: float = -1.0, reduction: int = 16,
                 noise: ConstantNoiseSpec | None = None, noise_at_eval: bool = False,
                 rng: np.random.Generator | None = None):
        super().__init__(num_channels, eps, momentum, noise, noise_at_eval)
        # validates the knobs
        NormLayerConfig(kind="iebn", operator=operator, position=position,
                        activation=activation, reduction=reduction)
        self.operator = operator
        self.position = position
        self.activation = activation
        self.gamma_hat: Parameter | None = None
        self.beta_hat: Parameter | None = None
        self.fc1_weight: Parameter | None = None
        self.fc2_weight: Parameter | None = None
        if operator == "linear":
            self.gamma_hat = Parameter(np.full(num_channels, float(gamma_hat_init)))
            self.beta_hat = Parameter(np.full(num_channels, float(beta_hat_init)))
        elif operator == "fc":
            rng = rng if rng is not None else np.random.default_rng(0)
            hidden = se_hidden_units(num_channels, reduction)
            self.fc1_weight = Parameter(_fc_init(rng, hidden, num_channels))
            self.fc2_weight = Parameter(_fc_init(rng, num_channels, hidden))
        self.last_delta: np.ndarray | None = None

    def gate(self, x: Tensor) -> Tensor:
        """The [B, C] recalibration coefficients for input ``x``."""
        m = ops.avgpool_channel(x)
        if self.operator == "linear":
            z = ops.add(ops.mul(m, self.gamma_hat), self.beta_hat)
        elif self.operator == "identity":
            z = m
        else:
            if self.fc1_weight is None or self.fc2_weight is None:
                raise ConfigError("fc operator used before its weights were initialized")
            z = ops.linear(ops.relu(ops.linear(m, self.fc1_weight)), self.fc2_weight)
        delta = ops.activation(z, self.activation)
        self.last_delta = delta.data
        return delta

    def reparameterize(self, xhat: Tensor, x: Tensor) -> Tensor:
        delta = _per_instance(self.gate(x))
        gamma, beta = _per_channel(self.gamma), _per_channel(self.beta)
        if self.position == "gamma_only":
            return ops.add(ops.mul(xhat, ops.mul(gamma, delta)), beta)
        if self.position == "beta_only":
            return ops.add(ops.mul(xhat, gamma), ops.mul(beta, delta))
        return ops.add(ops.mul(xhat, ops.mul(gamma, delta)), ops.mul(beta, delta))


def make_norm(config: NormLayerConfig, num_channels: int,
              rng: np.random.Generator | None = None) -> Module:
    """Build the normalization layer described by ``config``."""
    c = config
    if c.kind == "bn":
        return BatchNorm2d(num_channels, c.eps, c.momentum, c.noise, c.noise_at_eval)
    if c.kind == "in":
        return InstanceNorm2d(num_channels, c.eps)
    if c.kind == "bn_plus_se":
        return BNPlusSE(num_channels, c.eps, c.momentum, c.reduction, c.noise,
                        c.noise_at_eval, rng)
    return IEBN2d(num_channels, c.eps, c.momentum, c.operator, c.position, c.activation,
                  c.gamma_hat_init, c.beta_hat_init, c.reduction, c.noise,
                  c.noise_at_eval, rng)


def param_count(layer: Module) -> int:
    """Exact number of learnable scalars in ``layer``."""
    return layer.num_parameters()
