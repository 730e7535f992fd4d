"""Small residual CNNs with a pluggable normalization slot.

The reference desk-scale network is a CIFAR ResNet-20: a 3x3 stem, three
stages of three basic blocks with widths 16/32/64, global average pooling
and a linear classifier.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .autograd import ops
from .autograd.module import Conv2d, Linear, Module, Parameter
from .autograd.tensor import Tensor
from .errors import ConfigError
from .norm import NormLayerConfig, make_norm
from .norm.layers import BatchNorm2d, BNPlusSE, IEBN2d, InstanceNorm2d, SEModule

BLOCK_KINDS = ("basic_residual", "preact_residual")


@dataclass
class BlockSpec:
    kind: str
    in_channels: int
    out_channels: int
    stride: int
    norm: NormLayerConfig
    se: bool = False

    @property
    def needs_projection(self) -> bool:
        return self.stride != 1 or self.in_channels != self.out_channels


@dataclass
class ModelSpec:
    widths: tuple[int, ...] = (16, 32, 64)
    blocks_per_stage: int | tuple[int, ...] = 3
    num_classes: int = 10
    norm: NormLayerConfig = field(default_factory=NormLayerConfig)
    block: str = "basic_residual"
    in_channels: int = 3
    head_init: str = "zeros"

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        if isinstance(self.blocks_per_stage, int):
            self.blocks_per_stage = (self.blocks_per_stage,) * len(self.widths)
        self.blocks_per_stage = tuple(int(n) for n in self.blocks_per_stage)
        if isinstance(self.norm, dict):
            self.norm = NormLayerConfig(**self.norm)

    def validate(self) -> None:
        if not self.widths:
            raise ConfigError("a model needs at least one stage")
        if any(w < 1 for w in self.widths):
            raise ConfigError(f"stage widths must be positive, got {self.widths}")
        if len(self.blocks_per_stage) != len(self.widths):
            raise ConfigError(f"{len(self.widths)} stage widths but blocks_per_stage="
                              f"{self.blocks_per_stage}")
        if any(n < 1 for n in self.blocks_per_stage):
            raise ConfigError(f"every stage needs at least one block, got {self.blocks_per_stage}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.block not in BLOCK_KINDS:
            raise ConfigError(f"block must be one of {BLOCK_KINDS}, got {self.block!r}")
        if self.head_init not in ("zeros", "uniform"):
            raise ConfigError(f"head_init must be 'zeros' or 'uniform', got {self.head_init!r}")

    def block_specs(self) -> list[BlockSpec]:
        # bn_plus_se: every site is BN, and an SE gate follows the last BN of each block
        se = self.norm.kind == "bn_plus_se"
        site_norm = self.norm.replace(kind="bn") if se else self.norm
        specs, channels = [], self.widths[0]
        for stage, (width, count) in enumerate(zip(self.widths, self.blocks_per_stage)):
            for i in range(count):
                stride = 2 if stage > 0 and i == 0 else 1
                specs.append(BlockSpec(self.block, channels, width, stride, site_norm, se))
                channels = width
        return specs


class BasicBlock(Module):
    """conv-norm-relu-conv-norm(-SE) plus shortcut, then relu."""

    def __init__(self, spec: BlockSpec, rng: np.random.Generator):
        super().__init__()
        self.conv1 = Conv2d(spec.in_channels, spec.out_channels, 3, spec.stride, 1, rng=rng)
        self.norm1 = make_norm(spec.norm, spec.out_channels, rng)
        self.conv2 = Conv2d(spec.out_channels, spec.out_channels, 3, 1, 1, rng=rng)
        self.norm2 = make_norm(spec.norm, spec.out_channels, rng)
        self.se = SEModule(spec.out_channels, spec.norm.reduction, rng) if spec.se else None
        self.proj_conv = self.proj_norm = None
        if spec.needs_projection:
            self.proj_conv = Conv2d(spec.in_channels, spec.out_channels, 1, spec.stride, 0, rng=rng)
            self.proj_norm = make_norm(spec.norm, spec.out_channels, rng)

    def forward(self, x: Tensor) -> Tensor:
        out = ops.relu(self.norm1(self.conv1(x)))
        out = self.norm2(self.conv2(out))
        if self.se is not None:
            out = self.se(out)
        shortcut = x if self.proj_conv is None else self.proj_norm(self.proj_conv(x))
        return ops.relu(ops.add(out, shortcut))


class PreActBlock(Module):
    """norm-relu-conv-norm-relu-conv(-SE) plus shortcut (no trailing relu)."""

    def __init__(self, spec: BlockSpec, rng: np.random.Generator):
        super().__init__()
        self.norm1 = make_norm(spec.norm, spec.in_channels, rng)
        self.conv1 = Conv2d(spec.in_channels, spec.out_channels, 3, spec.stride, 1, rng=rng)
        self.norm2 = make_norm(spec.norm, spec.out_channels, rng)
        self.conv2 = Conv2d(spec.out_channels, spec.out_channels, 3, 1, 1, rng=rng)
        self.se = SEModule(spec.out_channels, spec.norm.reduction, rng) if spec.se else None
        self.proj_conv = None
        if spec.needs_projection:
            self.proj_conv = Conv2d(spec.in_channels, spec.out_channels, 1, spec.stride, 0, rng=rng)

    def forward(self, x: Tensor) -> Tensor:
        pre = ops.relu(self.norm1(x))
        out = self.conv1(pre)
        out = self.conv2(ops.relu(self.norm2(out)))
        if self.se is not None:
            out = self.se(out)
        shortcut = x if self.proj_conv is None else self.proj_conv(pre)
        return ops.add(out, shortcut)


class ResNet(Module):
    def __init__(self, spec: ModelSpec, rng: np.random.Generator):
        super().__init__()
        self.spec = spec
        preact = spec.block == "preact_residual"
        width0 = spec.widths[0]
        self.stem = Conv2d(spec.in_channels, width0, 3, 1, 1, rng=rng)
        self.stem_norm = None if preact else make_norm(spec.block_specs()[0].norm, width0, rng)
        block_cls = PreActBlock if preact else BasicBlock
        self.blocks = [block_cls(b, rng) for b in spec.block_specs()]
        self.final_norm = make_norm(spec.block_specs()[0].norm, spec.widths[-1], rng) if preact else None
        self.head = Linear(spec.widths[-1], spec.num_classes, init=spec.head_init, rng=rng)

    def features(self, x: Tensor) -> Tensor:
        out = self.stem(x)
        if self.stem_norm is not None:
            out = ops.relu(self.stem_norm(out))
        for block in self.blocks:
            out = block(out)
        if self.final_norm is not None:
            out = ops.relu(self.final_norm(out))
        return ops.avgpool_channel(out)

    def forward(self, x: Tensor) -> Tensor:
        return self.head(self.features(x))


def build_model(spec: ModelSpec, seed: int = 0) -> ResNet:
    """Instantiate ``spec`` with all weights drawn from ``seed``."""
    spec.validate()
    return ResNet(spec, np.random.default_rng(seed))


NORM_TYPES = (BatchNorm2d, InstanceNorm2d, IEBN2d, BNPlusSE)


def norm_sites(model: Module) -> list[tuple[str, Module]]:
    """Every normalization layer of ``model``; a BN+SE wrapper counts as one site."""
    modules = list(model.named_modules())
    wrapped = {f"{name}.bn" for name, m in modules if isinstance(m, BNPlusSE)}
    return [(name, m) for name, m in modules
            if isinstance(m, NORM_TYPES) and name not in wrapped]


def _layer_group(module: Module) -> str | None:
    if isinstance(module, Conv2d):
        return "conv"
    if isinstance(module, Linear):
        return "linear"
    if isinstance(module, SEModule):
        return "se"
    if isinstance(module, NORM_TYPES):
        return "norm"
    return None


def count_params(model: Module) -> tuple[int, dict[str, int]]:
    """Total learnable parameters and a breakdown by layer type."""
    breakdown: Counter[str] = Counter()
    for _, module in model.named_modules():
        group = _layer_group(module)
        if group is not None:
            breakdown[group] += sum(v.size for v in vars(module).values()
                                    if isinstance(v, Parameter))
    return model.num_parameters(), dict(breakdown)


def norm_channel_total(model: Module) -> int:
    """Sum of channel counts over all normalization sites."""
    return sum(m.num_channels for _, m in norm_sites(model))
