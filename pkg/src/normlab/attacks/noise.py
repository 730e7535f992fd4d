"""Constant-noise attack applied between normalization and the affine step."""
from __future__ import annotations

from dataclasses import dataclass

from ..autograd import ops
from ..autograd.tensor import Tensor
from ..errors import ConfigError

# standard (N_a, N_b) attack strengths used by the checks and experiments
REFERENCE_NOISE_PAIRS: tuple[tuple[float, float], ...] = ((0.8, 0.8), (0.8, 0.5), (0.5, 0.5), (0.5, 0.2))


@dataclass(frozen=True)
class ConstantNoiseSpec:
    """Scale ``n_a`` and shift ``n_b`` injected at every BN/IEBN site."""

    n_a: float
    n_b: float

    def __post_init__(self):
        if not isinstance(self.n_a, (int, float)) or not isinstance(self.n_b, (int, float)):
            raise ConfigError(f"noise constants must be numbers, got {self.n_a!r}, {self.n_b!r}")
        if self.n_a == 0:
            raise ConfigError("n_a = 0 erases the normalized signal; use a nonzero scale")

    @property
    def is_identity(self) -> bool:
        return self.n_a == 1 and self.n_b == 0


def inject_constant_noise(normalized: Tensor, spec: ConstantNoiseSpec) -> Tensor:
    """Return ``normalized * n_a + n_b``."""
    if spec.n_a == 0:
        raise ConfigError("n_a = 0 erases the normalized signal; use a nonzero scale")
    return ops.add(ops.mul(normalized, spec.n_a), spec.n_b)
