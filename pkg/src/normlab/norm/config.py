from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..attacks.noise import ConstantNoiseSpec
from ..errors import ConfigError

NORM_KINDS = ("bn", "in", "iebn", "bn_plus_se")
OPERATORS = ("linear", "identity", "fc")
POSITIONS = ("gamma_only", "beta_only", "both")
ACTIVATIONS = ("sigmoid", "tanh", "relu", "softmax")


@dataclass
class NormLayerConfig:
    """Which normalizer to build and every ablation knob.

    Knobs that do not apply to ``kind`` are ignored but still type-checked.
    """

    kind: str = "bn"
    eps: float = 1e-5
    momentum: float = 0.1
    operator: str = "linear"
    position: str = "gamma_only"
    activation: str = "sigmoid"
    gamma_hat_init: float = 0.0
    beta_hat_init: float = -1.0
    reduction: int = 16
    noise: ConstantNoiseSpec | None = None
    noise_at_eval: bool = False

    def __post_init__(self):
        _choice("kind", self.kind, NORM_KINDS)
        _choice("operator", self.operator, OPERATORS)
        _choice("position", self.position, POSITIONS)
        _choice("activation", self.activation, ACTIVATIONS)
        for name in ("eps", "momentum", "gamma_hat_init", "beta_hat_init"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name} must be a number, got {value!r}")
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if not 0.0 <= self.momentum <= 1.0:
            raise ConfigError(f"momentum must lie in [0, 1], got {self.momentum}")
        if isinstance(self.reduction, bool) or not isinstance(self.reduction, int) or self.reduction < 1:
            raise ConfigError(f"reduction must be a positive integer, got {self.reduction!r}")
        if not isinstance(self.noise_at_eval, bool):
            raise ConfigError(f"noise_at_eval must be a bool, got {self.noise_at_eval!r}")
        if isinstance(self.noise, dict):
            self.noise = ConstantNoiseSpec(**self.noise)
        if self.noise is not None and not isinstance(self.noise, ConstantNoiseSpec):
            raise ConfigError(f"noise must be a ConstantNoiseSpec, got {self.noise!r}")

    def replace(self, **changes) -> "NormLayerConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return NormLayerConfig(**values)

    def to_dict(self) -> dict:
        return asdict(self)


def _choice(name: str, value, allowed: tuple[str, ...]) -> None:
    if value not in allowed:
        raise ConfigError(f"{name} must be one of {allowed}, got {value!r}")
