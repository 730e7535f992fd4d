"""Training-time noise attacks: constant noise and mixed datasets."""
from .mix import CONTAMINANTS, SENTINEL_LABEL, MixDatasetSpec, compose_mixed_batch
from .noise import REFERENCE_NOISE_PAIRS, ConstantNoiseSpec, inject_constant_noise


def parse_attack(text: str | None):
    """Parse ``constant:0.5,0.5`` or ``mix:mnist,k=2`` into an attack spec."""
    from ..errors import ConfigError

    if text is None or text in ("", "none"):
        return None
    kind, _, body = text.partition(":")
    if kind == "constant":
        try:
            n_a, n_b = (float(v) for v in body.split(","))
        except ValueError:
            raise ConfigError(f"constant attack needs 'constant:N_a,N_b', got {text!r}") from None
        return ConstantNoiseSpec(n_a, n_b)
    if kind == "mix":
        parts = [p.strip() for p in body.split(",") if p.strip()]
        if not parts:
            raise ConfigError(f"mix attack needs 'mix:<dataset>,k=<int>', got {text!r}")
        options = {"contaminant": parts[0]}
        for part in parts[1:]:
            key, _, value = part.partition("=")
            if key == "k":
                options["k"] = int(value)
            elif key == "joint":
                options["joint_labels"] = value.lower() in ("1", "true", "yes")
            elif key in ("primary_batch", "contaminant_unit"):
                options[key] = int(value)
            else:
                raise ConfigError(f"unknown mix option {key!r} in {text!r}")
        return MixDatasetSpec(**options)
    raise ConfigError(f"unknown attack kind {kind!r}; use 'constant:...' or 'mix:...'")


__all__ = [
    "ConstantNoiseSpec", "inject_constant_noise", "REFERENCE_NOISE_PAIRS", "MixDatasetSpec",
    "compose_mixed_batch", "SENTINEL_LABEL", "CONTAMINANTS", "parse_attack",
]
