"""Normalization layers: BN, IN, SE, BN+SE and IEBN."""
from .config import ACTIVATIONS, NORM_KINDS, OPERATORS, POSITIONS, NormLayerConfig
from .identities import rescaling_form, rescaling_form_check
from .layers import (
    BatchNorm2d,
    BNPlusSE,
    IEBN2d,
    InstanceNorm2d,
    SEModule,
    make_norm,
    param_count,
    se_hidden_units,
)

__all__ = [
    "NormLayerConfig", "NORM_KINDS", "OPERATORS", "POSITIONS", "ACTIVATIONS",
    "BatchNorm2d", "InstanceNorm2d", "SEModule", "BNPlusSE", "IEBN2d", "make_norm",
    "param_count", "se_hidden_units", "rescaling_form", "rescaling_form_check",
]
