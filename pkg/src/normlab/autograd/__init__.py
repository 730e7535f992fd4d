"""Minimal dense-tensor engine with reverse-mode automatic differentiation."""
from . import ops
from .io import load_state, load_tensor, save_state, save_tensor, state_hash
from .module import Conv2d, Linear, Module, Parameter
from .ops import (
    activation,
    add,
    avgpool_channel,
    conv2d,
    cross_entropy,
    div,
    linear,
    mul,
    normalize,
    relu,
    sigmoid,
    softmax,
    sub,
    tanh,
)
from .optim import SGD, sgd_step
from .tensor import (
    TAPE,
    GradientTape,
    Tensor,
    backward,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
    precision,
    set_default_dtype,
)

__all__ = [
    "ops", "Tensor", "GradientTape", "TAPE", "backward", "no_grad", "is_grad_enabled",
    "precision", "get_default_dtype", "set_default_dtype", "Module", "Parameter",
    "Conv2d", "Linear", "SGD", "sgd_step", "add", "sub", "mul", "div", "conv2d",
    "avgpool_channel", "activation", "sigmoid", "tanh", "relu", "softmax", "linear",
    "cross_entropy", "normalize", "save_tensor", "load_tensor", "save_state",
    "load_state", "state_hash",
]
