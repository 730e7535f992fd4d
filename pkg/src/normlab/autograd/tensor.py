"""Dense tensors with a global reverse-mode gradient tape.

Every operation whose inputs require gradients appends its output to the
tape. Because outputs are appended when they are created, the tape is
already in topological order and ``backward`` only has to walk it in
reverse once.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterator, Sequence

import numpy as np

from ..errors import ShapeError, UsageError

_DEFAULT_DTYPE = np.dtype(np.float32)


def get_default_dtype() -> np.dtype:
    return _DEFAULT_DTYPE


def set_default_dtype(dtype) -> None:
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported precision {dtype}; use float32 or float64")
    _DEFAULT_DTYPE = dtype


@contextlib.contextmanager
def precision(dtype) -> Iterator[None]:
    """Temporarily switch the dtype used for newly created tensors."""
    previous = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


class GradientTape:
    """Ordered record of differentiable operations.

    A node is the output tensor of an op; it keeps references to its
    parents and a closure mapping the output gradient to parent gradients.
    """

    def __init__(self) -> None:
        self.nodes: list[Tensor] = []
        self.enabled = True

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, node: Tensor) -> int:
        self.nodes.append(node)
        return len(self.nodes) - 1

    def reset(self) -> None:
        for node in self.nodes:
            node.tape_id = None
            node._parents = ()
            node._backward = None
        self.nodes = []


TAPE = GradientTape()


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable tape recording inside the block."""
    previous = TAPE.enabled
    TAPE.enabled = False
    try:
        yield
    finally:
        TAPE.enabled = previous


def is_grad_enabled() -> bool:
    return TAPE.enabled


BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    """A dense float array that can take part in the gradient tape."""

    __array_priority__ = 100  # numpy defers to our reflected operators

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        dtype = np.dtype(dtype) if dtype is not None else None
        if dtype is None:
            arr = np.asarray(data)
            dtype = arr.dtype if arr.dtype in (np.float32, np.float64) else _DEFAULT_DTYPE
        self.data = np.asarray(data, dtype=dtype, order="C")
        if self.data.ndim > 4:
            raise ShapeError(f"tensors have at most 4 dimensions, got shape {self.data.shape}")
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.tape_id: int | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None

    # -- basic properties ------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> Tensor:
        return Tensor(self.data, dtype=self.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({np.array2string(self.data, precision=4, threshold=8)}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # -- autodiff ----------------------------------------------------------
    def backward(self) -> None:
        backward(self)

    # -- operator sugar (implementations live in ops) ----------------------
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(other, self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __pow__(self, exponent: float):
        from . import ops
        return ops.power(self, exponent)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False):
        from . import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from . import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)


def as_tensor(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    if dtype is None:
        dtype = _DEFAULT_DTYPE
    return Tensor(np.asarray(value, dtype=dtype))


def make_result(data: np.ndarray, parents: Sequence[Tensor], backward_fn: BackwardFn) -> Tensor:
    """Wrap an op output and record it on the tape when any parent needs grads."""
    out = Tensor(data, dtype=data.dtype)
    if TAPE.enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
        out.tape_id = TAPE.record(out)
    return out


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` of every leaf that the scalar ``loss`` depends on.

    The tape is consumed: all recorded nodes are released afterwards.
    """
    if loss.data.size != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.tape_id is None:
        if loss.requires_grad:
            # a leaf: d loss / d loss
            loss.grad = np.ones_like(loss.data) if loss.grad is None else loss.grad + 1
            return
        raise UsageError("loss is not connected to the gradient tape")
    nodes = TAPE.nodes
    pending: dict[int, np.ndarray] = {loss.tape_id: np.ones_like(loss.data)}
    try:
        for idx in range(loss.tape_id, -1, -1):
            grad = pending.pop(idx, None)
            if grad is None:
                continue
            node = nodes[idx]
            parent_grads = node._backward(grad)
            for parent, pgrad in zip(node._parents, parent_grads):
                if pgrad is None or not parent.requires_grad:
                    continue
                pgrad = unbroadcast(np.asarray(pgrad, dtype=parent.dtype), parent.shape)
                if parent.tape_id is not None:
                    prev = pending.get(parent.tape_id)
                    pending[parent.tape_id] = pgrad if prev is None else prev + pgrad
                else:
                    parent.grad = pgrad.copy() if parent.grad is None else parent.grad + pgrad
    finally:
        TAPE.reset()
