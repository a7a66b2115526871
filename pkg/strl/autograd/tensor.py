"""Reverse-mode automatic differentiation over numpy arrays."""

import contextlib
from typing import Any, Optional

import numpy as np

from strl.utils.errors import NonFiniteError, ShapeError

_DTYPE = [np.float32]
_GRAD_ENABLED = [True]


def get_default_dtype():
    """Return the float type new tensors are created with."""
    return _DTYPE[-1]


@contextlib.contextmanager
def precision(dtype):
    """
    Switch the default float type inside a block.

    float32 is used for training and inference; float64 is reserved for
    gradient checks.

    Args:
        dtype: np.float32 or np.float64
    """
    _DTYPE.append(np.dtype(dtype).type)
    try:
        yield
    finally:
        _DTYPE.pop()


def is_grad_enabled():
    return _GRAD_ENABLED[-1]


@contextlib.contextmanager
def no_grad():
    """
    Run a block without recording the graph.

    Results are constants with no creator, so the buffers an op keeps for its
    backward pass are released as soon as it returns.
    """
    _GRAD_ENABLED.append(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.pop()


class Function:
    """
    Base class for differentiable operations.

    Subclasses implement ``forward`` on raw arrays and ``backward`` mapping the
    output gradient to one gradient (or None) per input tensor.
    """

    def __init__(self, *tensors: "Tensor"):
        self.tensors = tensors

    def forward(self, *args: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError("Forward pass not implemented for this function")

    def backward(self, grad: np.ndarray):
        raise NotImplementedError("Backward pass not implemented for this function")

    @classmethod
    def apply(cls, *tensors: "Tensor", **kwargs: Any) -> "Tensor":
        """
        Run the forward pass and record the node for backpropagation.

        Raises:
            NonFiniteError: If the forward result contains NaN or Inf
        """
        func = cls(*tensors)
        out_data = func.forward(*(t.data for t in tensors), **kwargs)

        if not np.all(np.isfinite(out_data)):
            raise NonFiniteError(f"{cls.__name__} produced non-finite values")

        requires_grad = is_grad_enabled() and any(t.requires_grad for t in tensors)
        return Tensor(out_data, requires_grad=requires_grad,
                      creator=func if requires_grad else None, keep_dtype=True)


class Tensor:
    """
    Dense array node of the computation graph.

    Attributes:
        data: The values (float32 by default, float64 in gradient-check mode)
        grad: Accumulated gradient of the same shape, or None
        requires_grad: Whether backward should reach this tensor
        creator: The Function that produced it (None for leaves)
        name: Optional label used in error messages
    """

    def __init__(self, data, requires_grad=False, creator: Optional[Function] = None, name=None,
                 keep_dtype=False):
        if isinstance(data, Tensor):
            data = data.data
        if keep_dtype and isinstance(data, np.ndarray) and np.issubdtype(data.dtype, np.floating):
            self.data = data
        else:
            self.data = np.asarray(data, dtype=get_default_dtype())
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.creator = creator
        self.name = name

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """
        Backpropagate from this tensor to every reachable leaf.

        Leaf gradients accumulate across calls until ``zero_grad``.

        Args:
            grad: Seed gradient; only allowed to be omitted for scalars

        Raises:
            ShapeError: When called on a non-scalar without a seed
        """
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward needs a scalar loss, got shape {self.shape}")
            grad = np.ones_like(self.data)

        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node.creator is not None:
                for parent in node.creator.tensors:
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))

        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            node_grad = grads.pop(id(node), None)
            if node_grad is None:
                continue
            if node.creator is None:
                if node.requires_grad:
                    node.grad = node_grad.copy() if node.grad is None else node.grad + node_grad
                continue

            parent_grads = node.creator.backward(node_grad)
            if not isinstance(parent_grads, tuple):
                parent_grads = (parent_grads,)
            for parent, pgrad in zip(node.creator.tensors, parent_grads):
                if pgrad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pgrad if key not in grads else grads[key] + pgrad

    # Arithmetic sugar; see functional.py for the ops themselves

    def __add__(self, other):
        from strl.autograd import functional as F
        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from strl.autograd import functional as F
        return F.sub(self, other)

    def __rsub__(self, other):
        from strl.autograd import functional as F
        return F.add(F.neg(self), other)

    def __mul__(self, other):
        from strl.autograd import functional as F
        return F.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from strl.autograd import functional as F
        return F.div(self, other)

    def __neg__(self):
        from strl.autograd import functional as F
        return F.neg(self)

    def __getitem__(self, index):
        from strl.autograd import functional as F
        return F.index(self, index)

    def sum(self, axis=None):
        from strl.autograd import functional as F
        return F.sum(self, axis=axis)

    def mean(self, axis=None):
        from strl.autograd import functional as F
        return F.mean(self, axis=axis)

    def reshape(self, *shape):
        from strl.autograd import functional as F
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)


def as_tensor(value):
    """Wrap arrays and numbers as constant tensors; pass tensors through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)
