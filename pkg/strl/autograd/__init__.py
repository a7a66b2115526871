"""Dense tensors with reverse-mode automatic differentiation."""

from strl.autograd.tensor import Tensor, get_default_dtype, is_grad_enabled, no_grad, precision

__all__ = ["Tensor", "get_default_dtype", "is_grad_enabled", "no_grad", "precision"]
