"""Adaptive-moment optimizer over a ParameterStore."""

from dataclasses import dataclass, field

import numpy as np

from strl.config import ADAM_BETAS, ADAM_EPS, LEARNING_RATE
from strl.utils.errors import NonFiniteError, ShapeError


@dataclass
class AdamState:
    """First/second moment accumulators and the step counter."""

    learning_rate: float = LEARNING_RATE
    beta1: float = ADAM_BETAS[0]
    beta2: float = ADAM_BETAS[1]
    eps: float = ADAM_EPS
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, state):
    """
    Apply one bias-corrected Adam update in place.

    Parameters without a gradient are treated as having a zero gradient.

    Args:
        params: Mapping of name to Tensor (e.g. ``ParameterStore.params``)
        state: AdamState, updated in place

    Returns:
        AdamState: The same state object

    Raises:
        NonFiniteError: If a gradient holds NaN/Inf (names the parameter)
        ShapeError: If stored moments disagree with a parameter's shape
    """
    for name, tensor in params.items():
        if tensor.grad is not None and not np.all(np.isfinite(tensor.grad)):
            raise NonFiniteError(f"non-finite gradient for parameter {name!r}")
        if name in state.m and state.m[name].shape != tensor.shape:
            raise ShapeError(f"optimizer moments for {name!r} have shape {state.m[name].shape}, "
                             f"parameter has {tensor.shape}")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step

    for name, tensor in params.items():
        grad = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        m = state.m.setdefault(name, np.zeros_like(tensor.data))
        v = state.v.setdefault(name, np.zeros_like(tensor.data))

        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * grad * grad

        m_hat = m / correction1
        v_hat = v / correction2
        tensor.data -= (state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)).astype(tensor.data.dtype)

    return state
