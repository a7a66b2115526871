"""Central finite-difference oracle for analytic gradients."""

import numpy as np


def numerical_gradient(fn, tensor, h=1e-4, indices=None):
    """
    Estimate d fn() / d tensor by central differences.

    Args:
        fn: Zero-argument callable returning a scalar Tensor
        tensor: Leaf tensor whose data is perturbed in place
        h: Step size
        indices: Optional iterable of flat indices to perturb (all when None)

    Returns:
        np.ndarray: Gradient estimate, zero at untouched entries
    """
    flat = tensor.data.reshape(-1)
    grad = np.zeros(flat.shape, dtype=np.float64)
    picked = range(flat.size) if indices is None else indices
    for i in picked:
        original = flat[i]
        flat[i] = original + h
        plus = float(fn().data)
        flat[i] = original - h
        minus = float(fn().data)
        flat[i] = original
        grad[i] = (plus - minus) / (2 * h)
    return grad.reshape(tensor.shape)


def relative_error(analytic, numeric, atol=1e-8):
    """Norm-wise relative error with an absolute floor for near-zero gradients."""
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    diff = np.linalg.norm(analytic - numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale < atol:
        return 0.0 if diff < atol else float('inf')
    return float(max(diff - atol, 0.0) / scale)


def check_gradients(fn, tensors, h=1e-4, max_entries=None, rng=None):
    """
    Compare analytic and numeric gradients for several leaves.

    Args:
        fn: Zero-argument callable returning a scalar Tensor
        tensors: Mapping of name to leaf Tensor (float64 data)
        h: Finite-difference step
        max_entries: Perturb at most this many entries per tensor
        rng: numpy Generator choosing the checked entries

    Returns:
        dict: Name to relative error over the checked entries
    """
    for tensor in tensors.values():
        tensor.zero_grad()
    fn().backward()

    errors = {}
    for name, tensor in tensors.items():
        if max_entries is not None and tensor.size > max_entries:
            rng = rng if rng is not None else np.random.default_rng(0)
            picked = np.sort(rng.choice(tensor.size, size=max_entries, replace=False))
        else:
            picked = np.arange(tensor.size)
        analytic = np.zeros(tensor.size) if tensor.grad is None else tensor.grad.reshape(-1)
        numeric = numerical_gradient(fn, tensor, h=h, indices=picked).reshape(-1)
        errors[name] = relative_error(analytic[picked], numeric[picked])
    return errors
