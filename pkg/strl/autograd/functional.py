"""Differentiable operations used by the auto-encoder and the relation module.

Binary elementwise ops take equal shapes or a scalar; there is no general
broadcasting. Convolutions follow the (B, C, H, W) layout with weights
(Cout, Cin, kh, kw) for conv2d and (Cin, Cout, kh, kw) for transpose_conv2d.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from strl.autograd.tensor import Function, Tensor, as_tensor
from strl.config import BN_EPS, BN_MOMENTUM
from strl.utils.errors import ShapeError, ValidationError


def _is_scalar(value):
    return not isinstance(value, Tensor) and np.ndim(value) == 0


def _check_same_shape(op, a, b):
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _reduce_to(grad, shape):
    """Sum a gradient back down to a size-1 operand."""
    if grad.shape == shape:
        return grad
    return np.sum(grad).reshape(shape)


# ---------------------------------------------------------------------------
# Elementwise
# ---------------------------------------------------------------------------

class Add(Function):
    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return _reduce_to(grad, self.shapes[0]), _reduce_to(grad, self.shapes[1])


class Mul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return _reduce_to(grad * self.b, self.a.shape), _reduce_to(grad * self.a, self.b.shape)


class Div(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a / b

    def backward(self, grad):
        ga = grad / self.b
        gb = -grad * self.a / (self.b * self.b)
        return _reduce_to(ga, self.a.shape), _reduce_to(gb, self.b.shape)


class Scale(Function):
    def forward(self, x, factor=1.0, offset=0.0):
        self.factor = factor
        return np.asarray(x * factor + offset, dtype=x.dtype)

    def backward(self, grad):
        return grad * self.factor


class Abs(Function):
    def forward(self, x):
        self.sign = np.sign(x)
        return np.abs(x)

    def backward(self, grad):
        return grad * self.sign


class ReLU(Function):
    def forward(self, x):
        self.mask = x > 0
        return np.where(self.mask, x, 0).astype(x.dtype)

    def backward(self, grad):
        return grad * self.mask


class Sigmoid(Function):
    def forward(self, x):
        # Split by sign so exp never overflows
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        self.out = out
        return out

    def backward(self, grad):
        return grad * self.out * (1.0 - self.out)


class Tanh(Function):
    def forward(self, x):
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad):
        return grad * (1.0 - self.out * self.out)


class Log(Function):
    def forward(self, x):
        if np.any(x <= 0):
            raise ValidationError("log of a non-positive value")
        self.x = x
        return np.log(x)

    def backward(self, grad):
        return grad / self.x


def add(a, b):
    if _is_scalar(b):
        return Scale.apply(a, factor=1.0, offset=b)
    if _is_scalar(a):
        return Scale.apply(b, factor=1.0, offset=a)
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape("add", a, b)
    return Add.apply(a, b)


def neg(x):
    return Scale.apply(x, factor=-1.0)


def sub(a, b):
    if _is_scalar(b):
        return Scale.apply(a, factor=1.0, offset=-b)
    return add(a, neg(as_tensor(b)))


def mul(a, b):
    if _is_scalar(b):
        return Scale.apply(a, factor=b)
    if _is_scalar(a):
        return Scale.apply(b, factor=a)
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape("mul", a, b)
    return Mul.apply(a, b)


def div(a, b):
    if _is_scalar(b):
        return Scale.apply(a, factor=1.0 / b)
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape("div", a, b)
    return Div.apply(a, b)


def abs(x):  # noqa: A001 - mirrors the op name
    return Abs.apply(x)


def relu(x):
    return ReLU.apply(x)


def sigmoid(x):
    return Sigmoid.apply(x)


def tanh(x):
    return Tanh.apply(x)


def log(x):
    return Log.apply(x)


def square(x):
    return Mul.apply(x, x)


_POINTWISE = {
    'relu': relu,
    'sigmoid': sigmoid,
    'abs': abs,
    'tanh': tanh,
    'add': add,
    'sub': sub,
    'mul': mul,
}


def pointwise(x, kind, other=None):
    """
    Dispatch an elementwise op by name.

    Args:
        x: Input tensor
        kind: One of relu, sigmoid, tanh, abs, add, sub, mul
        other: Second operand for the binary kinds

    Returns:
        Tensor: Elementwise result
    """
    if kind not in _POINTWISE:
        raise ValidationError(f"unknown pointwise kind {kind!r}")
    if kind in ('add', 'sub', 'mul'):
        if other is None:
            raise ValidationError(f"pointwise {kind} needs a second operand")
        return _POINTWISE[kind](x, other)
    return _POINTWISE[kind](x)


# ---------------------------------------------------------------------------
# Reductions and reshaping
# ---------------------------------------------------------------------------

class Sum(Function):
    def forward(self, x, axis=None):
        self.shape = x.shape
        self.axis = axis
        return np.asarray(np.sum(x, axis=axis))

    def backward(self, grad):
        if self.axis is not None:
            grad = np.expand_dims(grad, self.axis)
        return np.broadcast_to(grad, self.shape).copy()


class Reshape(Function):
    def forward(self, x, shape=None):
        self.shape = x.shape
        return x.reshape(shape)

    def backward(self, grad):
        return grad.reshape(self.shape)


class Index(Function):
    def forward(self, x, index=None):
        self.shape = x.shape
        self.index = index
        return np.array(x[index])

    def backward(self, grad):
        out = np.zeros(self.shape, dtype=grad.dtype)
        index = self.index if isinstance(self.index, tuple) else (self.index,)
        if any(isinstance(i, (np.ndarray, list)) for i in index):
            # Gathers may repeat rows
            np.add.at(out, self.index, grad)
        else:
            out[self.index] += grad
        return out


class Concat(Function):
    def forward(self, *arrays, axis=1):
        self.axis = axis
        self.splits = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=self.axis))


class RepeatBatch(Function):
    def forward(self, x, batch=1):
        return np.repeat(x, batch, axis=0)

    def backward(self, grad):
        return grad.sum(axis=0, keepdims=True)


def sum(x, axis=None):  # noqa: A001
    if isinstance(axis, list):
        axis = tuple(axis)
    return Sum.apply(x, axis=axis)


def mean(x, axis=None):
    if axis is None:
        count = x.size
    else:
        axes = axis if isinstance(axis, (tuple, list)) else (axis,)
        count = int(np.prod([x.shape[a] for a in axes]))
    return Scale.apply(sum(x, axis=axis), factor=1.0 / count)


def reshape(x, shape):
    return Reshape.apply(x, shape=tuple(shape))


def index(x, idx):
    return Index.apply(x, index=idx)


def concat(tensors, axis=0):
    """Concatenate tensors that agree on every other dimension."""
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(t.shape[d] != ref[d] for d in range(len(ref)) if d != axis):
            raise ShapeError(f"concat along axis {axis}: incompatible shapes {ref} and {t.shape}")
    return Concat.apply(*tensors, axis=axis)


def concat_channels(a, b):
    """
    Stack two feature maps along the channel axis.

    Args:
        a: Tensor[B, Ca, H, W]
        b: Tensor[B, Cb, H, W]

    Returns:
        Tensor[B, Ca+Cb, H, W] with ``a`` in the leading channels
    """
    if a.ndim != 4 or b.ndim != 4:
        raise ShapeError(f"concat_channels expects 4-D tensors, got {a.shape} and {b.shape}")
    if (a.shape[0], a.shape[2], a.shape[3]) != (b.shape[0], b.shape[2], b.shape[3]):
        raise ShapeError(f"concat_channels: batch/spatial mismatch {a.shape} vs {b.shape}")
    return Concat.apply(a, b, axis=1)


def repeat_batch(x, batch):
    """Tile a (1, ...) tensor ``batch`` times along axis 0."""
    if x.shape[0] != 1:
        raise ShapeError(f"repeat_batch expects a leading extent of 1, got {x.shape}")
    return RepeatBatch.apply(x, batch=batch)


# ---------------------------------------------------------------------------
# Convolutions
# ---------------------------------------------------------------------------

def conv_output_size(size, kernel, stride, padding):
    return (size + 2 * padding - kernel) // stride + 1


def transpose_conv_output_size(size, kernel, stride, padding, output_padding=0):
    return (size - 1) * stride - 2 * padding + kernel + output_padding


class Conv2d(Function):
    def forward(self, x, weight, bias, stride=1, padding=0):
        self.stride, self.padding = stride, padding
        self.x_shape = x.shape
        self.weight = weight
        cout, cin, kh, kw = weight.shape

        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
        self.xp_shape = xp.shape
        # (B, Cin, Ho, Wo, kh, kw) view, gathered once into a contiguous (B*Ho*Wo, Cin*kh*kw) matrix
        windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        b, _, ho, wo = windows.shape[:4]
        self.cols = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(b * ho * wo, cin * kh * kw)
        out = self.cols @ weight.reshape(cout, -1).T
        out = out.reshape(b, ho, wo, cout).transpose(0, 3, 1, 2)
        return np.ascontiguousarray(out + bias.reshape(1, -1, 1, 1))

    def backward(self, grad):
        s, p = self.stride, self.padding
        cout, cin, kh, kw = self.weight.shape
        b, _, ho, wo = grad.shape

        rows = grad.transpose(0, 2, 3, 1).reshape(b * ho * wo, cout)
        grad_w = (rows.T @ self.cols).reshape(self.weight.shape)
        grad_b = grad.sum(axis=(0, 2, 3))

        # (B, Ho, Wo, Cin, kh, kw)
        dcols = (rows @ self.weight.reshape(cout, -1)).reshape(b, ho, wo, cin, kh, kw)
        dxp = np.zeros(self.xp_shape, dtype=grad.dtype)
        for i in range(kh):
            for j in range(kw):
                dxp[:, :, i:i + s * ho:s, j:j + s * wo:s] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)

        h, w = self.x_shape[2:]
        grad_x = dxp[:, :, p:p + h, p:p + w] if p else dxp
        return np.ascontiguousarray(grad_x), grad_w, grad_b


class ConvTranspose2d(Function):
    def forward(self, x, weight, bias, stride=1, padding=0, output_padding=0):
        self.stride, self.padding = stride, padding
        self.x = x
        self.weight = weight
        b, _, h, w = x.shape
        cout, kh, kw = weight.shape[1:]

        full_h = (h - 1) * stride + kh + output_padding
        full_w = (w - 1) * stride + kw + output_padding
        self.full_shape = (b, cout, full_h, full_w)
        self.out_hw = (transpose_conv_output_size(h, kh, stride, padding, output_padding),
                       transpose_conv_output_size(w, kw, stride, padding, output_padding))

        # (B, H, W, Cout, kh, kw)
        cols = np.tensordot(x, weight, axes=([1], [0]))
        full = np.zeros(self.full_shape, dtype=x.dtype)
        for i in range(kh):
            for j in range(kw):
                full[:, :, i:i + stride * h:stride, j:j + stride * w:stride] += cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)

        ho, wo = self.out_hw
        out = full[:, :, padding:padding + ho, padding:padding + wo]
        return np.ascontiguousarray(out + bias.reshape(1, -1, 1, 1))

    def backward(self, grad):
        s, p = self.stride, self.padding
        _, _, h, w = self.x.shape
        kh, kw = self.weight.shape[2:]
        ho, wo = self.out_hw

        full = np.zeros(self.full_shape, dtype=grad.dtype)
        full[:, :, p:p + ho, p:p + wo] = grad
        # (B, Cout, H, W, kh, kw)
        windows = sliding_window_view(full, (kh, kw), axis=(2, 3))[:, :, ::s, ::s][:, :, :h, :w]

        grad_x = np.tensordot(windows, self.weight, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        grad_w = np.tensordot(self.x, windows, axes=([0, 2, 3], [0, 2, 3]))
        grad_b = grad.sum(axis=(0, 2, 3))
        return np.ascontiguousarray(grad_x), grad_w, grad_b


def _check_conv_args(op, x, weight, cin_axis, stride, padding):
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"{op}: expected 4-D input and weight, got {x.shape} and {weight.shape}")
    if x.shape[1] != weight.shape[cin_axis]:
        raise ShapeError(
            f"{op}: input has {x.shape[1]} channels but weight {weight.shape} expects {weight.shape[cin_axis]}"
        )
    if stride < 1 or padding < 0:
        raise ShapeError(f"{op}: stride must be positive and padding non-negative (got {stride}, {padding})")


def _zero_bias(channels, like):
    return Tensor(np.zeros(channels, dtype=like.data.dtype))


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """
    2-D cross-correlation.

    Args:
        x: Tensor[B, Cin, H, W]
        weight: Tensor[Cout, Cin, kh, kw]
        bias: Tensor[Cout] or None
        stride: Positive step
        padding: Zero padding on every side

    Returns:
        Tensor[B, Cout, H', W'] with H' = (H + 2p - kh) // stride + 1
    """
    _check_conv_args("conv2d", x, weight, 1, stride, padding)
    kh, kw = weight.shape[2:]
    if x.shape[2] + 2 * padding < kh or x.shape[3] + 2 * padding < kw:
        raise ShapeError(f"conv2d: kernel {kh}x{kw} larger than padded input {x.shape}")
    if bias is None:
        bias = _zero_bias(weight.shape[0], x)
    return Conv2d.apply(x, weight, bias, stride=stride, padding=padding)


def transpose_conv2d(x, weight, bias=None, stride=1, padding=0, output_padding=0):
    """
    Transposed convolution, the adjoint of conv2d with the same weight.

    Args:
        x: Tensor[B, Cin, H, W]
        weight: Tensor[Cin, Cout, kh, kw]
        bias: Tensor[Cout] or None
        stride: Up-sampling factor
        padding: Rows/columns cropped from every side of the full output
        output_padding: Extra rows/columns kept at the bottom/right

    Returns:
        Tensor[B, Cout, (H-1)*stride - 2*padding + kh + output_padding, ...]
    """
    _check_conv_args("transpose_conv2d", x, weight, 0, stride, padding)
    if output_padding < 0 or output_padding >= stride:
        raise ShapeError(f"transpose_conv2d: invalid output_padding {output_padding}")
    if bias is None:
        bias = _zero_bias(weight.shape[1], x)
    return ConvTranspose2d.apply(x, weight, bias, stride=stride, padding=padding,
                                 output_padding=output_padding)


# ---------------------------------------------------------------------------
# Normalisation and pooling
# ---------------------------------------------------------------------------

class BatchNormStats:
    """Running mean/variance of one batch-norm layer."""

    def __init__(self, channels, dtype=np.float32):
        self.mean = np.zeros(channels, dtype=dtype)
        self.var = np.ones(channels, dtype=dtype)


class BatchNorm2d(Function):
    def forward(self, x, scale, shift, stats=None, training=True, track=True,
                momentum=BN_MOMENTUM, eps=BN_EPS):
        self.training = training
        self.scale = scale
        c_shape = (1, -1, 1, 1)

        if training:
            n = x.shape[0] * x.shape[2] * x.shape[3]
            mu = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            if track and stats is not None:
                unbiased = var * n / (n - 1)
                stats.mean[...] = (1 - momentum) * stats.mean + momentum * mu
                stats.var[...] = (1 - momentum) * stats.var + momentum * unbiased
            self.n = n
        else:
            mu, var = stats.mean.astype(x.dtype), stats.var.astype(x.dtype)

        self.inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
        self.xhat = (x - mu.reshape(c_shape)) * self.inv_std.reshape(c_shape)
        return self.xhat * scale.reshape(c_shape) + shift.reshape(c_shape)

    def backward(self, grad):
        c_shape = (1, -1, 1, 1)
        grad_scale = (grad * self.xhat).sum(axis=(0, 2, 3))
        grad_shift = grad.sum(axis=(0, 2, 3))
        dxhat = grad * self.scale.reshape(c_shape)

        if not self.training:
            return dxhat * self.inv_std.reshape(c_shape), grad_scale, grad_shift

        sum_d = dxhat.sum(axis=(0, 2, 3)).reshape(c_shape)
        sum_dx = (dxhat * self.xhat).sum(axis=(0, 2, 3)).reshape(c_shape)
        grad_x = self.inv_std.reshape(c_shape) / self.n * (self.n * dxhat - sum_d - self.xhat * sum_dx)
        return grad_x, grad_scale, grad_shift


def batch_norm(x, scale, shift, stats, training=True, track=True):
    """
    Per-channel batch normalisation.

    Args:
        x: Tensor[B, C, H, W]
        scale: Tensor[C] (gamma)
        shift: Tensor[C] (beta)
        stats: BatchNormStats updated in training mode, read in inference mode
        training: Use batch statistics when True, running statistics otherwise
        track: Update the running statistics (training mode only)

    Returns:
        Tensor of the same shape as ``x``
    """
    if x.ndim != 4 or scale.shape != (x.shape[1],) or shift.shape != (x.shape[1],):
        raise ShapeError(f"batch_norm: input {x.shape} with scale {scale.shape}, shift {shift.shape}")
    if training and x.shape[0] * x.shape[2] * x.shape[3] < 2:
        raise ShapeError(f"batch_norm: training needs at least 2 values per channel, got {x.shape}")
    if not training and stats is None:
        raise ValidationError("batch_norm: inference mode needs running statistics")
    return BatchNorm2d.apply(x, scale, shift, stats=stats, training=training, track=track)


class MaskedAveragePool(Function):
    def forward(self, x, mask=None, literal=False):
        b, c, h, w = x.shape
        if mask is None:
            self.weights = np.full((b, 1, h, w), 1.0 / (h * w), dtype=x.dtype)
        else:
            m = mask.astype(x.dtype)
            denom = np.full((b, 1, 1, 1), h * w, dtype=x.dtype) if literal else m.sum(axis=(2, 3), keepdims=True)
            self.weights = m / denom
        return (x * self.weights).sum(axis=(2, 3))

    def backward(self, grad):
        return grad[:, :, None, None] * self.weights


def global_average_pool(x, mask=None, literal=False):
    """
    Spatial mean per channel, optionally restricted to a binary mask.

    Args:
        x: Tensor[B, C, H, W]
        mask: Optional array [B, 1, H, W] of {0, 1}, at least one 1 per item
        literal: Divide masked sums by H*W instead of the mask count

    Returns:
        Tensor[B, C]
    """
    if x.ndim != 4:
        raise ShapeError(f"global_average_pool expects a 4-D tensor, got {x.shape}")
    if mask is not None:
        mask = mask.data if isinstance(mask, Tensor) else np.asarray(mask)
        b, _, h, w = x.shape
        if mask.shape != (b, 1, h, w):
            raise ShapeError(f"global_average_pool: mask {mask.shape} does not match input {x.shape}")
        if np.any(mask.reshape(b, -1).sum(axis=1) == 0):
            raise ValidationError("global_average_pool: empty mask")
    return MaskedAveragePool.apply(x, mask=mask, literal=literal)


class ExpandDot(Function):
    def forward(self, gamma, e):
        self.gamma, self.e = gamma, e
        return np.einsum('bchw,bc->bhw', gamma, e)

    def backward(self, grad):
        grad_gamma = grad[:, None, :, :] * self.e[:, :, None, None]
        grad_e = np.einsum('bhw,bchw->bc', grad, self.gamma)
        return grad_gamma, grad_e


def expand_dot(gamma, e):
    """
    Inner product of a vector with every spatial location of a map.

    Args:
        gamma: Tensor[B, d, h, w]
        e: Tensor[B, d]

    Returns:
        Tensor[B, h, w]
    """
    if gamma.ndim != 4 or e.shape != gamma.shape[:2]:
        raise ShapeError(f"expand_dot: map {gamma.shape} and vector {e.shape} disagree")
    return ExpandDot.apply(gamma, e)


# ---------------------------------------------------------------------------
# Warping
# ---------------------------------------------------------------------------

class BilinearWarp(Function):
    def forward(self, image, flow):
        b, c, h, w = image.shape
        self.image_shape = image.shape
        self.image = image

        ys, xs = np.meshgrid(np.arange(h, dtype=image.dtype), np.arange(w, dtype=image.dtype), indexing='ij')
        sx = xs[None] - flow[:, 0]
        sy = ys[None] - flow[:, 1]
        # Source coordinates clamp to the border
        self.in_x = (sx >= 0) & (sx <= w - 1)
        self.in_y = (sy >= 0) & (sy <= h - 1)
        sx = np.clip(sx, 0, w - 1)
        sy = np.clip(sy, 0, h - 1)

        x0 = np.clip(np.floor(sx).astype(np.int64), 0, max(w - 2, 0))
        y0 = np.clip(np.floor(sy).astype(np.int64), 0, max(h - 2, 0))
        x1 = np.minimum(x0 + 1, w - 1)
        y1 = np.minimum(y0 + 1, h - 1)
        wx = (sx - x0).astype(image.dtype)
        wy = (sy - y0).astype(image.dtype)
        self.idx = (x0, x1, y0, y1)
        self.wts = (wx, wy)

        bi = np.arange(b)[:, None, None, None]
        ci = np.arange(c)[None, :, None, None]
        self.corners = [image[bi, ci, yy[:, None], xx[:, None]] for yy, xx in ((y0, x0), (y0, x1), (y1, x0), (y1, x1))]
        v00, v01, v10, v11 = self.corners
        wx4, wy4 = wx[:, None], wy[:, None]
        return (v00 * (1 - wx4) * (1 - wy4) + v01 * wx4 * (1 - wy4)
                + v10 * (1 - wx4) * wy4 + v11 * wx4 * wy4)

    def backward(self, grad):
        b, c, h, w = self.image_shape
        x0, x1, y0, y1 = self.idx
        wx, wy = self.wts
        wx4, wy4 = wx[:, None], wy[:, None]
        v00, v01, v10, v11 = self.corners

        grad_image = np.zeros(self.image_shape, dtype=grad.dtype)
        bi = np.broadcast_to(np.arange(b)[:, None, None, None], grad.shape)
        ci = np.broadcast_to(np.arange(c)[None, :, None, None], grad.shape)
        for yy, xx, weight in ((y0, x0, (1 - wx4) * (1 - wy4)), (y0, x1, wx4 * (1 - wy4)),
                               (y1, x0, (1 - wx4) * wy4), (y1, x1, wx4 * wy4)):
            yb = np.broadcast_to(yy[:, None], grad.shape)
            xb = np.broadcast_to(xx[:, None], grad.shape)
            np.add.at(grad_image, (bi, ci, yb, xb), grad * weight)

        # d(out)/d(sx), d(out)/d(sy); source = x - flow so the flow gradient flips sign
        dsx = ((v01 - v00) * (1 - wy4) + (v11 - v10) * wy4) * grad
        dsy = ((v10 - v00) * (1 - wx4) + (v11 - v01) * wx4) * grad
        grad_flow = np.stack([-dsx.sum(axis=1) * self.in_x, -dsy.sum(axis=1) * self.in_y], axis=1)
        return grad_image, grad_flow.astype(grad.dtype)


def warp(image, flow):
    """
    Backward-warp an image with a dense flow field.

    Output pixel x samples ``image`` at ``x - flow(x)`` with bilinear
    interpolation; source coordinates are clamped to the image border.

    Args:
        image: Tensor[B, C, H, W]
        flow: Tensor[B, 2, H, W] in pixels (channel 0 horizontal, 1 vertical)

    Returns:
        Tensor[B, C, H, W]
    """
    if image.ndim != 4 or flow.ndim != 4 or flow.shape[1] != 2:
        raise ShapeError(f"warp: image {image.shape} with flow {flow.shape}")
    if image.shape[0] != flow.shape[0] or image.shape[2:] != flow.shape[2:]:
        raise ShapeError(f"warp: image {image.shape} and flow {flow.shape} disagree")
    return BilinearWarp.apply(image, flow)
