"""Named parameter storage and the conv/BN/ReLU building blocks."""

from collections import OrderedDict

import numpy as np

from strl.autograd import functional as F
from strl.autograd.functional import BatchNormStats
from strl.autograd.tensor import Tensor, get_default_dtype
from strl.utils.errors import ShapeError


class ParameterStore:
    """
    Named table of learnable tensors plus batch-norm running statistics.

    Names are dotted paths such as ``encoder.stage1.conv.weight``; the
    table is what checkpoints persist and what the optimizer walks.
    """

    def __init__(self):
        self.params = OrderedDict()
        self.bn_stats = OrderedDict()

    def __contains__(self, name):
        return name in self.params

    def __getitem__(self, name):
        return self.params[name]

    def add(self, name, values):
        """Register a learnable tensor under ``name``."""
        if name in self.params:
            raise ShapeError(f"parameter {name!r} registered twice")
        tensor = Tensor(np.asarray(values, dtype=get_default_dtype()), requires_grad=True, name=name)
        self.params[name] = tensor
        return tensor

    def add_bn(self, name, channels):
        """Register scale/shift parameters and running statistics of a BN layer."""
        self.add(f"{name}.scale", np.ones(channels))
        self.add(f"{name}.shift", np.zeros(channels))
        self.bn_stats[name] = BatchNormStats(channels, dtype=get_default_dtype())

    def zero_grad(self):
        for tensor in self.params.values():
            tensor.zero_grad()

    def count(self, prefix=""):
        """Number of learnable scalars, optionally under a name prefix."""
        return int(sum(t.size for name, t in self.params.items() if name.startswith(prefix)))

    def names(self):
        return list(self.params)


def _uniform(rng, fan_in, shape):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_conv(store, name, cin, cout, kernel, rng, bias=True):
    """Fan-in scaled uniform weights, zero bias."""
    store.add(f"{name}.weight", _uniform(rng, cin * kernel * kernel, (cout, cin, kernel, kernel)))
    if bias:
        store.add(f"{name}.bias", np.zeros(cout))


def init_transpose_conv(store, name, cin, cout, kernel, rng):
    store.add(f"{name}.weight", _uniform(rng, cout * kernel * kernel, (cin, cout, kernel, kernel)))
    store.add(f"{name}.bias", np.zeros(cout))


def conv(x, store, name, stride=1, padding=None):
    weight = store[f"{name}.weight"]
    if padding is None:
        padding = weight.shape[2] // 2
    return F.conv2d(x, weight, store[f"{name}.bias"], stride=stride, padding=padding)


def bn(x, store, name, training, track=True):
    return F.batch_norm(x, store[f"{name}.scale"], store[f"{name}.shift"], store.bn_stats[name],
                        training=training, track=track)


def conv_bn_relu(x, store, name, training, stride=1, track=True):
    """3x3 conv (padding 1) followed by batch norm and ReLU."""
    y = conv(x, store, f"{name}.conv", stride=stride)
    return F.relu(bn(y, store, f"{name}.bn", training, track))


def up_bn_relu(x, store, name, training, track=True):
    """Stride-2 transpose conv doubling the extent, then batch norm and ReLU."""
    y = F.transpose_conv2d(x, store[f"{name}.deconv.weight"], store[f"{name}.deconv.bias"],
                           stride=2, padding=1, output_padding=1)
    return F.relu(bn(y, store, f"{name}.bn", training, track))
