"""Spatio-temporal auto-encoder.

One encoder reads the k input frames stacked along channels. Two decoders
share its bottleneck: the appearance decoder predicts the next RGB frame
(with skip connections from the encoder), the motion decoder predicts a
2-channel flow that is supervised by warping the last input frame.
"""

from dataclasses import dataclass
from typing import List

from strl.autograd import functional as F
from strl.autograd import nn
from strl.autograd.tensor import Tensor, as_tensor
from strl.utils.errors import ShapeError

DOWNSAMPLE = 8


@dataclass
class StaePrediction:
    """
    Outputs of one forward pass.

    Attributes:
        frame: Predicted next frame, Tensor[B, 3, H, W] in [-1, 1]
        flow: Predicted flow in pixels, Tensor[B, 2, H, W] (x then y)
        warped: Last input frame warped by ``flow``, Tensor[B, 3, H, W]
        features: Bottleneck scene embedding, Tensor[B, d, H/8, W/8]
    """

    frame: Tensor
    flow: Tensor
    warped: Tensor
    features: Tensor


def _decoder_widths(channels):
    c1, c2, _ = channels
    return c2, c1, c1


def init_stae(store, config, rng):
    """
    Register encoder and decoder parameters in a ParameterStore.

    Args:
        store: ParameterStore to fill
        config: Config providing clip_length and channels
        rng: numpy Generator for the weight draws
    """
    widths = (3 * config.clip_length,) + tuple(config.channels)
    for stage in range(3):
        cin, cout = widths[stage], widths[stage + 1]
        name = f"encoder.stage{stage + 1}"
        nn.init_conv(store, f"{name}.conv1.conv", cin, cout, 3, rng)
        store.add_bn(f"{name}.conv1.bn", cout)
        nn.init_conv(store, f"{name}.down.conv", cout, cout, 3, rng)
        store.add_bn(f"{name}.down.bn", cout)

    skips = tuple(reversed(config.channels))
    up = _decoder_widths(config.channels)

    cin = config.channels[-1]
    for stage in range(3):
        name = f"appearance.up{stage + 1}"
        nn.init_transpose_conv(store, f"{name}.deconv", cin, up[stage], 3, rng)
        store.add_bn(f"{name}.bn", up[stage])
        nn.init_conv(store, f"appearance.fuse{stage + 1}.conv", up[stage] + skips[stage], up[stage], 3, rng)
        store.add_bn(f"appearance.fuse{stage + 1}.bn", up[stage])
        cin = up[stage]
    nn.init_conv(store, "appearance.head", cin, 3, 3, rng)

    cin = config.channels[-1]
    for stage in range(3):
        name = f"motion.up{stage + 1}"
        nn.init_transpose_conv(store, f"{name}.deconv", cin, up[stage], 3, rng)
        store.add_bn(f"{name}.bn", up[stage])
        nn.init_conv(store, f"motion.refine{stage + 1}.conv", up[stage], up[stage], 3, rng)
        store.add_bn(f"motion.refine{stage + 1}.bn", up[stage])
        cin = up[stage]
    nn.init_conv(store, "motion.head", cin, 2, 3, rng)


def encode(store, inputs, training=False, track=True):
    """
    Shared encoder.

    Args:
        store: ParameterStore holding the encoder weights
        inputs: Tensor[B, 3k, H, W] with H and W divisible by 8
        training: Batch-norm mode
        track: Update batch-norm running statistics in training mode

    Returns:
        tuple: (features Tensor[B, d, H/8, W/8], skips) where skips are the
        three pre-downsampling activations, shallowest first
    """
    inputs = as_tensor(inputs)
    if inputs.ndim != 4 or inputs.shape[2] % DOWNSAMPLE or inputs.shape[3] % DOWNSAMPLE:
        raise ShapeError(f"encoder input must be (B, C, H, W) with H, W divisible by 8, got {inputs.shape}")

    x = inputs
    skips: List[Tensor] = []
    for stage in range(3):
        name = f"encoder.stage{stage + 1}"
        x = nn.conv_bn_relu(x, store, f"{name}.conv1", training, track=track)
        skips.append(x)
        x = nn.conv_bn_relu(x, store, f"{name}.down", training, stride=2, track=track)
    return x, skips


def decode_appearance(store, features, skips, training=False):
    """Next-frame prediction in [-1, 1] using the encoder skips."""
    x = features
    for stage, skip in enumerate(reversed(skips)):
        x = nn.up_bn_relu(x, store, f"appearance.up{stage + 1}", training)
        if skip.shape[2:] != x.shape[2:]:
            raise ShapeError(f"skip {skip.shape} does not match decoder stage {stage + 1} output {x.shape}")
        x = F.concat_channels(x, skip)
        x = nn.conv_bn_relu(x, store, f"appearance.fuse{stage + 1}", training)
    return F.tanh(nn.conv(x, store, "appearance.head"))


def decode_motion(store, features, training=False):
    """Flow prediction; the head is linear so flows are unbounded."""
    x = features
    for stage in range(3):
        x = nn.up_bn_relu(x, store, f"motion.up{stage + 1}", training)
        x = nn.conv_bn_relu(x, store, f"motion.refine{stage + 1}", training)
    return nn.conv(x, store, "motion.head")


def warp_last_frame(inputs, flow):
    """Warp the last frame of a channel-stacked clip batch with ``flow``."""
    inputs = as_tensor(inputs)
    last = F.index(inputs, (slice(None), slice(inputs.shape[1] - 3, inputs.shape[1])))
    return F.warp(last, flow)


def forward(store, inputs, training=False):
    """
    Full auto-encoder pass.

    Args:
        store: ParameterStore with encoder and both decoders
        inputs: Tensor or array [B, 3k, H, W] in [-1, 1]
        training: Batch-norm mode

    Returns:
        StaePrediction
    """
    inputs = as_tensor(inputs)
    features, skips = encode(store, inputs, training)
    frame = decode_appearance(store, features, skips, training)
    flow = decode_motion(store, features, training)
    return StaePrediction(frame, flow, warp_last_frame(inputs, flow), features)


def count_parameters(store, prefix=""):
    """Number of learnable scalars (all of them, or those under ``prefix``)."""
    return store.count(prefix)
