"""Object-scene relation learning.

The bottleneck map of a clip is the scene embedding; pooling it under a
moving-region mask gives an object embedding. A learnable per-location
relation map is mixed with the scene map by two 1x1 conv layers, and the
sigmoid of its inner product with an object embedding scores how plausible
that object behaviour is at every location.
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from strl.autograd import functional as F
from strl.autograd import nn
from strl.autograd.tensor import Tensor, as_tensor
from strl.config import RL_LOSS_FORMS
from strl.models.stae import DOWNSAMPLE
from strl.utils.errors import ShapeError, ValidationError

RELATION_MAP = "relation.map"


@dataclass
class RelationScoreMap:
    """Plausibility ``psi`` (B, h, w) in (0, 1) and the mixed map ``gamma`` (B, d, h, w)."""

    psi: Tensor
    gamma: Tensor


@dataclass
class RelationBatch:
    """
    Positive and negative object embeddings of every (clip, mask) pair.

    Pairs of one clip are contiguous; ``groups`` holds their [start, stop)
    ranges. ``masks`` are the feature-resolution masks (P, h, w).
    """

    gamma: Tensor
    masks: np.ndarray
    positive: Tensor
    speed: Tensor
    order: Tensor
    groups: List[Tuple[int, int]]


def feature_size(resolution):
    return resolution // DOWNSAMPLE


def init_relation(store, config, rng):
    """
    Register the relation map and the two mixer layers.

    The map has one d-vector per bottleneck location and is drawn like a
    conv weight with fan-in d.
    """
    d = config.embed_dim
    side = feature_size(config.resolution)
    bound = np.sqrt(6.0 / d)
    store.add(RELATION_MAP, rng.uniform(-bound, bound, size=(1, d, side, side)))
    nn.init_conv(store, "relation.mix1.conv", 2 * d, d, 1, rng)
    store.add_bn("relation.mix1.bn", d)
    nn.init_conv(store, "relation.mix2.conv", d, d, 1, rng)
    store.add_bn("relation.mix2.bn", d)


def downsample_mask(mask, factor=DOWNSAMPLE):
    """
    Max-pool a binary pixel mask to feature resolution.

    Args:
        mask: (H, W) array of {0, 1}
        factor: Pooling factor

    Returns:
        np.ndarray: uint8 (H/factor, W/factor)
    """
    mask = np.asarray(mask)
    h, w = mask.shape
    if h % factor or w % factor:
        raise ShapeError(f"mask {mask.shape} is not divisible by {factor}")
    cells = mask.reshape(h // factor, factor, w // factor, factor)
    return (cells.max(axis=(1, 3)) > 0).astype(np.uint8)


def object_embedding(features, masks, literal=False):
    """
    Pool scene features under region masks.

    Args:
        features: Tensor[B, d, h, w]
        masks: Feature-resolution masks (B, h, w); each must be nonempty
        literal: Divide by h*w instead of the mask area

    Returns:
        Tensor[B, d]
    """
    masks = np.asarray(masks)
    return F.global_average_pool(features, masks[:, None].astype(features.data.dtype), literal=literal)


def relation_gamma(store, features, training=False, track=True):
    """Mix the scene map with the relation map: two 1x1 conv -> ReLU -> BN layers."""
    features = as_tensor(features)
    relation = store[RELATION_MAP]
    if relation.shape[1:] != features.shape[1:]:
        raise ShapeError(f"relation map {relation.shape[1:]} does not match scene features {features.shape[1:]}")

    x = F.concat_channels(features, F.repeat_batch(relation, features.shape[0]))
    for layer in ("relation.mix1", "relation.mix2"):
        x = nn.conv(x, store, f"{layer}.conv", padding=0)
        x = nn.bn(F.relu(x), store, f"{layer}.bn", training, track)
    return x


def plausibility(gamma, embedding):
    """Sigmoid of the per-location inner product, Tensor[B, h, w]."""
    return F.sigmoid(F.expand_dot(gamma, embedding))


def relation_score(store, features, embedding, training=False):
    """
    Score an object embedding against the scene at every location.

    Args:
        store: ParameterStore with the relation parameters
        features: Scene embedding Tensor[B, d, h, w]
        embedding: Object embedding Tensor[B, d]
        training: Batch-norm mode of the mixer

    Returns:
        RelationScoreMap
    """
    gamma = relation_gamma(store, features, training)
    return RelationScoreMap(plausibility(gamma, as_tensor(embedding)), gamma)


def loss_rl(batch: RelationBatch, form='literal'):
    """
    Contrastive relation loss, averaged over the clips in ``batch``.

    Per clip with masks M (n of them) on an h x w grid and location ratio
    r = psi(pos) / (psi(pos) + psi(speed) + psi(order)):

    - literal:      -1/(h w n) * log( sum_M sum_ij M_ij r_ij )
    - per_location: -1/(h w n) * sum_M sum_ij M_ij log r_ij

    Args:
        batch: RelationBatch
        form: 'literal' or 'per_location'

    Returns:
        Tensor: Scalar loss
    """
    if form not in RL_LOSS_FORMS:
        raise ValidationError(f"unknown relation loss form {form!r}")
    if not batch.groups:
        raise ValidationError("relation loss needs at least one clip with masks")

    pos = plausibility(batch.gamma, batch.positive)
    speed = plausibility(batch.gamma, batch.speed)
    order = plausibility(batch.gamma, batch.order)
    ratio = F.div(pos, F.add(F.add(pos, speed), order))

    masks = Tensor(batch.masks.astype(ratio.data.dtype))
    h, w = batch.masks.shape[1:]
    if form == 'per_location':
        per_pair = F.sum(F.mul(F.log(ratio), masks), axis=(1, 2))
    else:
        per_pair = F.sum(F.mul(ratio, masks), axis=(1, 2))

    total = None
    for start, stop in batch.groups:
        n = stop - start
        clip_sum = F.sum(per_pair[start:stop])
        if form == 'literal':
            clip_sum = F.log(clip_sum)
        clip_loss = F.mul(clip_sum, -1.0 / (h * w * n))
        total = clip_loss if total is None else F.add(total, clip_loss)
    return F.mul(total, 1.0 / len(batch.groups))


def loss_total(l_ae, l_rl, lambda_rl):
    """Auto-encoder loss plus the weighted relation loss (None when no clip had masks)."""
    if l_rl is None:
        return l_ae
    return F.add(l_ae, F.mul(l_rl, lambda_rl))
