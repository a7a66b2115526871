"""Joint training of the auto-encoder and the relation module."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from strl.autograd import functional as F
from strl.autograd.optim import adam_step
from strl.collectors.clips import clip_at, stack_inputs
from strl.generators.csv_generator import write_loss_log
from strl.models.checkpoint import checkpoint_save
from strl.models.losses import loss_ae
from strl.models.negatives import can_sample_speed, gen_negative_order, gen_negative_speed
from strl.models.relation import RelationBatch, loss_rl, loss_total, object_embedding, relation_gamma
from strl.models.stae import encode
from strl.models.state import build_model
from strl.processors.regions import feature_masks
from strl.utils.errors import NonFiniteError, ValidationError
from strl.utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass
class EpochLog:
    """Mean losses of one epoch; ``l_rl`` averages only batches with a relation term."""

    epoch: int
    l_ae: float
    l_rl: float
    l_total: float
    relation_batches: int


@dataclass
class StepResult:
    l_ae: float
    l_rl: object
    l_total: float


def training_positions(dataset, k):
    """Every (video_id, t) that ends a k-frame clip with a target frame."""
    return [(video.video_id, t) for video in dataset for t in range(k - 1, len(video) - 1)]


def _cache_path(cache_dir, video_id, t, resolution):
    return Path(cache_dir) / video_id / f"masks_{resolution}_{t:06d}.npy"


def clip_masks(clip, cache_dir=None, resolution=None):
    """Feature-resolution region masks of a clip, optionally cached on disk."""
    if cache_dir is not None:
        path = _cache_path(cache_dir, clip.video_id, clip.end, resolution)
        if path.exists():
            return np.load(path)

    _, masks = feature_masks(clip.frames)
    if cache_dir is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.save(path, masks)
    return masks


def build_relation_batch(state, clips, videos, masks, features, rng):
    """
    Encode negatives and gather the embeddings of every (clip, mask) pair.

    Clips without masks, or too close to the end of their video for a speed
    negative, are left out.

    Args:
        state: ModelState
        clips: Positive VideoClips of the batch
        videos: Mapping video_id -> Video
        masks: Per clip, feature-resolution masks (n, h, w)
        features: Scene embeddings of the positives, Tensor[B, d, h, w]
        rng: numpy Generator for the negatives

    Returns:
        RelationBatch or None when no clip qualifies
    """
    config = state.config
    k = config.clip_length
    eligible = [i for i, clip in enumerate(clips)
                if len(masks[i]) and can_sample_speed(videos[clip.video_id], clip.start, k)]
    if not eligible:
        return None

    speed_clips = [gen_negative_speed(videos[clips[i].video_id], clips[i].start, k, rng) for i in eligible]
    order_clips = [gen_negative_order(clips[i], rng) for i in eligible]
    negatives, _ = encode(state.store, stack_inputs(speed_clips + order_clips), training=True, track=False)

    pair_clip, pair_slot, pair_masks, groups = [], [], [], []
    for slot, i in enumerate(eligible):
        start = len(pair_masks)
        for mask in masks[i]:
            pair_clip.append(i)
            pair_slot.append(slot)
            pair_masks.append(mask)
        groups.append((start, len(pair_masks)))

    pair_masks = np.stack(pair_masks)
    pair_slot = np.asarray(pair_slot)
    n = len(eligible)

    positive = object_embedding(F.index(features, np.asarray(pair_clip)), pair_masks, literal=config.literal_gap)
    speed_maps = F.index(negatives, pair_slot)
    order_maps = F.index(negatives, pair_slot + n)
    if config.negative_global_pool:
        speed, order = F.global_average_pool(speed_maps), F.global_average_pool(order_maps)
    else:
        speed = object_embedding(speed_maps, pair_masks, literal=config.literal_gap)
        order = object_embedding(order_maps, pair_masks, literal=config.literal_gap)

    gamma = relation_gamma(state.store, F.index(features, np.asarray(eligible)), training=True)
    return RelationBatch(F.index(gamma, pair_slot), pair_masks, positive, speed, order, groups)


def train_step(state, clips, videos, masks, rng):
    """
    One optimizer step on a batch of clips.

    Args:
        state: ModelState, updated in place
        clips: VideoClips with targets
        videos: Mapping video_id -> Video (for speed negatives)
        masks: Per clip, feature-resolution masks
        rng: numpy Generator for the negatives

    Returns:
        StepResult
    """
    config = state.config
    state.store.zero_grad()

    inputs = stack_inputs(clips)
    target = np.stack([clip.target for clip in clips])
    ae, prediction = loss_ae(state.store, inputs, target, config.lambda_grd, config.lambda_mot, training=True)

    relation = build_relation_batch(state, clips, videos, masks, prediction.features, rng)
    l_rl = loss_rl(relation, config.rl_loss_form) if relation is not None else None
    total = loss_total(ae.total, l_rl, config.lambda_rl)

    if not np.isfinite(total.item()):
        raise NonFiniteError("loss is not finite")
    total.backward()
    adam_step(state.store.params, state.optimizer)

    return StepResult(ae.total.item(), None if l_rl is None else l_rl.item(), total.item())


def train(config, dataset, checkpoint_path=None, log_path=None, state=None, workers=4):
    """
    Train on normal videos.

    Args:
        config: Validated Config
        dataset: VideoDataset of training videos
        checkpoint_path: Where to write the final checkpoint; intermediate
            ones go next to it as ``<stem>_epochNNNN<suffix>``
        log_path: Optional per-epoch loss CSV
        state: Resume from this ModelState instead of a fresh model
        workers: Threads for region extraction

    Returns:
        tuple: (ModelState, list of EpochLog)
    """
    k = config.clip_length
    for video in dataset:
        if video.resolution != (config.resolution, config.resolution):
            raise ValidationError(
                f"{video.video_id}: resolution {video.resolution} does not match config {config.resolution}"
            )

    positions = training_positions(dataset, k)
    if not positions:
        raise ValidationError(f"no training clips: every video is shorter than {k + 1} frames")

    state = state if state is not None else build_model(config)
    videos = {video.video_id: video for video in dataset}
    cache_dir = config.cache_dir if config.cache_masks else None

    logger.info(f"Training on {len(positions)} clips from {len(dataset)} videos "
                f"for {config.epochs} epochs (batch {config.batch_size})")

    logs = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for epoch in range(1, config.epochs + 1):
            rng = np.random.default_rng([config.seed, epoch])
            order = rng.permutation(len(positions))

            sums = {'l_ae': 0.0, 'l_rl': 0.0, 'l_total': 0.0}
            batches = relation_batches = 0
            for batch_index, start in enumerate(range(0, len(order), config.batch_size)):
                chosen = [positions[i] for i in order[start:start + config.batch_size]]
                clips = [clip_at(videos[video_id], t, k) for video_id, t in chosen]
                masks = list(pool.map(lambda clip: clip_masks(clip, cache_dir, config.resolution), clips))

                try:
                    result = train_step(state, clips, videos, masks, rng)
                except NonFiniteError as e:
                    raise NonFiniteError(
                        f"epoch {epoch}, batch {batch_index} ({', '.join(f'{v}@{t}' for v, t in chosen)}): {e}"
                    ) from None

                sums['l_ae'] += result.l_ae
                sums['l_total'] += result.l_total
                if result.l_rl is not None:
                    sums['l_rl'] += result.l_rl
                    relation_batches += 1
                batches += 1

            log = EpochLog(epoch, sums['l_ae'] / batches,
                           sums['l_rl'] / relation_batches if relation_batches else 0.0,
                           sums['l_total'] / batches, relation_batches)
            logs.append(log)
            logger.info(f"Epoch {epoch}/{config.epochs}: L_ae={log.l_ae:.5f} L_rl={log.l_rl:.5f} "
                        f"L={log.l_total:.5f} ({relation_batches}/{batches} batches with relation term)")

            if log_path is not None:
                write_loss_log(log_path, logs)
            if checkpoint_path is not None and epoch % config.checkpoint_every == 0 and epoch != config.epochs:
                path = Path(checkpoint_path)
                checkpoint_save(state, path.with_name(f"{path.stem}_epoch{epoch:04d}{path.suffix}"))

    if checkpoint_path is not None:
        checkpoint_save(state, checkpoint_path)
    return state, logs
