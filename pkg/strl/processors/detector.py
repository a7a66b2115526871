"""Test-time scoring of every predictable frame."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from strl.autograd import functional as F
from strl.autograd.tensor import Tensor, no_grad
from strl.collectors.clips import iter_clips, stack_inputs
from strl.models.losses import loss_app
from strl.models.relation import object_embedding, plausibility, relation_gamma
from strl.models.stae import forward
from strl.processors.regions import feature_masks
from strl.processors.scorer import ScoreSeries, finalize
from strl.utils.errors import ValidationError
from strl.utils.logger import setup_logger

logger = setup_logger(__name__)


def relation_plausibility(store, features, masks, literal_gap=False, literal_sum=False):
    """
    Per clip, the lowest masked plausibility over its regions.

    Args:
        store: ParameterStore
        features: Scene embeddings Tensor[B, d, h, w]
        masks: Per clip, feature-resolution masks (n, h, w)
        literal_gap: Pool object embeddings by h*w instead of mask area
        literal_sum: Aggregate plausibility by masked sum instead of masked mean

    Returns:
        np.ndarray: (B,) values; 1.0 for clips without regions
    """
    result = np.ones(features.shape[0], dtype=np.float64)
    pair_clip = [i for i, clip_masks in enumerate(masks) for _ in range(len(clip_masks))]
    if not pair_clip:
        return result

    pair_clip = np.asarray(pair_clip)
    pair_masks = np.concatenate([m for m in masks if len(m)])
    gamma = relation_gamma(store, features, training=False)
    embedding = object_embedding(F.index(features, pair_clip), pair_masks, literal=literal_gap)
    psi = plausibility(F.index(gamma, pair_clip), embedding).data.astype(np.float64)

    weights = pair_masks.astype(np.float64)
    masked = (psi * weights).sum(axis=(1, 2))
    if not literal_sum:
        masked = masked / weights.sum(axis=(1, 2))
    for i in np.unique(pair_clip):
        result[i] = masked[pair_clip == i].min()
    return result


def score_frame(state, clips, masks=None):
    """
    Raw scores of a batch of clips (inference mode).

    Args:
        state: ModelState
        clips: VideoClips with targets
        masks: Optional per-clip feature-resolution masks; extracted when None

    Returns:
        tuple: (s_app, s_mot, s_rl) arrays of shape (B,)
    """
    config = state.config
    if masks is None:
        masks = [feature_masks(clip.frames)[1] for clip in clips]

    with no_grad():
        prediction = forward(state.store, stack_inputs(clips), training=False)
        s_app = np.empty(len(clips))
        s_mot = np.empty(len(clips))
        for b, clip in enumerate(clips):
            target = Tensor(clip.target[None])
            s_app[b] = loss_app(target, Tensor(prediction.frame.data[b:b + 1]), config.lambda_grd).item()
            s_mot[b] = loss_app(target, Tensor(prediction.warped.data[b:b + 1]), config.lambda_grd).item()
        s_rl = relation_plausibility(state.store, prediction.features, masks, config.literal_gap,
                                     config.literal_eq11_sum)
    return s_app, s_mot, s_rl


def detect_video(state, video, batch_size=None, pool=None):
    """
    Raw (unnormalized) scores of every predictable frame of one video.

    Returns:
        ScoreSeries: Frames k .. len-1, ``s`` unset
    """
    k = state.config.clip_length
    batch_size = batch_size or state.config.batch_size
    clips = list(iter_clips(video, k))
    if not clips:
        raise ValidationError(f"{video.video_id}: needs more than {k} frames to score")

    mapper = pool.map if pool is not None else map
    masks = list(mapper(lambda clip: feature_masks(clip.frames)[1], clips))

    parts = [score_frame(state, clips[i:i + batch_size], masks[i:i + batch_size])
             for i in range(0, len(clips), batch_size)]
    s_app, s_mot, s_rl = (np.concatenate([p[j] for p in parts]) for j in range(3))
    frames = np.array([clip.end + 1 for clip in clips])
    return ScoreSeries(video.video_id, frames, s_app, s_mot, s_rl)


def detect(state, dataset, workers=4):
    """
    Score a dataset: raw scores, per-video normalization, fusion, smoothing.

    Returns:
        list: Finalized ScoreSeries, one per video
    """
    config = state.config
    results = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for video in dataset:
            if video.resolution != (config.resolution, config.resolution):
                raise ValidationError(
                    f"{video.video_id}: resolution {video.resolution} does not match checkpoint "
                    f"resolution {config.resolution}"
                )
            raw = detect_video(state, video, pool=pool)
            results.append(finalize(raw, config.lambda_mot, config.lambda_rl, config.smoothing_window))
            logger.info(f"Scored {video.video_id}: {len(raw)} frames")
    return results
