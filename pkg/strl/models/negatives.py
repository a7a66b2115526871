"""Pseudo-anomalous clips for contrastive relation training."""

import numpy as np

from strl.collectors.clips import VideoClip, clip_from_indices
from strl.config import NEGATIVE_SPEED_INTERVALS
from strl.utils.errors import ValidationError


def speed_span(k):
    """Frames covered by the widest possible speed negative of length k."""
    return max(NEGATIVE_SPEED_INTERVALS) * (k - 1) + 1


def can_sample_speed(video, t0, k):
    return t0 >= 0 and t0 + speed_span(k) - 1 < len(video)


def gen_negative_speed(video, t0, k, rng):
    """
    Frame-skipping negative starting at ``t0``.

    Keeps frame t0 and adds k-1 successors at random intervals drawn from
    {1, 2, 3, 4}; an all-ones draw is resampled so the clip really is
    faster than the original.

    Args:
        video: Video to sample from
        t0: First frame index
        k: Clip length
        rng: numpy Generator

    Returns:
        VideoClip: Without a target frame

    Raises:
        ValidationError: If the worst-case span runs past the video
    """
    if k < 2:
        raise ValidationError(f"clip length must be at least 2, got {k}")
    if not can_sample_speed(video, t0, k):
        raise ValidationError(
            f"{video.video_id}: speed negative from frame {t0} needs frames up to "
            f"{t0 + speed_span(k) - 1}, video has {len(video)}"
        )

    intervals = np.asarray(NEGATIVE_SPEED_INTERVALS)
    while True:
        steps = rng.choice(intervals, size=k - 1)
        if np.any(steps > 1):
            break
    indices = np.concatenate([[t0], t0 + np.cumsum(steps)])
    return clip_from_indices(video, indices)


def gen_negative_order(clip, rng):
    """
    Shuffle the frames of a clip with a uniformly drawn non-identity permutation.

    Args:
        clip: VideoClip with k >= 2
        rng: numpy Generator

    Returns:
        VideoClip: Same frames in a different order, without a target
    """
    k = clip.k
    if k < 2:
        raise ValidationError(f"cannot reorder a clip of {k} frame")

    identity = np.arange(k)
    while True:
        perm = rng.permutation(k)
        if not np.array_equal(perm, identity):
            break
    indices = tuple(clip.indices[i] for i in perm)
    return VideoClip(clip.video_id, indices, clip.frames[perm].copy())
