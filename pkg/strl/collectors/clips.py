"""Clip sampling: k input frames plus the frame to predict."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from strl.utils.errors import ValidationError


@dataclass
class VideoClip:
    """
    Window of k frames (k, 3, H, W) in [-1, 1], temporally ordered.

    ``indices`` are the source frame numbers; ``target`` is frame t+1 when
    the clip was sampled for prediction and None for synthetic negatives.
    """

    video_id: str
    indices: Tuple[int, ...]
    frames: np.ndarray
    target: Optional[np.ndarray] = None

    @property
    def k(self):
        return self.frames.shape[0]

    @property
    def start(self):
        return self.indices[0]

    @property
    def end(self):
        return self.indices[-1]


def clip_at(video, t, k):
    """
    The k frames ending at t together with target frame t+1.

    Raises:
        ValidationError: If t-k+1 < 0 or t+1 is past the end of the video
    """
    if k < 2:
        raise ValidationError(f"clip length must be at least 2, got {k}")
    if t - k + 1 < 0 or t + 1 >= len(video):
        raise ValidationError(
            f"frame {t} of {video.video_id} (length {len(video)}) cannot end a {k}-frame clip with a target"
        )
    indices = tuple(range(t - k + 1, t + 1))
    return VideoClip(video.video_id, indices, video.frames[t - k + 1:t + 1].copy(), video.frames[t + 1].copy())


def sample_clip(dataset, video_id, t, k):
    """
    Sample the clip of ``video_id`` ending at frame ``t``.

    Args:
        dataset: VideoDataset
        video_id: Id of the video to sample from
        t: Index of the last input frame
        k: Clip length

    Returns:
        VideoClip: Frames t-k+1..t and target frame t+1
    """
    try:
        video = dataset[video_id]
    except KeyError:
        raise ValidationError(f"unknown video {video_id!r}") from None
    return clip_at(video, t, k)


def clip_from_indices(video, indices):
    """Gather arbitrary frames of a video into a clip without a target."""
    if any(i < 0 or i >= len(video) for i in indices):
        raise ValidationError(f"frame indices {indices} out of range for {video.video_id}")
    return VideoClip(video.video_id, tuple(int(i) for i in indices), video.frames[list(indices)].copy())


def iter_clips(video, k):
    """Yield every clip of a video in order (t = k-1 .. len-2)."""
    for t in range(k - 1, len(video) - 1):
        yield clip_at(video, t, k)


def stack_inputs(clips):
    """
    Concatenate each clip's frames along channels and stack into a batch.

    Returns:
        np.ndarray: float array (B, 3k, H, W)
    """
    return np.stack([clip.frames.reshape(-1, *clip.frames.shape[2:]) for clip in clips])
