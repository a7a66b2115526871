"""Per-video score normalisation, fusion and temporal smoothing."""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from strl.utils.errors import ValidationError


@dataclass
class ScoreSeries:
    """
    Per-frame scores of one video.

    ``frames`` are the indices of the predicted frames (the first k frames
    of a video have no prediction and are absent). ``s_rl`` is the relation
    plausibility (high = normal); ``s`` is the fused, smoothed anomaly score
    once the series is finalized.
    """

    video_id: str
    frames: np.ndarray
    s_app: np.ndarray
    s_mot: np.ndarray
    s_rl: np.ndarray
    s: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.frames)


def normalize_per_video(values):
    """
    Min-max scale a series to [0, 1]; a constant series maps to zeros.

    Raises:
        ValidationError: On an empty series
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValidationError("cannot normalize an empty score series")
    lo, hi = values.min(), values.max()
    if hi - lo <= 0:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def fuse(s_app, s_mot, s_rl, lambda_mot, lambda_rl):
    """
    Combine normalized components into one anomaly score.

    The relation term enters as 1 - plausibility so every term grows with
    abnormality.
    """
    s_app, s_mot, s_rl = (np.asarray(v, dtype=np.float64) for v in (s_app, s_mot, s_rl))
    return s_app + lambda_mot * s_mot + lambda_rl * (1.0 - s_rl)


def smooth(values, window):
    """
    Centred moving average with edge replication.

    Args:
        values: 1-D series
        window: Odd window length

    Returns:
        np.ndarray: Series of the same length
    """
    if window < 1 or window % 2 == 0:
        raise ValidationError(f"smoothing window must be odd, got {window}")
    values = np.asarray(values, dtype=np.float64)
    if window == 1 or values.size == 0:
        return values.copy()
    radius = window // 2
    padded = np.pad(values, radius, mode='edge')
    return np.convolve(padded, np.full(window, 1.0 / window), mode='valid')


def finalize(series, lambda_mot, lambda_rl, window):
    """
    Normalize each component, fuse and smooth.

    Returns:
        ScoreSeries: New series with normalized components and ``s`` set
    """
    s_app = normalize_per_video(series.s_app)
    s_mot = normalize_per_video(series.s_mot)
    s_rl = normalize_per_video(series.s_rl)
    fused = fuse(s_app, s_mot, s_rl, lambda_mot, lambda_rl)
    return replace(series, s_app=s_app, s_mot=s_mot, s_rl=s_rl, s=smooth(fused, window))
