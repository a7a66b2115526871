"""Join score rows with ground-truth frame labels."""

import numpy as np

from strl.utils.errors import ValidationError
from strl.utils.logger import setup_logger

logger = setup_logger(__name__)


def aggregate_labels(rows, labels):
    """
    Attach the ground-truth label to every score row.

    Args:
        rows: Score rows with 'video' and 'frame' keys
        labels: Mapping video_id -> per-frame 0/1 array

    Returns:
        tuple: (rows, np.ndarray of labels aligned with rows)

    Raises:
        ValidationError: Duplicate rows, unknown videos or frames without a label
    """
    logger.info(f"Joining {len(rows)} score rows with labels of {len(labels)} videos...")

    seen = set()
    aligned = np.empty(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        key = (row['video'], row['frame'])
        if key in seen:
            raise ValidationError(f"duplicate score row for video {key[0]!r} frame {key[1]}")
        seen.add(key)

        video_labels = labels.get(row['video'])
        if video_labels is None:
            raise ValidationError(f"no labels for video {row['video']!r}")
        if not 0 <= row['frame'] < len(video_labels):
            raise ValidationError(f"video {row['video']!r} has no label for frame {row['frame']}")
        aligned[i] = int(video_labels[row['frame']])

    logger.info(f"Labels joined: {int(aligned.sum())} anomalous of {len(aligned)} frames")
    return rows, aligned
