"""Frame-level ROC AUC."""

import numpy as np
from sklearn.metrics import roc_auc_score

from strl.utils.errors import ValidationError

COMPONENTS = ('app', 'mot', 'rl', 'fused')


def auc(scores, labels):
    """
    Area under the ROC curve of per-frame anomaly scores.

    Ties between a positive and a negative frame count one half.

    Args:
        scores: Per-frame scores, larger = more anomalous
        labels: Per-frame 0/1 ground truth

    Returns:
        float: AUC in [0, 1]

    Raises:
        ValidationError: Length mismatch or labels of a single class
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValidationError(f"scores {scores.shape} and labels {labels.shape} must be equal-length 1-D")
    if not np.all(np.isin(labels, (0, 1))):
        raise ValidationError("labels must be 0 or 1")
    if labels.min() == labels.max():
        raise ValidationError("AUC needs both normal and anomalous frames")
    return float(roc_auc_score(labels, scores))


def component_scores(rows, component):
    """Anomaly-oriented values of one component from score rows."""
    if component == 'app':
        return np.array([r['s_app'] for r in rows])
    if component == 'mot':
        return np.array([r['s_mot'] for r in rows])
    if component == 'rl':
        return 1.0 - np.array([r['s_rl'] for r in rows])
    if component == 'fused':
        return np.array([r['s'] for r in rows])
    raise ValidationError(f"unknown score component {component!r}; expected one of {COMPONENTS}")


def component_auc(rows, labels, components=COMPONENTS):
    """
    AUC of each score component, for branch ablations.

    Args:
        rows: Score rows (see read_scores), aligned with ``labels``
        labels: Per-row 0/1 labels
        components: Subset of app, mot, rl, fused

    Returns:
        dict: Component name -> AUC
    """
    return {name: auc(component_scores(rows, name), labels) for name in components}
