"""CSV writers and readers for scores, regions, cluster labels and loss logs."""

import csv
import math
from pathlib import Path

from strl.utils.errors import ValidationError
from strl.utils.logger import setup_logger

logger = setup_logger(__name__)

SCORE_COLUMNS = ['video', 'frame', 's_app', 's_mot', 's_rl', 's']
REGION_COLUMNS = ['video', 'frame', 'x0', 'y0', 'x1', 'y1']
CLUSTER_COLUMNS = ['cell', 'label', 'distance']
LOSS_COLUMNS = ['epoch', 'l_ae', 'l_rl', 'l_total', 'relation_batches']


def _open_for_write(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, 'w', newline='', encoding='utf-8')


def write_scores(path, series_list):
    """
    Write per-frame scores of every video.

    Args:
        path: Destination CSV
        series_list: Iterable of finalized ScoreSeries
    """
    rows = 0
    with _open_for_write(path) as f:
        writer = csv.DictWriter(f, fieldnames=SCORE_COLUMNS)
        writer.writeheader()
        for series in series_list:
            for i, frame in enumerate(series.frames):
                writer.writerow({
                    'video': series.video_id,
                    'frame': int(frame),
                    's_app': f"{series.s_app[i]:.6f}",
                    's_mot': f"{series.s_mot[i]:.6f}",
                    's_rl': f"{series.s_rl[i]:.6f}",
                    's': f"{series.s[i]:.6f}",
                })
                rows += 1

    logger.info(f"Scores CSV saved: {path} ({rows} frames)")


def read_scores(path):
    """
    Read a scores CSV.

    Args:
        path: CSV written by write_scores

    Returns:
        list: Dicts with 'video' (str), 'frame' (int) and float components

    Raises:
        ValidationError: Unreadable file, wrong header or malformed values
    """
    rows = []
    try:
        with open(path, 'r', newline='', encoding='utf-8') as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != SCORE_COLUMNS:
                raise ValidationError(f"{path}: expected header {','.join(SCORE_COLUMNS)}")
            for lineno, raw in enumerate(reader, start=2):
                try:
                    row = {'video': raw['video'].strip(), 'frame': int(raw['frame'])}
                    for key in SCORE_COLUMNS[2:]:
                        row[key] = float(raw[key])
                except (TypeError, ValueError, AttributeError):
                    raise ValidationError(f"{path}: malformed row at line {lineno}") from None
                if not row['video'] or not all(math.isfinite(row[k]) for k in SCORE_COLUMNS[2:]):
                    raise ValidationError(f"{path}: malformed row at line {lineno}")
                rows.append(row)
    except OSError as e:
        raise ValidationError(f"{path}: cannot read scores ({e})") from None

    if not rows:
        raise ValidationError(f"{path}: no score rows")
    return rows


def write_regions(path, rows):
    """
    Write detected rectangles.

    Args:
        path: Destination CSV
        rows: Iterable of (video, frame, (x0, y0, x1, y1)) with exclusive ends
    """
    count = 0
    with _open_for_write(path) as f:
        writer = csv.DictWriter(f, fieldnames=REGION_COLUMNS)
        writer.writeheader()
        for video, frame, (x0, y0, x1, y1) in rows:
            writer.writerow({'video': video, 'frame': frame, 'x0': x0, 'y0': y0, 'x1': x1, 'y1': y1})
            count += 1

    logger.info(f"Regions CSV saved: {path} ({count} rectangles)")


def write_cluster(path, result):
    """Write one row per relation-map cell (raster order) with its label and distance."""
    labels = result.labels.ravel()
    distances = result.distances.ravel()
    with _open_for_write(path) as f:
        writer = csv.DictWriter(f, fieldnames=CLUSTER_COLUMNS)
        writer.writeheader()
        for cell, (label, distance) in enumerate(zip(labels, distances)):
            writer.writerow({'cell': cell, 'label': int(label), 'distance': f"{distance:.6f}"})

    logger.info(f"Cluster CSV saved: {path} ({labels.size} cells)")


def write_loss_log(path, logs):
    """Write per-epoch mean losses."""
    with _open_for_write(path) as f:
        writer = csv.DictWriter(f, fieldnames=LOSS_COLUMNS)
        writer.writeheader()
        for log in logs:
            writer.writerow({
                'epoch': log.epoch,
                'l_ae': f"{log.l_ae:.8f}",
                'l_rl': f"{log.l_rl:.8f}",
                'l_total': f"{log.l_total:.8f}",
                'relation_batches': log.relation_batches,
            })
