"""PGM images of region masks, relation-map cluster labels and centroid similarity."""

from pathlib import Path

import cv2
import numpy as np

from strl.collectors.pixmap import write_pixmap
from strl.utils.logger import setup_logger

logger = setup_logger(__name__)


def write_mask_images(out_dir, video_id, frame, regions):
    """
    Write one binary PGM (0/255) per region mask.

    Files are named ``<video>_frame_<frame>_region_<i>.pgm``.

    Returns:
        list: Written paths
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, region in enumerate(regions):
        path = out_dir / f"{video_id}_frame_{frame:06d}_region_{i:02d}.pgm"
        write_pixmap(path, (region.mask > 0).astype(np.uint8) * 255)
        paths.append(path)
    return paths


def _save_gray(path, image, scale):
    if scale > 1:
        image = cv2.resize(image, (image.shape[1] * scale, image.shape[0] * scale), interpolation=cv2.INTER_NEAREST)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_pixmap(path, image)
    return path


def write_label_image(path, labels, n_clusters, scale=1):
    """
    Write a cluster label map as a gray PGM, labels spread over 0..255.

    Args:
        path: Destination .pgm
        labels: (h, w) integer labels in [0, n_clusters)
        n_clusters: Number of clusters
        scale: Nearest-neighbour magnification factor
    """
    labels = np.asarray(labels)
    step = 255 // max(n_clusters - 1, 1)
    path = _save_gray(path, (labels * step).astype(np.uint8), scale)
    logger.info(f"Label image saved: {path} ({labels.shape[0]}x{labels.shape[1]} cells, {n_clusters} clusters)")
    return path


def write_similarity_image(path, distances, scale=1):
    """
    Write each cell's similarity to its cluster centroid as a gray PGM.

    Brightness is 255 * (1 - d / max d): cells at their centroid are white,
    the farthest cell is black. An all-zero map is written white.

    Args:
        path: Destination .pgm
        distances: (h, w) distances to the assigned centroid
        scale: Nearest-neighbour magnification factor
    """
    distances = np.asarray(distances, dtype=np.float64)
    farthest = float(distances.max()) if distances.size else 0.0
    similarity = 1.0 - distances / farthest if farthest > 0 else np.ones_like(distances)
    image = np.rint(255.0 * similarity).astype(np.uint8)
    path = _save_gray(path, image, scale)
    logger.info(f"Similarity image saved: {path} (max distance {farthest:.4f})")
    return path
