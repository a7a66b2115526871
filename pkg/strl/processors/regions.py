"""Fast extraction of moving-object rectangles from a short clip.

Pipeline: 2nd-order frame differences (suppresses smooth camera motion) ->
5x5 Gaussian blur -> 5x5 Sobel magnitude, gated by the thresholded 1st-order
differences -> binary opening -> 8-connected components -> size filter ->
1.5x rectangles. The opening block and the size filter are 8 pixels at
256x256 and shrink in proportion on smaller frames.
"""

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import cv2
import numpy as np

from strl.config import (
    GAUSSIAN_SIGMA,
    LUMA_WEIGHTS,
    REFERENCE_RESOLUTION,
    REGION_MIN_EXTENT,
    REGION_MORPH_KERNEL,
    REGION_MOTION_THRESHOLD,
    REGION_SCALE,
)
from strl.models.relation import downsample_mask
from strl.models.stae import DOWNSAMPLE
from strl.utils.errors import ValidationError


@dataclass
class MotionAccumulators:
    """A: 2nd-order accumulation, B: binary 1st-order map, E: Sobel magnitude of blurred A."""

    A: np.ndarray
    B: np.ndarray
    E: np.ndarray


@dataclass
class RegionMask:
    """
    Filled rectangle mask of one moving region.

    ``box`` and ``source_box`` are (x0, y0, x1, y1) with exclusive ends; the
    source box is the bounding box of the connected component.
    """

    mask: np.ndarray
    box: Tuple[int, int, int, int]
    source_box: Tuple[int, int, int, int]


@dataclass
class RegionMaskSet:
    shape: Tuple[int, int]
    masks: List[RegionMask] = field(default_factory=list)

    def __len__(self):
        return len(self.masks)

    def __iter__(self):
        return iter(self.masks)

    @property
    def boxes(self):
        return [m.box for m in self.masks]


def to_gray(frames):
    """
    Luma of RGB frames, rescaled from [-1, 1] to [0, 1].

    Args:
        frames: (k, 3, H, W) array in [-1, 1]

    Returns:
        np.ndarray: float64 (k, H, W) in [0, 1]
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 4 or frames.shape[1] != 3:
        raise ValidationError(f"expected frames of shape (k, 3, H, W), got {frames.shape}")
    unit = (frames + 1.0) / 2.0
    r, g, b = LUMA_WEIGHTS
    return r * unit[:, 0] + g * unit[:, 1] + b * unit[:, 2]


def accumulate_second_order(gray):
    """Sum of |I[i+2] - 2 I[i+1] + I[i]| over the clip; needs k >= 3."""
    gray = np.asarray(gray, dtype=np.float64)
    if gray.shape[0] < 3:
        raise ValidationError(f"second-order accumulation needs at least 3 frames, got {gray.shape[0]}")
    return np.abs(np.diff(gray, n=2, axis=0)).sum(axis=0)


def gaussian_blur5(acc):
    """Separable 5x5 Gaussian (sigma 1.1) with replicated borders."""
    return cv2.GaussianBlur(np.asarray(acc, dtype=np.float64), (5, 5), sigmaX=GAUSSIAN_SIGMA,
                            sigmaY=GAUSSIAN_SIGMA, borderType=cv2.BORDER_REPLICATE)


def sobel_edges5(acc):
    """Gradient magnitude from 5x5 Sobel derivatives with replicated borders."""
    acc = np.asarray(acc, dtype=np.float64)
    gx = cv2.Sobel(acc, cv2.CV_64F, 1, 0, ksize=5, borderType=cv2.BORDER_REPLICATE)
    gy = cv2.Sobel(acc, cv2.CV_64F, 0, 1, ksize=5, borderType=cv2.BORDER_REPLICATE)
    return np.sqrt(gx * gx + gy * gy)


def accumulate_first_order_threshold(gray, threshold=REGION_MOTION_THRESHOLD):
    """Binary map of pixels whose summed |I[i+1] - I[i]| is strictly above the threshold."""
    gray = np.asarray(gray, dtype=np.float64)
    if gray.shape[0] < 2:
        raise ValidationError(f"first-order accumulation needs at least 2 frames, got {gray.shape[0]}")
    acc = np.abs(np.diff(gray, axis=0)).sum(axis=0)
    return (acc > threshold).astype(np.uint8)


def open_binary(binary, size=REGION_MORPH_KERNEL):
    """
    Erosion followed by dilation with a size x size block of ones.

    For even sizes the dilation anchor is mirrored so the pair is a true
    (idempotent, non-shifting) opening.
    """
    kernel = np.ones((size, size), dtype=np.uint8)
    eroded = cv2.erode(np.asarray(binary, dtype=np.uint8), kernel, anchor=(size // 2, size // 2))
    return cv2.dilate(eroded, kernel, anchor=((size - 1) // 2, (size - 1) // 2))


def morph_kernel_size(height, width):
    """Opening block side scaled from the 256x256 reference, at least one pixel."""
    return max(1, int(round(REGION_MORPH_KERNEL * min(height, width) / REFERENCE_RESOLUTION)))


def min_region_extent(height, width):
    """Size-filter threshold scaled from the 256x256 reference."""
    return REGION_MIN_EXTENT * min(height, width) / REFERENCE_RESOLUTION


def scaled_box(x, y, w, h, height, width, scale=REGION_SCALE):
    """Rectangle scaled about its centre and clipped to the image."""
    cx, cy = x + w / 2.0, y + h / 2.0
    half_w, half_h = scale * w / 2.0, scale * h / 2.0
    x0 = max(0, int(math.floor(cx - half_w)))
    y0 = max(0, int(math.floor(cy - half_h)))
    x1 = min(width, int(math.ceil(cx + half_w)))
    y1 = min(height, int(math.ceil(cy + half_h)))
    return x0, y0, x1, y1


def motion_accumulators(gray):
    acc = accumulate_second_order(gray)
    edges = sobel_edges5(gaussian_blur5(acc))
    return MotionAccumulators(acc, accumulate_first_order_threshold(gray), edges)


def extract_regions(frames):
    """
    Moving-object rectangle masks of one clip.

    Args:
        frames: (k, 3, H, W) clip in [-1, 1], k >= 3

    Returns:
        RegionMaskSet: Possibly empty; masks in component label order
    """
    gray = to_gray(frames)
    height, width = gray.shape[1:]
    acc = motion_accumulators(gray)

    gated = ((acc.E * acc.B) > 0).astype(np.uint8)
    opened = open_binary(gated, morph_kernel_size(height, width))
    n_labels, _, stats, _ = cv2.connectedComponentsWithStats(opened, connectivity=8)

    min_extent = min_region_extent(height, width)
    result = RegionMaskSet((height, width))
    for label in range(1, n_labels):
        x = int(stats[label, cv2.CC_STAT_LEFT])
        y = int(stats[label, cv2.CC_STAT_TOP])
        w = int(stats[label, cv2.CC_STAT_WIDTH])
        h = int(stats[label, cv2.CC_STAT_HEIGHT])
        if w <= min_extent or h <= min_extent:
            continue

        x0, y0, x1, y1 = scaled_box(x, y, w, h, height, width)
        mask = np.zeros((height, width), dtype=np.uint8)
        mask[y0:y1, x0:x1] = 1
        result.masks.append(RegionMask(mask, (x0, y0, x1, y1), (x, y, x + w, y + h)))

    return result


def feature_masks(frames, factor=DOWNSAMPLE):
    """
    Region masks of a clip, max-pooled to bottleneck resolution.

    Returns:
        tuple: (RegionMaskSet, uint8 array (n, H/factor, W/factor))
    """
    regions = extract_regions(frames)
    height, width = regions.shape
    if not regions.masks:
        return regions, np.zeros((0, height // factor, width // factor), dtype=np.uint8)
    return regions, np.stack([downsample_mask(m.mask, factor) for m in regions.masks])
