"""
Tests for moving-region extraction: accumulators, filters, morphology and the
full rectangle pipeline.
"""

import cv2
import numpy as np
import pytest

from conftest import square_clip
from strl.processors.regions import (
    accumulate_first_order_threshold,
    accumulate_second_order,
    extract_regions,
    feature_masks,
    gaussian_blur5,
    min_region_extent,
    morph_kernel_size,
    open_binary,
    scaled_box,
    sobel_edges5,
    to_gray,
)
from strl.utils.errors import ValidationError


def _gray_square_frames(positions, size=32, side=8, value=0.8):
    frames = np.zeros((len(positions), size, size))
    for i, (x, y) in enumerate(positions):
        frames[i, y:y + side, x:x + side] = value
    return frames


def _union_box(positions, side):
    xs = [p[0] for p in positions]
    ys = [p[1] for p in positions]
    return min(xs), min(ys), max(xs) + side, max(ys) + side


def _contains(outer, inner):
    return outer[0] <= inner[0] and outer[1] <= inner[1] and outer[2] >= inner[2] and outer[3] >= inner[3]


# =============================================================================
# Accumulators
# =============================================================================

class TestSecondOrder:
    """Acceleration map A."""

    def test_static_clip(self):
        assert np.all(accumulate_second_order(np.full((4, 8, 8), 0.3)) == 0)

    def test_constant_velocity_ramp_cancels(self):
        slope, velocity = 0.01, 1.5
        xs = np.arange(32, dtype=np.float64)
        frames = np.stack([np.tile(slope * (xs - velocity * t) + 0.5, (16, 1)) for t in range(5)])
        np.testing.assert_allclose(accumulate_second_order(frames), 0.0, atol=1e-12)

    def test_single_jump_on_symmetric_difference(self):
        positions = [(4, 4), (4, 4), (4, 4), (8, 4)]
        frames = _gray_square_frames(positions)
        acc = accumulate_second_order(frames)
        moved = frames[3] != frames[2]
        assert np.all(acc[moved] > 0)
        assert np.all(acc[~moved] == 0)

    def test_needs_three_frames(self):
        with pytest.raises(ValidationError):
            accumulate_second_order(np.zeros((2, 4, 4)))


class TestFirstOrder:
    """Thresholded change map B."""

    def test_static_clip(self):
        assert accumulate_first_order_threshold(np.zeros((3, 6, 6))).sum() == 0

    def test_toggle_marks_square(self):
        frames = np.zeros((3, 16, 16))
        frames[1:, 4:10, 4:10] = 0.5
        expected = np.zeros((16, 16), dtype=np.uint8)
        expected[4:10, 4:10] = 1
        np.testing.assert_array_equal(accumulate_first_order_threshold(frames), expected)

    def test_threshold_is_strict(self):
        frames = np.zeros((2, 2, 2))
        frames[1] = 0.1
        assert accumulate_first_order_threshold(frames).sum() == 0

    def test_needs_two_frames(self):
        with pytest.raises(ValidationError):
            accumulate_first_order_threshold(np.zeros((1, 4, 4)))


class TestGray:
    def test_range_mapping(self):
        frames = np.stack([np.full((3, 2, 2), -1.0), np.full((3, 2, 2), 1.0)])
        gray = to_gray(frames)
        np.testing.assert_allclose(gray[0], 0.0)
        np.testing.assert_allclose(gray[1], 1.0)

    def test_rejects_gray_input(self):
        with pytest.raises(ValidationError):
            to_gray(np.zeros((3, 1, 4, 4)))


# =============================================================================
# Filters
# =============================================================================

class TestGaussianBlur:
    """5x5 Gaussian with replicated borders."""

    def test_constant_unchanged(self):
        np.testing.assert_allclose(gaussian_blur5(np.full((9, 9), 2.5)), 2.5)

    def test_impulse_stamp(self):
        impulse = np.zeros((11, 11))
        impulse[5, 5] = 1.0
        kernel = cv2.getGaussianKernel(5, 1.1, cv2.CV_64F)
        np.testing.assert_allclose(gaussian_blur5(impulse)[3:8, 3:8], kernel @ kernel.T, atol=1e-12)

    def test_commutes_with_flip(self, rng):
        image = rng.random((12, 15))
        np.testing.assert_allclose(gaussian_blur5(image[:, ::-1]), gaussian_blur5(image)[:, ::-1], atol=1e-12)


class TestSobel:
    """5x5 Sobel gradient magnitude."""

    def test_constant_has_no_edges(self):
        np.testing.assert_allclose(sobel_edges5(np.full((8, 8), 4.0)), 0.0)

    def test_vertical_step(self):
        image = np.zeros((12, 12))
        image[:, 6:] = 1.0
        edges = sobel_edges5(image)
        strongest = np.argmax(edges, axis=1)
        assert np.all((strongest == 5) | (strongest == 6))
        assert np.all(edges[:, :2] == 0) and np.all(edges[:, -2:] == 0)

    def test_rotation_invariant(self, rng):
        image = rng.random((10, 10))
        np.testing.assert_allclose(sobel_edges5(np.rot90(image)), np.rot90(sobel_edges5(image)), atol=1e-10)


# =============================================================================
# Morphology and boxes
# =============================================================================

class TestMorphology:
    """Binary opening with a square block."""

    def test_idempotent(self, rng):
        binary = (gaussian_blur5(rng.random((64, 64))) > 0.5).astype(np.uint8)
        binary[10:30, 20:45] = 1
        once = open_binary(binary)
        np.testing.assert_array_equal(open_binary(once), once)

    def test_keeps_large_block_in_place(self):
        binary = np.zeros((32, 32), dtype=np.uint8)
        binary[5:20, 7:25] = 1
        np.testing.assert_array_equal(open_binary(binary), binary)

    def test_removes_thin_line(self):
        binary = np.zeros((32, 32), dtype=np.uint8)
        binary[10:13, 2:30] = 1
        assert open_binary(binary).sum() == 0

    def test_unit_block_is_identity(self, rng):
        binary = (rng.random((16, 16)) > 0.5).astype(np.uint8)
        np.testing.assert_array_equal(open_binary(binary, 1), binary)

    def test_small_block_keeps_checkered_gaps_closed(self):
        binary = np.ones((16, 16), dtype=np.uint8)
        binary[::4, ::4] = 0
        assert open_binary(binary, 2).sum() > 0.5 * binary.sum()
        assert open_binary(binary, 8).sum() == 0


class TestBoxes:
    def test_scaled_about_centre(self):
        assert scaled_box(10, 10, 10, 10, 64, 64) == (7, 7, 23, 23)

    def test_clipped_at_border(self):
        assert scaled_box(0, 56, 10, 8, 64, 64) == (0, 54, 13, 64)

    def test_size_filter_scales(self):
        assert min_region_extent(256, 256) == 8
        assert min_region_extent(64, 64) == 2

    def test_opening_block_scales(self):
        assert morph_kernel_size(256, 256) == 8
        assert morph_kernel_size(64, 64) == 2
        assert morph_kernel_size(128, 96) == 3
        assert morph_kernel_size(16, 16) == 1


# =============================================================================
# Full pipeline
# =============================================================================

class TestExtractRegions:
    """Rectangle masks of moving objects."""

    def test_static_clip_is_empty(self):
        frames, _ = square_clip(step=(0, 0))
        assert len(extract_regions(frames)) == 0

    def test_one_square(self):
        frames, positions = square_clip()
        regions = extract_regions(frames)
        assert len(regions) == 1
        box = regions.boxes[0]
        assert _contains(box, _union_box(positions, 16))

        region = regions.masks[0]
        x0, y0, x1, y1 = box
        assert region.mask.sum() == (x1 - x0) * (y1 - y0)
        assert np.all(region.mask[y0:y1, x0:x1] == 1)
        sx0, sy0, sx1, sy1 = region.source_box
        assert sx1 - sx0 > min_region_extent(64, 64) and sy1 - sy0 > min_region_extent(64, 64)
        assert x1 - x0 >= 1.5 * (sx1 - sx0) or x0 == 0 or x1 == 64
        assert y1 - y0 >= 1.5 * (sy1 - sy0) or y0 == 0 or y1 == 64

    @pytest.mark.parametrize("step", [(1, 0), (0, 1)])
    def test_slow_textured_mover(self, step):
        # one pixel per frame leaves a constant second-order interior, so only a thin edge ring is gated
        frames, positions = square_clip(n_frames=4, step=step)
        regions = extract_regions(frames)
        assert len(regions) >= 1
        assert any(_contains(box, _union_box(positions, 16)) for box in regions.boxes)

    def test_two_squares(self):
        first, pos_a = square_clip(start=(6, 6), step=(2, 0))
        second, pos_b = square_clip(start=(38, 40), step=(-2, 0))
        frames = np.maximum(first, second)
        regions = extract_regions(frames)
        assert len(regions) == 2

        boxes = regions.boxes
        for union in (_union_box(pos_a, 16), _union_box(pos_b, 16)):
            assert any(_contains(box, union) for box in boxes)
        a, b = boxes
        assert a[2] <= b[0] or b[2] <= a[0] or a[3] <= b[1] or b[3] <= a[1]

    def test_translation_equivariance(self):
        base, _ = square_clip(start=(10, 20))
        shifted, _ = square_clip(start=(14, 26))
        (x0, y0, x1, y1), = extract_regions(base).boxes
        assert extract_regions(shifted).boxes == [(x0 + 4, y0 + 6, x1 + 4, y1 + 6)]

    def test_feature_masks(self):
        frames, _ = square_clip()
        regions, cells = feature_masks(frames)
        assert cells.shape == (len(regions), 8, 8)
        assert np.all(cells.reshape(len(regions), -1).max(axis=1) == 1)

    def test_feature_masks_empty(self):
        frames, _ = square_clip(step=(0, 0))
        _, cells = feature_masks(frames)
        assert cells.shape == (0, 8, 8)
