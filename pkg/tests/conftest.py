"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from strl.autograd.tensor import Tensor, precision
from strl.config import Config


@pytest.fixture
def rng():
    """Seeded generator, fresh per test."""
    return np.random.default_rng(1234)


@pytest.fixture
def float64():
    """Run the test body in 64-bit mode (gradient checks)."""
    with precision(np.float64):
        yield


@pytest.fixture
def tiny_config():
    """16x16 model with small channel widths, cheap enough for full-model checks."""
    return Config(resolution=16, clip_length=3, channels=(4, 6, 8), embed_dim=8, batch_size=2,
                  epochs=2, checkpoint_every=1, learning_rate=1e-3, smoothing_window=3)


@pytest.fixture
def leaf():
    """Factory for float64 leaf tensors that require gradients."""
    def make(values):
        return Tensor(np.asarray(values, dtype=np.float64), requires_grad=True, keep_dtype=True)
    return make


def square_clip(n_frames=5, size=64, side=16, start=(10, 20), step=(2, 0), value=0.8, background=-0.8):
    """
    A textured bright square translating over a flat background.

    Returns:
        tuple: (frames (n, 3, size, size) in [-1, 1], list of (x, y) positions)
    """
    frames = np.full((n_frames, 3, size, size), background, dtype=np.float32)
    yy, xx = np.mgrid[0:side, 0:side]
    patch = np.where(((yy // 2) + (xx // 2)) % 2 == 0, value, value - 0.6)
    positions = []
    for i in range(n_frames):
        x, y = start[0] + i * step[0], start[1] + i * step[1]
        frames[i, :, y:y + side, x:x + side] = patch
        positions.append((x, y))
    return frames, positions
