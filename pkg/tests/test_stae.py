"""
Tests for the spatio-temporal auto-encoder and its reconstruction losses.
"""

from dataclasses import replace

import numpy as np
import pytest

from strl.autograd.gradcheck import check_gradients
from strl.autograd.optim import adam_step
from strl.autograd.tensor import Tensor
from strl.config import Config
from strl.models.losses import ae_objective, loss_ae, loss_app, loss_gradient, loss_intensity
from strl.models.stae import (StaePrediction, count_parameters, decode_appearance, decode_motion, encode,
                              forward)
from strl.models.state import build_model
from strl.utils.errors import ShapeError


@pytest.fixture
def model(tiny_config):
    return build_model(tiny_config, seed=3)


def _inputs(config, rng, batch=2, size=None):
    size = size or config.resolution
    return rng.uniform(-1, 1, size=(batch, 3 * config.clip_length, size, size)).astype(np.float32)


def _grad_norm(store, prefix):
    return {name: float(np.linalg.norm(t.grad)) if t.grad is not None else 0.0
            for name, t in store.params.items() if name.startswith(prefix)}


# =============================================================================
# Architecture
# =============================================================================

class TestEncoder:
    """Shared encoder contracts."""

    def test_downsamples_by_eight(self, tiny_config, rng):
        config = replace(tiny_config, resolution=64)
        state = build_model(config)
        features, skips = encode(state.store, _inputs(config, rng))
        assert features.shape == (2, config.channels[-1], 8, 8)
        assert [s.shape[1:] for s in skips] == [(4, 64, 64), (6, 32, 32), (8, 16, 16)]

    def test_any_multiple_of_eight(self, model, tiny_config, rng):
        features, _ = encode(model.store, _inputs(tiny_config, rng, size=24))
        assert features.shape[2:] == (3, 3)

    def test_indivisible_input(self, model, tiny_config, rng):
        with pytest.raises(ShapeError):
            encode(model.store, _inputs(tiny_config, rng, size=20))

    def test_zero_input_is_finite(self, model, tiny_config):
        zeros = np.zeros((2, 3 * tiny_config.clip_length, 16, 16), dtype=np.float32)
        prediction = forward(model.store, zeros, training=True)
        assert np.all(np.isfinite(prediction.features.data))
        assert np.all(np.isfinite(prediction.frame.data))

    def test_inference_is_batch_independent(self, model, tiny_config, rng):
        inputs = _inputs(tiny_config, rng)
        both = forward(model.store, inputs).frame.data
        for i in range(2):
            single = forward(model.store, inputs[i:i + 1]).frame.data
            np.testing.assert_allclose(single[0], both[i], atol=1e-6)

    def test_deterministic(self, model, tiny_config, rng):
        inputs = _inputs(tiny_config, rng)
        np.testing.assert_array_equal(forward(model.store, inputs).frame.data,
                                      forward(model.store, inputs).frame.data)


class TestDecoders:
    """Appearance and motion branches."""

    def test_appearance_shape_and_range(self, model, tiny_config, rng):
        frame = forward(model.store, _inputs(tiny_config, rng), training=True).frame.data
        assert frame.shape == (2, 3, 16, 16)
        assert frame.min() >= -1.0 and frame.max() <= 1.0

    def test_motion_shape(self, model, tiny_config, rng):
        assert forward(model.store, _inputs(tiny_config, rng)).flow.shape == (2, 2, 16, 16)

    def test_zero_head_gives_zero_flow(self, model, tiny_config, rng):
        model.store["motion.head.weight"].data[...] = 0
        model.store["motion.head.bias"].data[...] = 0
        features, _ = encode(model.store, _inputs(tiny_config, rng))
        assert np.all(decode_motion(model.store, features).data == 0)

    def test_skip_mismatch(self, model, tiny_config, rng):
        features, skips = encode(model.store, _inputs(tiny_config, rng))
        with pytest.raises(ShapeError):
            decode_appearance(model.store, features, list(reversed(skips)))

    def test_appearance_loss_reaches_encoder(self, model, tiny_config, rng):
        inputs = _inputs(tiny_config, rng)
        features, skips = encode(model.store, inputs, training=True)
        frame = decode_appearance(model.store, features, skips, training=True)
        loss_app(rng.uniform(-1, 1, size=frame.shape), frame, 1.0).backward()
        norms = _grad_norm(model.store, "encoder.")
        # conv biases before batch norm have no effect on the output
        assert all(v > 0 for name, v in norms.items() if not name.endswith("conv.bias"))

    def test_motion_loss_reaches_motion_decoder(self, model, tiny_config, rng):
        target = rng.uniform(-1, 1, size=(2, 3, 16, 16))
        losses, _ = loss_ae(model.store, _inputs(tiny_config, rng), target, 1.0, 1.0)
        losses.mot.backward()
        norms = _grad_norm(model.store, "motion.")
        assert all(v > 0 for name, v in norms.items() if not name.endswith("conv.bias"))

    def test_parameter_budget(self):
        state = build_model(Config(resolution=256))
        total = count_parameters(state.store)
        assert total <= 300_000
        parts = sum(count_parameters(state.store, p) for p in ("encoder", "appearance", "motion", "relation"))
        assert parts == total


# =============================================================================
# Losses
# =============================================================================

class TestIntensityLoss:
    def test_identical_images(self, rng):
        image = rng.uniform(-1, 1, size=(1, 3, 8, 8))
        assert loss_intensity(image, image).item() == 0.0

    def test_constant_offset(self, rng):
        image = rng.uniform(-1, 1, size=(1, 3, 8, 8))
        assert loss_intensity(image, image + 0.25).item() == pytest.approx(0.0625, rel=1e-5)

    def test_matches_loop(self, float64, rng):
        a, b = rng.normal(size=(8, 8)), rng.normal(size=(8, 8))
        expected = sum((a[i, j] - b[i, j]) ** 2 for i in range(8) for j in range(8)) / 64
        assert loss_intensity(a, b).item() == pytest.approx(expected, abs=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            loss_intensity(np.zeros((2, 2)), np.zeros((2, 3)))


class TestGradientLoss:
    def test_identical_images(self, rng):
        image = rng.uniform(-1, 1, size=(1, 3, 8, 8))
        assert loss_gradient(image, image).item() == 0.0

    def test_ramp_against_constant(self, float64):
        slope = 0.3
        ramp = np.tile(np.arange(8) * slope, (8, 1))
        assert loss_gradient(np.zeros((8, 8)), ramp).item() == pytest.approx(slope, abs=1e-9)

    def test_matches_loop(self, float64, rng):
        a, b = rng.normal(size=(6, 7)), rng.normal(size=(6, 7))
        gx = [abs(abs(a[i, j + 1] - a[i, j]) - abs(b[i, j + 1] - b[i, j])) for i in range(6) for j in range(6)]
        gy = [abs(abs(a[i + 1, j] - a[i, j]) - abs(b[i + 1, j] - b[i, j])) for i in range(5) for j in range(7)]
        assert loss_gradient(a, b).item() == pytest.approx(np.mean(gx) + np.mean(gy), abs=1e-6)


class TestAeObjective:
    """Combined appearance and motion objective."""

    def test_perfect_predictions(self, rng):
        target = Tensor(rng.uniform(-1, 1, size=(1, 3, 8, 8)))
        prediction = StaePrediction(target, Tensor(np.zeros((1, 2, 8, 8))), target, None)
        assert ae_objective(prediction, target, 1.0, 1.0).total.item() == 0.0

    def test_motion_weight_zero(self, model, tiny_config, rng):
        target = rng.uniform(-1, 1, size=(2, 3, 16, 16))
        losses, _ = loss_ae(model.store, _inputs(tiny_config, rng), target, 1.0, 0.0, training=False)
        assert losses.total.item() == losses.app.item()

    def test_full_model_gradients(self, tiny_config, float64, rng):
        """
        Every parameter's gradient matches finite differences on a 2-frame 16x16 clip.

        The step is 1e-6 rather than the per-op 1e-4: one parameter moves thousands of
        ReLU and absolute-value inputs, and none of them may cross zero inside the step.
        """
        config = replace(tiny_config, clip_length=2)
        state = build_model(config, seed=5)
        inputs = _inputs(config, rng, batch=1).astype(np.float64)
        target = rng.uniform(-1, 1, size=(1, 3, 16, 16))

        def fn():
            losses, _ = loss_ae(state.store, inputs, target, 1.0, 1.0, training=True)
            return losses.total

        params = {n: t for n, t in state.store.params.items() if not n.startswith("relation.")}
        errors = check_gradients(fn, params, h=1e-6, max_entries=4, rng=rng)
        worst = max(errors, key=errors.get)
        assert errors[worst] < 1e-3, worst

    @pytest.mark.slow
    def test_overfits_static_clip(self, tiny_config, rng):
        state = build_model(replace(tiny_config, learning_rate=1e-2))
        frame = rng.uniform(-1, 1, size=(3, 16, 16)).astype(np.float32)
        inputs = np.tile(frame, (1, tiny_config.clip_length, 1, 1))
        target = frame[None]

        first = None
        for _ in range(200):
            state.store.zero_grad()
            losses, _ = loss_ae(state.store, inputs, target, 1.0, 1.0)
            losses.total.backward()
            adam_step(state.store.params, state.optimizer)
            first = losses.total.item() if first is None else first
        final, _ = loss_ae(state.store, inputs, target, 1.0, 1.0)
        assert final.total.item() <= 0.1 * first
