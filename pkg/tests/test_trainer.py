"""Tests for clip enumeration, relation batches and the training loop."""

from dataclasses import replace

import numpy as np
import pytest

from conftest import square_clip
from strl.collectors.clips import clip_at, stack_inputs
from strl.collectors.frames import Video, VideoDataset
from strl.generators.csv_generator import LOSS_COLUMNS
from strl.models.checkpoint import checkpoint_load
from strl.models.stae import encode
from strl.models.state import build_model
from strl.processors.trainer import build_relation_batch, clip_masks, train, train_step, training_positions
from strl.utils.errors import ValidationError


def _random_video(video_id, n_frames, size, rng):
    frames = rng.uniform(-1, 1, size=(n_frames, 3, size, size)).astype(np.float32)
    return Video(video_id, frames)


@pytest.fixture
def dataset(rng):
    """Two 8-frame noise videos at 16x16."""
    return VideoDataset([_random_video("a", 8, 16, rng), _random_video("b", 8, 16, rng)])


@pytest.fixture
def long_video(rng):
    return _random_video("long", 12, 16, rng)


class TestTrainingPositions:
    def test_every_clip_with_a_target(self, dataset):
        positions = training_positions(dataset, 3)
        assert len(positions) == 2 * (8 - 3)
        assert positions[0] == ("a", 2) and positions[-1] == ("b", 6)


class TestClipMasks:
    def test_cache_round_trip(self, tmp_path):
        frames, _ = square_clip(n_frames=3)
        clip = clip_at(Video("sq", np.concatenate([frames, frames[-1:]])), 2, 3)
        first = clip_masks(clip, tmp_path, 64)
        cached = tmp_path / "sq" / "masks_64_000002.npy"
        assert cached.exists()
        np.testing.assert_array_equal(clip_masks(clip, tmp_path, 64), first)


class TestRelationBatch:
    """Pairing of clips, masks and negatives."""

    def test_no_masks(self, tiny_config, long_video, rng):
        state = build_model(tiny_config)
        clips = [clip_at(long_video, 2, 3)]
        empty = [np.zeros((0, 2, 2), np.uint8)]
        assert build_relation_batch(state, clips, {"long": long_video}, empty, None, rng) is None

    def test_groups_and_exclusions(self, tiny_config, long_video, rng):
        state = build_model(tiny_config)
        clips = [clip_at(long_video, 2, 3), clip_at(long_video, 3, 3), clip_at(long_video, 9, 3)]
        masks = [np.ones((1, 2, 2), np.uint8),
                 np.array([[[1, 0], [0, 0]], [[0, 0], [1, 1]]], np.uint8),
                 np.ones((1, 2, 2), np.uint8)]
        features, _ = encode(state.store, stack_inputs(clips), training=True)

        batch = build_relation_batch(state, clips, {"long": long_video}, masks, features, rng)
        # the third clip starts too late for a speed negative
        assert batch.groups == [(0, 1), (1, 3)]
        assert batch.masks.shape == (3, 2, 2)
        d = tiny_config.embed_dim
        assert batch.positive.shape == batch.speed.shape == batch.order.shape == (3, d)
        assert batch.gamma.shape == (3, d, 2, 2)

    def test_global_pool_negatives(self, tiny_config, long_video, rng):
        state = build_model(replace(tiny_config, negative_global_pool=True))
        clips = [clip_at(long_video, 2, 3)]
        masks = [np.array([[[1, 0], [0, 0]]], np.uint8)]
        features, _ = encode(state.store, stack_inputs(clips), training=True)
        batch = build_relation_batch(state, clips, {"long": long_video}, masks, features, rng)
        assert batch.speed.shape == (1, tiny_config.embed_dim)


class TestTrainStep:
    def test_updates_parameters(self, tiny_config, long_video, rng):
        state = build_model(tiny_config)
        before = {name: t.data.copy() for name, t in state.store.params.items()}
        clips = [clip_at(long_video, 2, 3), clip_at(long_video, 4, 3)]
        masks = [np.ones((1, 2, 2), np.uint8), np.zeros((0, 2, 2), np.uint8)]

        result = train_step(state, clips, {"long": long_video}, masks, rng)
        assert state.optimizer.step == 1
        assert result.l_rl is not None
        assert result.l_total == pytest.approx(result.l_ae + tiny_config.lambda_rl * result.l_rl, rel=1e-5)
        assert not np.array_equal(state.store["relation.map"].data, before["relation.map"])
        assert not np.array_equal(state.store["encoder.stage1.conv1.conv.weight"].data,
                                  before["encoder.stage1.conv1.conv.weight"])

    def test_without_relation_term(self, tiny_config, long_video, rng):
        state = build_model(tiny_config)
        clips = [clip_at(long_video, 2, 3)]
        result = train_step(state, clips, {"long": long_video}, [np.zeros((0, 2, 2), np.uint8)], rng)
        assert result.l_rl is None and result.l_total == result.l_ae


class TestTrain:
    """Epoch loop, checkpoints and the loss log."""

    def test_two_epochs(self, tiny_config, dataset, tmp_path):
        checkpoint = tmp_path / "model.strl"
        log_path = tmp_path / "loss.csv"
        state, logs = train(tiny_config, dataset, checkpoint_path=checkpoint, log_path=log_path, workers=2)

        assert [log.epoch for log in logs] == [1, 2]
        assert all(np.isfinite(log.l_total) for log in logs)
        assert checkpoint.exists()
        assert (tmp_path / "model_epoch0001.strl").exists()
        assert not (tmp_path / "model_epoch0002.strl").exists()

        loaded = checkpoint_load(checkpoint)
        assert loaded.optimizer.step == state.optimizer.step == 2 * 5
        np.testing.assert_array_equal(loaded.store["relation.map"].data, state.store["relation.map"].data)

        lines = log_path.read_text().strip().splitlines()
        assert lines[0].split(",") == LOSS_COLUMNS and len(lines) == 3

    def test_seeded_runs_match(self, tiny_config, dataset):
        config = replace(tiny_config, epochs=1)
        first_state, first = train(config, dataset, workers=1)
        second_state, second = train(config, dataset, workers=3)
        assert first == second
        for name, tensor in first_state.store.params.items():
            np.testing.assert_array_equal(second_state.store[name].data, tensor.data)

    def test_resume_continues_optimizer(self, tiny_config, dataset):
        config = replace(tiny_config, epochs=1)
        state, _ = train(config, dataset)
        state, _ = train(config, dataset, state=state)
        assert state.optimizer.step == 10

    def test_resolution_mismatch(self, tiny_config, rng):
        dataset = VideoDataset([_random_video("big", 8, 24, rng)])
        with pytest.raises(ValidationError, match="resolution"):
            train(tiny_config, dataset)

    def test_videos_too_short(self, tiny_config, rng):
        dataset = VideoDataset([_random_video("short", 3, 16, rng)])
        with pytest.raises(ValidationError, match="no training clips"):
            train(tiny_config, dataset)
