"""
Scaled synthetic experiments: region extraction on random trajectories and
frame-level AUC after training on normal videos.
"""

from dataclasses import replace

import numpy as np
import pytest

from conftest import square_clip
from strl.collectors.clips import iter_clips
from strl.collectors.synth import synth_generate
from strl.config import Config
from strl.processors.detector import detect
from strl.processors.metrics import auc
from strl.processors.regions import extract_regions
from strl.processors.trainer import train

STEPS = [(2, 0), (-2, 0), (0, 2), (0, -2), (2, 2)]


def _experiment_config(**overrides):
    config = Config(resolution=64, clip_length=4, channels=(8, 16, 32), embed_dim=32, learning_rate=1e-3,
                    batch_size=4, epochs=50, checkpoint_every=50, seed=7)
    return replace(config, **overrides)


def _component_aucs(series_list, dataset):
    labels = np.concatenate([dataset[s.video_id].labels[s.frames] for s in series_list])

    def join(attr):
        return np.concatenate([getattr(s, attr) for s in series_list])

    return {
        'app': auc(join('s_app'), labels),
        'mot': auc(join('s_mot'), labels),
        'rl': auc(1.0 - join('s_rl'), labels),
        'fused': auc(join('s'), labels),
    }


def _train_and_score(scenario, config, seed=11):
    splits = synth_generate(scenario, 4, 40, config.resolution, seed)
    state, _ = train(config, splits['train'])
    return _component_aucs(detect(state, splits['test']), splits['test'])


class TestRegionOracle:
    """One textured square on a flat background."""

    def test_trajectory_covered(self):
        rng = np.random.default_rng(5)
        hits = 0
        trials = 40
        for _ in range(trials):
            step = STEPS[rng.integers(len(STEPS))]
            start = tuple(int(v) for v in rng.integers(10, 38, size=2))
            frames, positions = square_clip(start=start, step=step)
            regions = extract_regions(frames)
            xs = [p[0] for p in positions]
            ys = [p[1] for p in positions]
            union = (min(xs), min(ys), max(xs) + 16, max(ys) + 16)
            if len(regions) == 1:
                x0, y0, x1, y1 = regions.boxes[0]
                hits += x0 <= union[0] and y0 <= union[1] and x1 >= union[2] and y1 >= union[3]
        assert hits >= 0.95 * trials

    def test_normal_synthetic_clips_have_regions(self):
        train = synth_generate('region', 3, 12, 64, seed=11, workers=1)['train']
        counts = [len(extract_regions(clip.frames)) for video in train for clip in iter_clips(video, 4)]
        assert len(counts) == 3 * 8
        assert sum(c > 0 for c in counts) >= 0.8 * len(counts)

    def test_static_clips_are_empty(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            start = tuple(int(v) for v in rng.integers(0, 48, size=2))
            frames, _ = square_clip(start=start, step=(0, 0))
            assert len(extract_regions(frames)) == 0


@pytest.mark.slow
class TestSyntheticAuc:
    """Train on normal videos, score a labelled test split."""

    def test_region_scenario(self):
        full = _train_and_score('region', _experiment_config())
        without_relation = _train_and_score('region', _experiment_config(lambda_rl=0.0))
        assert full['fused'] >= 0.85
        assert full['fused'] >= without_relation['fused']

    def test_speed_scenario_branches(self):
        result = _train_and_score('speed', _experiment_config())
        assert result['mot'] >= result['app'] - 0.05
        assert result['fused'] >= max(result['app'], result['mot']) - 0.02

    def test_seeded_runs_identical(self):
        config = _experiment_config(epochs=2)
        assert _train_and_score('region', config) == _train_and_score('region', config)
