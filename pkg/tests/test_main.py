"""Tests for the command-line entry point."""

from dataclasses import replace

import numpy as np
import pytest

from conftest import square_clip
from strl.collectors.pixmap import read_pixmap
from strl.collectors.frames import Video, write_video
from strl.generators.csv_generator import SCORE_COLUMNS, read_scores
from strl.main import main
from strl.models.checkpoint import checkpoint_save
from strl.models.state import build_model


def _write_labelled(root, labels):
    video = Video("v", np.zeros((len(labels), 3, 8, 8), dtype=np.float32), np.asarray(labels))
    write_video(video, root / "v")
    return root


def _write_scores(path, scores):
    lines = [",".join(SCORE_COLUMNS)]
    lines += [f"v,{i},0.0,0.0,1.0,{s}" for i, s in enumerate(scores)]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def config_file(tiny_config, tmp_path):
    path = tmp_path / "tiny.conf"
    path.write_text(replace(tiny_config, epochs=1, cache_dir=str(tmp_path / "cache")).to_text())
    return path


class TestEval:
    """AUC printing and malformed input."""

    LABELS = [0, 0, 0, 1, 1, 0]

    def test_perfect_scores(self, tmp_path, capsys):
        labels_dir = _write_labelled(tmp_path / "data", self.LABELS)
        scores = _write_scores(tmp_path / "scores.csv", self.LABELS)
        assert main(["eval", "--scores", str(scores), "--labels", str(labels_dir)]) == 0
        assert "AUC=1.0000" in capsys.readouterr().out

    def test_inverted_scores(self, tmp_path, capsys):
        labels_dir = _write_labelled(tmp_path / "data", self.LABELS)
        scores = _write_scores(tmp_path / "scores.csv", [1 - v for v in self.LABELS])
        assert main(["eval", "--scores", str(scores), "--labels", str(labels_dir)]) == 0
        assert "AUC=0.0000" in capsys.readouterr().out

    def test_all_components(self, tmp_path, capsys):
        labels_dir = _write_labelled(tmp_path / "data", self.LABELS)
        scores = _write_scores(tmp_path / "scores.csv", self.LABELS)
        assert main(["eval", "--scores", str(scores), "--labels", str(labels_dir), "--component", "all"]) == 0
        out = capsys.readouterr().out
        for name in ("app", "mot", "rl", "fused"):
            assert f"AUC[{name}]=" in out

    def test_malformed_csv(self, tmp_path):
        labels_dir = _write_labelled(tmp_path / "data", self.LABELS)
        scores = tmp_path / "scores.csv"
        scores.write_text("video,frame\nv,0\n")
        assert main(["eval", "--scores", str(scores), "--labels", str(labels_dir)]) == 2

    def test_single_class_labels(self, tmp_path):
        labels_dir = _write_labelled(tmp_path / "data", [0, 0, 0])
        scores = _write_scores(tmp_path / "scores.csv", [0.1, 0.2, 0.3])
        assert main(["eval", "--scores", str(scores), "--labels", str(labels_dir)]) == 2


class TestConfigErrors:
    def test_bad_override(self, tmp_path):
        assert main(["regions", "--data", str(tmp_path), "--out", str(tmp_path / "o"),
                     "--set", "resolution=12"]) == 2

    def test_override_without_value(self, tmp_path):
        assert main(["regions", "--data", str(tmp_path), "--out", str(tmp_path / "o"), "--set", "resolution"]) == 2

    def test_missing_data(self, tmp_path):
        assert main(["regions", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 2


class TestRegionsAndCluster:
    def test_regions(self, tmp_path):
        frames, _ = square_clip(n_frames=5)
        write_video(Video("sq", frames), tmp_path / "data" / "sq")
        out = tmp_path / "out"
        assert main(["regions", "--data", str(tmp_path / "data"), "--out", str(out), "--set", "clip_length=3"]) == 0

        lines = (out / "regions.csv").read_text().strip().splitlines()
        assert lines[0] == "video,frame,x0,y0,x1,y1" and len(lines) > 1
        assert {line.split(",")[1] for line in lines[1:]} <= {"2", "3", "4"}
        masks = list((out / "masks").glob("sq_frame_*_region_*.pgm"))
        assert len(masks) == len(lines) - 1

    def test_cluster(self, tiny_config, tmp_path):
        checkpoint = checkpoint_save(build_model(tiny_config), tmp_path / "model.strl")
        out = tmp_path / "cluster"
        assert main(["cluster", "--checkpoint", str(checkpoint), "--clusters", "2", "--out", str(out),
                     "--restarts", "2", "--scale", "1"]) == 0
        assert (out / "labels.pgm").exists()
        rows = (out / "cluster.csv").read_text().strip().splitlines()
        assert rows[0] == "cell,label,distance" and len(rows) == 1 + 4

        distances = np.array([float(row.split(",")[2]) for row in rows[1:]])
        shade = read_pixmap(out / "similarity.pgm")[:, :, 0].ravel().astype(float)
        expected = 255.0 * (1.0 - distances / distances.max()) if distances.max() > 0 else np.full(4, 255.0)
        np.testing.assert_allclose(shade, expected, atol=1.0)

    def test_cluster_count_too_large(self, tiny_config, tmp_path):
        checkpoint = checkpoint_save(build_model(tiny_config), tmp_path / "model.strl")
        assert main(["cluster", "--checkpoint", str(checkpoint), "--clusters", "9", "--out", str(tmp_path)]) == 2


class TestBench:
    def test_parameter_report(self, tmp_path, capsys):
        report = tmp_path / "bench.md"
        assert main(["bench", "--params", "--report", str(report)]) == 0
        assert "params.total=" in capsys.readouterr().out
        assert "| params.total |" in report.read_text()


class TestPipeline:
    """synth -> train -> detect on a tiny dataset."""

    @pytest.fixture
    def synth_dir(self, tmp_path):
        out = tmp_path / "synth"
        assert main(["synth", "--scenario", "region", "--videos", "2", "--frames", "10",
                     "--resolution", "16", "--seed", "3", "--out", str(out)]) == 0
        return out

    @pytest.fixture
    def checkpoint(self, synth_dir, config_file, tmp_path):
        path = tmp_path / "model.strl"
        assert main(["train", "--config", str(config_file), "--data", str(synth_dir / "train"),
                     "--out", str(path)]) == 0
        return path

    def test_synth_layout(self, synth_dir):
        for split in ("train", "test"):
            videos = sorted(p.name for p in (synth_dir / split).iterdir())
            assert videos == ["video_000", "video_001"]
        assert (synth_dir / "test" / "video_000" / "labels.csv").exists()
        assert len(list((synth_dir / "train" / "video_000").glob("frame_*.ppm"))) == 10

    def test_train_writes_loss_log(self, checkpoint):
        assert checkpoint.exists()
        assert checkpoint.with_name("model_loss.csv").exists()

    def test_detect_rows_and_determinism(self, synth_dir, checkpoint, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (first, second):
            assert main(["detect", "--checkpoint", str(checkpoint), "--data", str(synth_dir / "test"),
                         "--out", str(out)]) == 0
        rows = read_scores(first)
        assert len(rows) == 2 * (10 - 3)
        assert min(r['frame'] for r in rows) == 3
        assert first.read_bytes() == second.read_bytes()

    def test_detect_resolution_mismatch(self, checkpoint, tmp_path):
        out = tmp_path / "big"
        assert main(["synth", "--scenario", "region", "--videos", "1", "--frames", "6",
                     "--resolution", "24", "--out", str(out)]) == 0
        args = ["detect", "--checkpoint", str(checkpoint), "--data", str(out / "test"), "--out", str(tmp_path / "s.csv")]
        assert main(args) == 2
        assert main(args + ["--resize"]) == 0

    def test_resume(self, synth_dir, checkpoint, config_file, tmp_path):
        resumed = tmp_path / "resumed.strl"
        assert main(["train", "--config", str(config_file), "--data", str(synth_dir / "train"),
                     "--out", str(resumed), "--resume", str(checkpoint)]) == 0
        assert resumed.exists()

    def test_corrupt_checkpoint(self, synth_dir, checkpoint, tmp_path):
        data = bytearray(checkpoint.read_bytes())
        data[20] ^= 0x01
        checkpoint.write_bytes(bytes(data))
        assert main(["detect", "--checkpoint", str(checkpoint), "--data", str(synth_dir / "test"),
                     "--out", str(tmp_path / "s.csv")]) == 2
