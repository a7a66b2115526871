"""Synthetic surveillance scenes with scripted anomalies.

Normal videos show one or two textured bright squares wandering at 1 px/frame
inside the left ("allowed") half of a static textured background. Test
videos add one anomalous segment:

- speed:  a square moves at 4 px/frame
- region: an extra square steps across the centre line into the right
          ("forbidden") half; frames count as anomalous once its centre is
          past the line
- shape:  a bright triangle wanders through the allowed half
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from strl.collectors.frames import Video, VideoDataset, pixels_to_unit, write_video
from strl.config import SYNTH_SCENARIOS
from strl.utils.errors import ValidationError
from strl.utils.logger import setup_logger

logger = setup_logger(__name__)

OBJECT_COLOR = np.array([1.0, 0.85, 0.55], dtype=np.float32)
FAST_SPEED = 4
SPLITS = {'train': 0, 'test': 1}


@dataclass
class Mover:
    """One scripted object; (x, y) is the top-left corner in pixels."""

    kind: str
    x: int
    y: int
    vx: int
    vy: int
    size: int
    box: tuple
    anomalous: bool = False

    def step(self, speed=1):
        x_min, x_max, y_min, y_max = self.box
        self.x, self.vx = _bounce(self.x + self.vx * speed, self.vx, x_min, x_max)
        self.y, self.vy = _bounce(self.y + self.vy * speed, self.vy, y_min, y_max)

    @property
    def centroid(self):
        return self.x + self.size / 2.0, self.y + self.size / 2.0


def _bounce(pos, velocity, lo, hi):
    if pos < lo:
        return 2 * lo - pos, -velocity
    if pos > hi:
        return 2 * hi - pos, -velocity
    return pos, velocity


def object_size(resolution):
    return resolution // 4


def allowed_box(resolution):
    size = object_size(resolution)
    return 0, resolution // 2 - size, 0, resolution - size


def entry_box(resolution):
    """Box of a square that starts on the centre line and walks into the forbidden half."""
    size = object_size(resolution)
    return resolution // 2 - size // 2, resolution - size, 0, resolution - size


def texture(size):
    """Checkerboard of 2-px cells so motion is visible inside the object."""
    yy, xx = np.mgrid[0:size, 0:size]
    return np.where(((yy // 2) + (xx // 2)) % 2 == 0, 1.0, 0.7).astype(np.float32)


def background(resolution, rng):
    noise = rng.standard_normal((resolution, resolution)).astype(np.float32)
    smooth = cv2.GaussianBlur(noise, (0, 0), sigmaX=resolution / 16.0, borderType=cv2.BORDER_REFLECT)
    smooth = (smooth - smooth.min()) / max(float(smooth.max() - smooth.min()), 1e-6)
    gray = 0.1 + 0.25 * smooth
    tint = np.array([0.9, 1.0, 1.1], dtype=np.float32)
    return np.clip(gray[:, :, None] * tint[None, None, :], 0.0, 1.0)


def _draw(canvas, mover):
    size = mover.size
    patch = texture(size)
    if mover.kind == 'triangle':
        yy, xx = np.mgrid[0:size, 0:size]
        shape_mask = yy >= xx
    else:
        shape_mask = np.ones((size, size), dtype=bool)

    region = canvas[mover.y:mover.y + size, mover.x:mover.x + size]
    colored = patch[:, :, None] * OBJECT_COLOR[None, None, :]
    region[shape_mask] = colored[shape_mask]


def _random_mover(kind, box, size, rng):
    x_min, x_max, y_min, y_max = box
    vx = int(rng.choice([-1, 1]))
    vy = int(rng.choice([-1, 0, 1]))
    return Mover(kind, int(rng.integers(x_min, x_max + 1)), int(rng.integers(y_min, y_max + 1)),
                 vx, vy, size, box)


def _entering_mover(resolution, size, rng):
    box = entry_box(resolution)
    y = int(rng.integers(box[2], box[3] + 1))
    return Mover('square', box[0], y, 1, int(rng.choice([-1, 0, 1])), size, box)


def anomaly_window(n_frames):
    return n_frames // 3, 2 * n_frames // 3


def render_video(scenario, anomalous, n_frames, resolution, rng):
    """
    Render one video.

    Args:
        scenario: speed | region | shape
        anomalous: Whether to script the scenario's anomalous segment
        n_frames: Number of frames
        resolution: Square side length, multiple of 8
        rng: numpy Generator

    Returns:
        tuple: (uint8 frames (T, H, W, 3), labels (T,), tracks) where tracks
        lists, per frame, the Movers drawn in that frame as
        (kind, x, y, size, anomalous) tuples
    """
    size = object_size(resolution)
    scene = background(resolution, rng)
    movers = [_random_mover('square', allowed_box(resolution), size, rng)
              for _ in range(int(rng.integers(1, 3)))]

    a0, a1 = anomaly_window(n_frames)
    extra = None
    if anomalous and scenario == 'region':
        extra = _entering_mover(resolution, size, rng)
    elif anomalous and scenario == 'shape':
        extra = _random_mover('triangle', allowed_box(resolution), size, rng)
    if extra is not None:
        extra.anomalous = scenario == 'shape'

    frames = np.empty((n_frames, resolution, resolution, 3), dtype=np.uint8)
    labels = np.zeros(n_frames, dtype=np.int8)
    tracks = []

    for f in range(n_frames):
        in_window = anomalous and a0 <= f < a1
        if f > 0:
            for i, mover in enumerate(movers):
                fast = in_window and scenario == 'speed' and i == 0
                mover.step(FAST_SPEED if fast else 1)
                mover.anomalous = fast
            if extra is not None and a0 < f < a1:
                extra.step(1)
                if scenario == 'region':
                    extra.anomalous = extra.centroid[0] > resolution / 2

        visible = list(movers)
        if extra is not None and in_window:
            visible.append(extra)

        canvas = scene.copy()
        for mover in visible:
            _draw(canvas, mover)

        frames[f] = np.clip(np.rint(canvas * 255.0), 0, 255).astype(np.uint8)
        labels[f] = int(any(m.anomalous for m in visible))
        tracks.append([(m.kind, m.x, m.y, m.size, m.anomalous) for m in visible])

    return frames, labels, tracks


def _build_video(scenario, split, index, n_frames, resolution, seed):
    rng = np.random.default_rng([seed, SPLITS[split], index])
    frames, labels, _ = render_video(scenario, split == 'test', n_frames, resolution, rng)
    unit = pixels_to_unit(frames).transpose(0, 3, 1, 2)
    return Video(f"video_{index:03d}", np.ascontiguousarray(unit), labels)


def synth_generate(scenario, n_videos, frames_per_video, resolution, seed, out_dir=None, workers=4):
    """
    Generate a train split (normal only) and a labelled test split.

    Args:
        scenario: speed | region | shape
        n_videos: Videos per split
        frames_per_video: Frames per video
        resolution: Side length, multiple of 8
        seed: Seed; identical seeds give byte-identical output
        out_dir: When given, write ``<out_dir>/{train,test}/video_XXX``
        workers: Thread count for rendering/writing

    Returns:
        dict: {'train': VideoDataset, 'test': VideoDataset}
    """
    if scenario not in SYNTH_SCENARIOS:
        raise ValidationError(f"unknown scenario {scenario!r}; expected one of {SYNTH_SCENARIOS}")
    if resolution <= 0 or resolution % 8 != 0:
        raise ValidationError(f"resolution must be a positive multiple of 8, got {resolution}")
    if n_videos < 1 or frames_per_video < 3:
        raise ValidationError("need at least one video of at least 3 frames")

    logger.info(f"Generating '{scenario}' scenario: {n_videos} videos x {frames_per_video} frames "
                f"at {resolution}x{resolution} (seed {seed})")

    splits = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for split in SPLITS:
            jobs = [pool.submit(_build_video, scenario, split, i, frames_per_video, resolution, seed)
                    for i in range(n_videos)]
            splits[split] = VideoDataset([job.result() for job in jobs])

        if out_dir is not None:
            writes = [pool.submit(write_video, video, Path(out_dir) / split / video.video_id)
                      for split, dataset in splits.items() for video in dataset]
            for job in writes:
                job.result()
            logger.info(f"Synthetic dataset written to {out_dir}")

    return splits
