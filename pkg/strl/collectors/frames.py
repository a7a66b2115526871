"""Frame-sequence datasets on disk."""

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import cv2
import numpy as np

from strl.collectors.pixmap import read_pixmap, write_pixmap
from strl.config import RESOLUTION
from strl.utils.errors import FrameLoadError
from strl.utils.logger import setup_logger

logger = setup_logger(__name__)

FRAME_PATTERN = re.compile(r'^frame_(\d{6})\.(ppm|pgm)$')
LABELS_FILE = "labels.csv"


@dataclass
class Video:
    """One ordered frame sequence.

    ``frames`` is float32 (T, 3, H, W) in [-1, 1]; ``labels`` holds one
    0/1 entry per frame or is None.
    """

    video_id: str
    frames: np.ndarray
    labels: Optional[np.ndarray] = None

    def __len__(self):
        return self.frames.shape[0]

    @property
    def resolution(self):
        return self.frames.shape[2], self.frames.shape[3]


@dataclass
class VideoDataset:
    videos: List[Video] = field(default_factory=list)

    def __len__(self):
        return len(self.videos)

    def __iter__(self):
        return iter(self.videos)

    def __getitem__(self, video_id):
        for video in self.videos:
            if video.video_id == video_id:
                return video
        raise KeyError(video_id)


def pixels_to_unit(pixels):
    """Map uint8 [0, 255] to float32 [-1, 1]."""
    return (pixels.astype(np.float32) / np.float32(127.5)) - np.float32(1.0)


def unit_to_pixels(values):
    """Map [-1, 1] back to uint8 [0, 255]."""
    return np.clip(np.rint((np.asarray(values, dtype=np.float64) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def resize_frame(image, resolution):
    """
    Bilinear resize with corner-aligned sampling.

    Args:
        image: uint8 (H, W, C) image
        resolution: Target side length (square output)

    Returns:
        np.ndarray: uint8 (resolution, resolution, C)
    """
    h, w = image.shape[:2]
    if (h, w) == (resolution, resolution):
        return image

    xs = np.linspace(0, w - 1, resolution, dtype=np.float32) if resolution > 1 else np.zeros(1, np.float32)
    ys = np.linspace(0, h - 1, resolution, dtype=np.float32) if resolution > 1 else np.zeros(1, np.float32)
    map_x, map_y = np.meshgrid(xs, ys)
    return cv2.remap(image, map_x, map_y, interpolation=cv2.INTER_LINEAR, borderMode=cv2.BORDER_REPLICATE)


def _frame_files(video_dir):
    files = {}
    for path in Path(video_dir).iterdir():
        match = FRAME_PATTERN.match(path.name)
        if match:
            index = int(match.group(1))
            if index in files:
                raise FrameLoadError(f"{path}: duplicate frame number {index}")
            files[index] = path
    return files


def _read_labels(path, n_frames):
    labels = np.zeros(n_frames, dtype=np.int8)
    seen = set()
    try:
        with open(path, 'r', newline='', encoding='utf-8') as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ['frame', 'label']:
                raise FrameLoadError(f"{path}: expected header 'frame,label'")
            for row in reader:
                frame, label = int(row['frame']), int(row['label'])
                if label not in (0, 1) or not 0 <= frame < n_frames or frame in seen:
                    raise FrameLoadError(f"{path}: bad row {row}")
                labels[frame] = label
                seen.add(frame)
    except (ValueError, TypeError):
        raise FrameLoadError(f"{path}: malformed labels file") from None

    if len(seen) != n_frames:
        raise FrameLoadError(f"{path}: {len(seen)} labels for {n_frames} frames")
    return labels


def load_video(video_dir, resolution=RESOLUTION):
    """
    Load one directory of ``frame_%06d.ppm``/``.pgm`` files.

    Args:
        video_dir: Directory holding the frames and an optional labels.csv
        resolution: Working resolution frames are resized to; None keeps
            the native size (which must then be uniform)

    Returns:
        Video: Frames in [-1, 1] with labels when present
    """
    video_dir = Path(video_dir)
    files = _frame_files(video_dir)
    if not files:
        raise FrameLoadError(f"{video_dir}: no frame files found")

    expected = list(range(len(files)))
    if sorted(files) != expected:
        missing = sorted(set(range(max(files) + 1)) - set(files))
        raise FrameLoadError(f"{video_dir}: frame numbers are not contiguous from 0 (missing {missing[:5]})")

    frames = []
    for index in expected:
        image = read_pixmap(files[index])
        if resolution is not None:
            image = resize_frame(image, resolution)
        if frames and image.shape[:2] != frames[0].shape[1:]:
            raise FrameLoadError(f"{files[index]}: size {image.shape[:2]} differs from the first frame")
        frames.append(pixels_to_unit(image).transpose(2, 0, 1))

    labels = None
    labels_path = video_dir / LABELS_FILE
    if labels_path.exists():
        labels = _read_labels(labels_path, len(frames))

    logger.debug(f"Loaded {video_dir.name}: {len(frames)} frames")
    return Video(video_dir.name, np.stack(frames).astype(np.float32), labels)


def load_frames(path, resolution=RESOLUTION):
    """
    Load a dataset from disk.

    A directory that holds frame files directly is one video; otherwise each
    sub-directory holding frames is a video, in name order.

    Args:
        path: Dataset or video directory
        resolution: Working resolution (None keeps native frame sizes)

    Returns:
        VideoDataset
    """
    path = Path(path)
    if not path.is_dir():
        raise FrameLoadError(f"{path}: not a directory")

    if _frame_files(path):
        return VideoDataset([load_video(path, resolution)])

    videos = [load_video(sub, resolution) for sub in sorted(p for p in path.iterdir() if p.is_dir())
              if _frame_files(sub)]
    if not videos:
        raise FrameLoadError(f"{path}: no videos found")

    logger.info(f"Loaded {len(videos)} videos from {path}")
    return VideoDataset(videos)


def load_labels(path):
    """
    Read only the labels of a dataset (or single video) directory.

    Returns:
        dict: video_id -> int8 label array, for every video with labels.csv
    """
    path = Path(path)
    if not path.is_dir():
        raise FrameLoadError(f"{path}: not a directory")

    dirs = [path] if _frame_files(path) else sorted(p for p in path.iterdir() if p.is_dir())
    labels = {}
    for video_dir in dirs:
        labels_path = video_dir / LABELS_FILE
        if labels_path.exists():
            labels[video_dir.name] = _read_labels(labels_path, len(_frame_files(video_dir)))
    if not labels:
        raise FrameLoadError(f"{path}: no labels.csv found")
    return labels


def write_video(video, path, gray=False):
    """
    Write a video as numbered pixmaps plus labels.csv when labelled.

    Args:
        video: Video with frames in [-1, 1]
        path: Destination directory (created)
        gray: Write P5 files from the first channel instead of P6
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    for index, frame in enumerate(video.frames):
        pixels = unit_to_pixels(frame.transpose(1, 2, 0))
        if gray:
            write_pixmap(path / f"frame_{index:06d}.pgm", pixels[:, :, 0])
        else:
            write_pixmap(path / f"frame_{index:06d}.ppm", pixels)

    if video.labels is not None:
        with open(path / LABELS_FILE, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(['frame', 'label'])
            for index, label in enumerate(video.labels):
                writer.writerow([index, int(label)])
