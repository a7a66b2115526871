"""Model size and throughput measurements."""

import time
from dataclasses import dataclass, replace

import cv2

from strl.collectors.synth import synth_generate
from strl.models.state import build_model
from strl.models.stae import count_parameters
from strl.processors.detector import detect_video
from strl.processors.regions import extract_regions
from strl.utils.logger import setup_logger

logger = setup_logger(__name__)

PARAMS_RESOLUTION = 256
PARAMS_BUDGET = 300_000
REGIONS_RESOLUTION = 256
REGIONS_CLIP_LENGTH = 5
DETECT_RESOLUTION = 64
DETECT_FPS_FLOOR = 30.0


@dataclass
class BenchResult:
    name: str
    value: float
    unit: str
    target: str = ""


def bench_params(config):
    """
    Learnable parameters at 256x256, split by component.

    Returns:
        list: BenchResult rows (encoder, decoders, relation, total)
    """
    state = build_model(replace(config, resolution=PARAMS_RESOLUTION))
    store = state.store
    rows = [BenchResult(f"params.{prefix}", count_parameters(store, prefix), "params")
            for prefix in ("encoder", "appearance", "motion", "relation")]
    total = count_parameters(store)
    rows.append(BenchResult("params.total", total, "params", f"<= {PARAMS_BUDGET}"))
    logger.info(f"Parameter count at {PARAMS_RESOLUTION}x{PARAMS_RESOLUTION}: {total}")
    return rows


def bench_regions(config, repeats=20):
    """Single-thread region extraction time on 5-frame 256x256 clips."""
    video = synth_generate('speed', 1, REGIONS_CLIP_LENGTH + repeats, REGIONS_RESOLUTION, config.seed,
                           workers=1)['test'].videos[0]
    clips = [video.frames[i:i + REGIONS_CLIP_LENGTH] for i in range(repeats)]

    threads = cv2.getNumThreads()
    cv2.setNumThreads(1)
    try:
        extract_regions(clips[0])
        start = time.perf_counter()
        for clip in clips:
            extract_regions(clip)
        elapsed = time.perf_counter() - start
    finally:
        cv2.setNumThreads(threads)

    ms = 1000.0 * elapsed / len(clips)
    logger.info(f"Region extraction: {ms:.2f} ms/clip")
    return [BenchResult("regions.ms_per_clip", ms, "ms", "< 10")]


def bench_detect(config, n_frames=64):
    """Inference frames per second at 64x64 (untrained weights)."""
    bench_config = replace(config, resolution=DETECT_RESOLUTION)
    state = build_model(bench_config)
    video = synth_generate('speed', 1, n_frames, DETECT_RESOLUTION, config.seed, workers=1)['test'].videos[0]

    start = time.perf_counter()
    series = detect_video(state, video)
    elapsed = time.perf_counter() - start

    fps = len(series) / elapsed if elapsed > 0 else float('inf')
    if fps < DETECT_FPS_FLOOR:
        logger.warning(f"Detection throughput {fps:.1f} FPS is below the {DETECT_FPS_FLOOR:.0f} FPS floor")
    logger.info(f"Detection: {fps:.1f} FPS over {len(series)} frames")
    return [BenchResult("detect.fps", fps, "fps", f">= {DETECT_FPS_FLOOR:.0f}")]


def run_bench(config, params=True, regions=True, detect=True):
    results = []
    if params:
        results.extend(bench_params(config))
    if regions:
        results.extend(bench_regions(config))
    if detect:
        results.extend(bench_detect(config))
    return results