"""Command-line entry point for the STRL anomaly detector."""

import argparse
import sys
from pathlib import Path

from strl.collectors.frames import load_frames, load_labels
from strl.collectors.synth import synth_generate
from strl.config import DEBUG_MODE, KMEANS_RESTARTS, SYNTH_SCENARIOS, load_config
from strl.generators.csv_generator import read_scores, write_cluster, write_regions, write_scores
from strl.generators.image_generator import write_label_image, write_mask_images, write_similarity_image
from strl.generators.report_generator import write_report
from strl.models.checkpoint import checkpoint_load
from strl.models.clustering import cluster_relation_map
from strl.models.relation import RELATION_MAP
from strl.processors.aggregator import aggregate_labels
from strl.processors.bench import run_bench
from strl.processors.detector import detect
from strl.processors.metrics import COMPONENTS, auc, component_auc
from strl.processors.regions import extract_regions
from strl.processors.trainer import train
from strl.utils.errors import ConfigError, ValidationError
from strl.utils.logger import setup_logger


def _parse_overrides(pairs):
    overrides = {}
    for pair in pairs or []:
        if '=' not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, value = (part.strip() for part in pair.split('=', 1))
        overrides[key] = value
    return overrides


def _config_from_args(args, **flags):
    """Config file, then --set pairs, then dedicated flags that were given."""
    overrides = _parse_overrides(getattr(args, 'set', None))
    overrides.update({key: value for key, value in flags.items() if value is not None})
    return load_config(getattr(args, 'config', None), overrides)


def cmd_synth(args, logger):
    splits = synth_generate(args.scenario, args.videos, args.frames, args.resolution, args.seed,
                            out_dir=args.out, workers=args.workers)
    anomalous = sum(int(v.labels.sum()) for v in splits['test'])
    logger.info(f"Wrote {len(splits['train'])} train and {len(splits['test'])} test videos "
                f"({anomalous} anomalous test frames) to {args.out}")


def cmd_train(args, logger):
    config = _config_from_args(args, epochs=args.epochs, seed=args.seed,
                               cache_masks=True if args.cache_masks else None)
    dataset = load_frames(args.data, config.resolution)

    state = None
    if args.resume:
        state = checkpoint_load(args.resume)
        if state.config.resolution != config.resolution or state.config.channels != config.channels:
            raise ValidationError(f"{args.resume}: architecture does not match the requested config")
        state.config = config
        state.optimizer.learning_rate = config.learning_rate

    out = Path(args.out)
    log_path = Path(args.log) if args.log else out.with_name(f"{out.stem}_loss.csv")
    _, logs = train(config, dataset, checkpoint_path=out, log_path=log_path, state=state, workers=args.workers)
    if logs:
        logger.info(f"Final epoch: L_ae={logs[-1].l_ae:.5f} L_rl={logs[-1].l_rl:.5f} L={logs[-1].l_total:.5f}")


def cmd_detect(args, logger):
    state = checkpoint_load(args.checkpoint)
    resolution = state.config.resolution if args.resize else None
    dataset = load_frames(args.data, resolution)
    series = detect(state, dataset, workers=args.workers)
    write_scores(args.out, series)
    logger.info(f"Scored {sum(len(s) for s in series)} frames of {len(series)} videos")


def cmd_eval(args, logger):
    rows = read_scores(args.scores)
    rows, labels = aggregate_labels(rows, load_labels(args.labels))

    if args.component == 'all':
        for name, value in component_auc(rows, labels).items():
            print(f"AUC[{name}]={value:.4f}")
        return

    if args.component == 'fused':
        value = auc([r['s'] for r in rows], labels)
    else:
        value = component_auc(rows, labels, (args.component,))[args.component]
    print(f"AUC={value:.4f}")


def cmd_regions(args, logger):
    config = _config_from_args(args, resolution=args.resolution)
    dataset = load_frames(args.data, config.resolution)
    k = config.clip_length

    out = Path(args.out)
    rows = []
    for video in dataset:
        for t in range(k - 1, len(video)):
            regions = extract_regions(video.frames[t - k + 1:t + 1])
            rows.extend((video.video_id, t, box) for box in regions.boxes)
            if not args.no_masks:
                write_mask_images(out / "masks", video.video_id, t, regions)
    write_regions(out / "regions.csv", rows)
    logger.info(f"Found {len(rows)} regions in {len(dataset)} videos")


def cmd_cluster(args, logger):
    state = checkpoint_load(args.checkpoint)
    relation_map = state.store[RELATION_MAP].data
    result = cluster_relation_map(relation_map, args.clusters, seed=args.seed, n_init=args.restarts)

    out = Path(args.out)
    write_label_image(out / "labels.pgm", result.labels, args.clusters, scale=args.scale)
    write_similarity_image(out / "similarity.pgm", result.distances, scale=args.scale)
    write_cluster(out / "cluster.csv", result)
    logger.info(f"Clustered {result.labels.size} relation cells into {args.clusters} groups "
                f"(inertia {result.inertia:.4f})")


def cmd_bench(args, logger):
    config = _config_from_args(args)
    chosen = args.params or args.regions or args.detect
    results = run_bench(config, params=args.params or not chosen, regions=args.regions or not chosen,
                        detect=args.detect or not chosen)
    for result in results:
        print(f"{result.name}={result.value:.2f} {result.unit}")
    if args.report:
        write_report(args.report, results)


def _add_config_args(parser):
    parser.add_argument('--config', help="key = value config file")
    parser.add_argument('--set', action='append', metavar='KEY=VALUE', help="override one config value")


def build_parser():
    parser = argparse.ArgumentParser(prog='strl', description="Spatio-temporal relation learning for video anomaly detection")
    parser.add_argument('--workers', type=int, default=4, help="threads for frame and region work")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('synth', help="generate a synthetic dataset")
    p.add_argument('--scenario', choices=SYNTH_SCENARIOS, required=True)
    p.add_argument('--videos', type=int, default=4)
    p.add_argument('--frames', type=int, default=60)
    p.add_argument('--resolution', type=int, default=64)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser('train', help="train on normal videos")
    _add_config_args(p)
    p.add_argument('--data', required=True)
    p.add_argument('--out', required=True, help="checkpoint path")
    p.add_argument('--log', help="per-epoch loss CSV (default: <out>_loss.csv)")
    p.add_argument('--epochs', type=int)
    p.add_argument('--seed', type=int)
    p.add_argument('--cache-masks', action='store_true')
    p.add_argument('--resume', help="continue from a checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('detect', help="score test videos")
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--data', required=True)
    p.add_argument('--out', required=True, help="scores CSV")
    p.add_argument('--resize', action='store_true', help="resize frames to the checkpoint resolution")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser('eval', help="frame-level AUC of a scores CSV")
    p.add_argument('--scores', required=True)
    p.add_argument('--labels', required=True, help="dataset directory with labels.csv per video")
    p.add_argument('--component', choices=COMPONENTS + ('all',), default='fused')
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('regions', help="extract moving-object rectangles")
    _add_config_args(p)
    p.add_argument('--data', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--resolution', type=int)
    p.add_argument('--no-masks', action='store_true', help="write the CSV only")
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser('cluster', help="k-means of the learned relation map")
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--clusters', type=int, required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--restarts', type=int, default=KMEANS_RESTARTS)
    p.add_argument('--scale', type=int, default=8, help="magnification of the label image")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser('bench', help="parameter count and throughput")
    _add_config_args(p)
    p.add_argument('--params', action='store_true')
    p.add_argument('--regions', action='store_true')
    p.add_argument('--detect', action='store_true')
    p.add_argument('--report', help="markdown report path")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    """
    Run one subcommand.

    Returns:
        int: 0 on success, 2 on invalid input, 1 on any other failure
    """
    args = build_parser().parse_args(argv)
    logger = setup_logger()

    logger.info("=" * 60)
    logger.info(f"STRL {args.command} - Starting")
    if DEBUG_MODE:
        logger.info("Debug logging enabled")
    logger.info("=" * 60)

    try:
        args.func(args, logger)
    except ValidationError as e:
        logger.error(f"Invalid input: {e}")
        return e.exit_code
    except Exception as e:
        logger.error(f"FATAL ERROR: {e}", exc_info=True)
        return 1

    logger.info(f"STRL {args.command} - Completed Successfully")
    return 0


if __name__ == '__main__':
    sys.exit(main())
