"""Command-line interface.

Subcommands: features, split, train, segment, eval, synth, serve.
Exit codes: 0 success, 1 validation/configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from choreoseg import audio, labels, segnet, skeleton
from choreoseg.errors import ChoreosegError, ConfigError, FormatError, OnsetNotFound, ShapeError
from choreoseg.pipeline import data as dataio
from choreoseg.pipeline import evaluation, features, peaks, synth
from choreoseg.pipeline import training as trainmod

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


def _load_config(path):
    """JSON config: {"model": {...}, "train": {...}}; both sections optional."""
    if path is None:
        return segnet.ModelConfig(), trainmod.TrainHyper()
    with open(path) as fh:
        raw = json.load(fh)
    try:
        cfg = segnet.ModelConfig(**raw.get("model", {}))
        hyper = trainmod.TrainHyper(**raw.get("train", {}))
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg, hyper


def cmd_features(args) -> int:
    topo = skeleton.load_topology(args.topology) if args.topology else None
    feats = features.extract_features(args.keypoints, args.audio, args.fps, topology=topo)
    bones_name, spec_name = features.write_feature_cache(args.out, args.video_id, feats)
    print(json.dumps({
        "video_id": args.video_id,
        "bones": bones_name,
        "spectrogram": spec_name,
        "total_frames": feats.total_frames,
        "onset_c0": feats.onset_c0,
    }))
    return EXIT_OK


def cmd_split(args) -> int:
    index = dataio.load_index(args.index, check_files=False)
    divisions = dataio.split_dataset(index, seed=args.seed, n_divisions=args.divisions)
    dataio.save_divisions(args.out, divisions)
    sizes = [(len(d.train), len(d.val), len(d.test)) for d in divisions]
    print(json.dumps({"divisions": len(divisions), "sizes": sizes}))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg, hyper = _load_config(args.config)
    if args.seed is not None:
        hyper.seed = args.seed
        hyper.dropout_seed = args.seed + 1
    index = dataio.load_index(args.index)
    division = dataio.load_divisions(args.divisions)[args.division]
    train_items = dataio.load_items(index, division.train)
    val_items = dataio.load_items(index, division.val)
    params = segnet.init_params(cfg, seed=args.init_seed)
    log = (lambda h: print(json.dumps(h), file=sys.stderr)) if args.verbose else None
    result = trainmod.train(params, cfg, train_items, val_items, hyper, log=log)
    segnet.save_model(args.out, result.params, cfg)
    print(json.dumps({
        "best_val_loss": result.best_val_loss,
        "best_epoch": result.best_epoch,
        "epochs_run": result.epochs_run,
        "model": str(args.out),
    }))
    return EXIT_OK


def cmd_segment(args) -> int:
    params, cfg, _ = segnet.load_model(args.model)
    bones = np.load(args.bones).astype(np.float32)
    spec = audio.load_spectrogram_cache(args.spectrogram)
    slices = audio.slices_for_video(spec, bones.shape[0], args.fps).astype(np.float32)
    p = segnet.forward_full(bones, slices, params, cfg, training=False)
    found = peaks.pick_peaks(p, args.threshold, args.window)
    found = peaks.enforce_min_distance(found, p, args.min_distance)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    with open(f"{prefix}.prob.csv", "w") as fh:
        fh.write("frame,probability\n")
        for t, v in enumerate(p):
            fh.write(f"{t},{v:.9g}\n")
    with open(f"{prefix}.peaks.json", "w") as fh:
        json.dump({
            "peaks": found,
            "threshold_used": args.threshold,
            "window_used": args.window,
            "min_distance_used": args.min_distance,
        }, fh)
    print(json.dumps({"frames": len(p), "peaks": found}))
    return EXIT_OK


def cmd_eval(args) -> int:
    params, cfg, _ = segnet.load_model(args.model)
    index = dataio.load_index(args.index)
    division = dataio.load_divisions(args.divisions)[args.division]
    items = dataio.load_items(index, getattr(division, args.part))
    report = evaluation.run_eval(params, cfg, items, h=args.threshold, w=args.window)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def cmd_synth(args) -> int:
    videos = synth.synth_dataset(seed=args.seed, n_videos=args.videos,
                                 total_frames=args.frames, fps=args.fps,
                                 tempo_bpm=args.tempo)
    index_path = synth.write_synth_dataset(videos, args.out)
    print(json.dumps({"index": str(index_path), "videos": len(videos)}))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from choreoseg import service

    app = service.create_app(data_dir=args.data, model_path=args.model)
    host, _, port = args.addr.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="choreoseg",
                                     description="Dance video segmentation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="keypoints + wav -> cached feature files")
    p.add_argument("--keypoints", required=True)
    p.add_argument("--audio", required=True)
    p.add_argument("--fps", type=float, required=True)
    p.add_argument("--video-id", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--topology", default=None, help="JSON list of 67 [parent, child] pairs")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("split", help="stratified train/val/test divisions")
    p.add_argument("--index", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--divisions", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the segmentation network")
    p.add_argument("--index", required=True)
    p.add_argument("--divisions", required=True)
    p.add_argument("--division", type=int, default=0)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--init-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("segment", help="features -> probability CSV + peak JSON")
    p.add_argument("--model", required=True)
    p.add_argument("--bones", required=True)
    p.add_argument("--spectrogram", required=True)
    p.add_argument("--fps", type=float, required=True)
    p.add_argument("--threshold", type=float, default=0.3)
    p.add_argument("--window", type=float, default=20)
    p.add_argument("--min-distance", type=float, default=0)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="precision/recall/F over a division part")
    p.add_argument("--model", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--divisions", required=True)
    p.add_argument("--division", type=int, default=0)
    p.add_argument("--part", choices=("train", "val", "test"), default="test")
    p.add_argument("--threshold", type=float, default=0.3)
    p.add_argument("--window", type=float, default=20)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--videos", type=int, default=40)
    p.add_argument("--frames", type=int, default=1200)
    p.add_argument("--fps", type=float, default=60.0)
    p.add_argument("--tempo", type=float, default=120.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("serve", help="run the HTTP inference/annotation service")
    p.add_argument("--addr", default=None, help="host:port (default env CHOREOSEG_ADDR or 127.0.0.1:8472)")
    p.add_argument("--model", default=None, help="checkpoint path (default env CHOREOSEG_MODEL)")
    p.add_argument("--data", default=None, help="data directory (default env CHOREOSEG_DATA)")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    import os

    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "serve":
        args.addr = args.addr or os.environ.get("CHOREOSEG_ADDR", "127.0.0.1:8472")
        args.model = args.model or os.environ.get("CHOREOSEG_MODEL")
        args.data = args.data or os.environ.get("CHOREOSEG_DATA", "choreoseg-data")
    try:
        return args.func(args)
    except (ConfigError, FormatError, ShapeError, OnsetNotFound, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ChoreosegError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"unexpected error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
