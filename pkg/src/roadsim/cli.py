"""Command-line entry point.

    roadsim render   --scene scene.yaml --out out.wav [--ground-truth gt.jsonl]
    roadsim dataset  --spec dataset.yaml --out-dir data/ [--jobs N] [--dry-run]
    roadsim localize --in rec.wav --array array.yaml --grid-step 5 --out doa.jsonl
    roadsim profile  --scene scene.yaml --frames 50 --out report.json

Exit status is 0 on success, 2 on a usage error and 1 on any runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import ArrayConfig, DatasetConfig, SceneConfig, load_config
from .datagen import generate_dataset
from .errors import RoadSimError
from .localization import DoaGrid, localize
from .profiling import profile_pipeline
from .renderer import render, render_ground_truth
from .wavio import wav_read, wav_write

log = logging.getLogger("roadsim")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_jsonl(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, default=_jsonable, sort_keys=True) + "\n")


def _scene(args):
    cfg = load_config(SceneConfig, args.scene)
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    return cfg.to_scene(Path(args.scene).parent)


def cmd_render(args) -> None:
    scene = _scene(args)
    out = render(scene)
    wav_write(args.out, out.channels, scene.fs, args.encoding)
    log.info("wrote %s (%d channels, %.3f s)", args.out, out.channels.shape[0], scene.duration)
    if args.ground_truth:
        hop = args.hop or int(round(0.1 * scene.fs))
        frames = render_ground_truth(scene, hop)
        _write_jsonl(Path(args.ground_truth), (asdict(f) for f in frames))


def cmd_dataset(args) -> None:
    cfg = load_config(DatasetConfig, args.spec)
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    if args.count is not None:
        cfg = cfg.model_copy(update={"count": args.count})
    spec = cfg.to_spec(Path(args.spec).parent)
    records = generate_dataset(spec, args.out_dir, jobs=args.jobs, debug=args.debug,
                               dry_run=args.dry_run)
    log.info("generated %d items in %s", len(records), args.out_dir)


def cmd_localize(args) -> None:
    array = load_config(ArrayConfig, args.array)
    channels, fs = wav_read(args.input)
    mics = np.array(array.microphones)
    if channels.shape[0] != len(mics):
        raise RoadSimError(f"{args.input} has {channels.shape[0]} channels but the array "
                           f"config lists {len(mics)} microphones")
    if args.hemisphere:
        grid = DoaGrid.hemisphere(args.grid_step)
    else:
        grid = DoaGrid.ring(args.grid_step)
    estimates = localize(channels, fs, mics, grid, array.c, window=args.window, hop=args.hop,
                         method=args.method)
    _write_jsonl(Path(args.out), (asdict(e) for e in estimates))
    log.info("wrote %d DOA records to %s", len(estimates), args.out)


def cmd_profile(args) -> None:
    scene = _scene(args)
    grid = DoaGrid.fibonacci(args.directions) if args.directions else None
    report = profile_pipeline(scene, args.frames, grid=grid, window=args.window)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json() + "\n", encoding="utf-8")
    log.info("fast SRP %.3f ms/frame, direct SRP %.3f ms/frame",
             report.fast_srp.mean_ms, report.direct_srp.mean_ms)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roadsim", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a scene to a multichannel WAV")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ground-truth")
    p.add_argument("--hop", type=_positive_int, help="ground-truth hop in samples (default 0.1 s)")
    p.add_argument("--encoding", choices=("float32", "pcm16"), default="float32")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("dataset", help="generate a labeled dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--count", type=int, help="override the item count")
    p.add_argument("--dry-run", action="store_true", help="write the manifest only")
    p.add_argument("--debug", action="store_true", help="also write event and noise stems")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("localize", help="frame-wise DOA estimation on a recording")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--array", required=True)
    p.add_argument("--grid-step", type=_positive_float, default=5.0)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=_positive_int, default=512)
    p.add_argument("--hop", type=_positive_int)
    p.add_argument("--method", choices=("phat", "direct"), default="phat")
    p.add_argument("--hemisphere", action="store_true",
                   help="search azimuth and elevation instead of the horizontal ring")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("profile", help="per-stage latency report")
    p.add_argument("--scene", required=True)
    p.add_argument("--frames", type=_positive_int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--directions", type=_positive_int,
                   help="use a Fibonacci grid with this many directions")
    p.add_argument("--window", type=_positive_int, default=512)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_profile)
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage to stderr
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except (RoadSimError, OSError, ValueError) as exc:
        print(f"roadsim {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_cli())
