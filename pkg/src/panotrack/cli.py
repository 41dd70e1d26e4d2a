"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import RunConfig, load_config
from .core import InvariantError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("panotrack")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_occlusion(text: str):
    try:
        target, start, gap = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected TARGET:START:GAP, got {text!r}") from None
    return target, start, gap


def cmd_track(args) -> int:
    from .io import write_tracks
    from .pipeline import run_from_config

    cfg = load_config(args.config)
    if args.data:
        data = Path(args.data)
        cfg.set("paths", "detections", str((data / "detections.txt").resolve()))
        cfg.set("paths", "clouds", str((data / "clouds").resolve()))
        cfg.set("paths", "calibration", str((data / "calib.txt").resolve()))
    if args.output:
        cfg.set("paths", "output", str(Path(args.output).resolve()))
    tracks = run_from_config(cfg)
    out = cfg.path("output")
    write_tracks(out, tracks)
    log.info("wrote %d boxes for %d ids to %s", len(tracks), len({t.id for t in tracks}), out)
    return EXIT_OK


def cmd_eval(args) -> int:
    from .evaluation import evaluate
    from .io import read_tracks

    cfg = load_config(args.config)
    width = args.width if args.width is not None else cfg["scene"]["pano_width"]
    iou = args.iou if args.iou is not None else cfg["eval"]["iou_match"]
    gt_path = args.gt or cfg.path("gt")
    hyp_path = args.hyp or cfg.path("output")
    if gt_path is None or hyp_path is None:
        raise UsageError("both --gt and --hyp are required")
    gt = read_tracks(gt_path, width)
    hyp = read_tracks(hyp_path, width)
    res = evaluate(gt, hyp, iou)
    print(f"{'MOTA':>8} {'MOTAx100':>9} {'IDS':>6} {'FP':>6} {'FN':>6} {'GT':>7}")
    print(f"{res.mota:8.4f} {100 * res.mota:9.2f} {res.ids:6d} {res.fp:6d} {res.fn:6d} {res.gt_count:7d}")
    return EXIT_OK


def cmd_gen(args) -> int:
    from .fusion import save_calibration
    from .io import save_detections, save_pointcloud, write_tracks
    from .synthetic import ScenarioSpec, generate

    cfg = load_config(args.config)
    spec = ScenarioSpec(
        pano_width=cfg["scene"]["pano_width"], pano_height=cfg["scene"]["pano_height"],
        embedding_dim=cfg["scene"]["embedding_dim"],
        n_targets=args.targets, n_frames=args.frames, seed=args.seed,
        occlusions=tuple(args.occlude or ()), box_jitter=args.jitter,
        embedding_noise=args.emb_noise, drop_prob=args.drop, clutter_rate=args.clutter,
        background_points=args.background,
        n_slices=cfg["slices"]["n_slices"] if args.slices else 0,
        slice_overlap=cfg["slices"]["overlap"],
    )
    scenario = generate(spec)
    out = Path(args.out)
    (out / "clouds").mkdir(parents=True, exist_ok=True)
    save_detections(out / "detections.txt", scenario.detections)
    save_calibration(out / "calib.txt", scenario.calibration)
    for t, cloud in scenario.clouds.items():
        save_pointcloud(out / "clouds" / f"{t:06d}.bin", cloud)
    gt = scenario.ground_truth
    write_tracks(out / "gt.txt", [(t, i, b) for t in sorted(gt.frames) for i, b in gt.frames[t]])
    run = RunConfig(values={s: dict(v) for s, v in cfg.values.items()})
    run.set("paths", "detections", "detections.txt")
    run.set("paths", "clouds", "clouds")
    run.set("paths", "calibration", "calib.txt")
    run.set("paths", "gt", "gt.txt")
    run.set("paths", "output", "tracks.txt")
    # unsliced detections are already one per target
    run.set("merge", "mode", cfg["merge"]["mode"] if args.slices else "off")
    run.save(out / "run.ini")
    log.info("wrote %d frames of %d targets to %s", spec.n_frames, spec.n_targets, out)
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plot import plot_tracks
    from .io import read_tracks

    cfg = load_config(args.config)
    width = args.width if args.width is not None else cfg["scene"]["pano_width"]
    height = args.height if args.height is not None else cfg["scene"]["pano_height"]
    tracks = read_tracks(args.tracks, width)
    plot_tracks(tracks, width, height, args.output)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_all

    failed = 0
    for name, ok, detail in run_all():
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failed += not ok
    return EXIT_INTERNAL if failed else EXIT_OK


def cmd_config(args) -> int:
    sys.stdout.write(load_config(args.config).dumps())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="panotrack", description="Multi-object tracking on 360 degree panoramas.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("track", help="run the tracker over a sequence")
    s.add_argument("--config", help="run config (INI); defaults to $PANOTRACK_CONFIG")
    s.add_argument("--data", help="dataset directory as written by `gen`")
    s.add_argument("-o", "--output", help="output tracks file")
    s.set_defaults(func=cmd_track)

    s = sub.add_parser("eval", help="score tracks against ground truth")
    s.add_argument("--config")
    s.add_argument("--gt")
    s.add_argument("--hyp")
    s.add_argument("--width", type=float, help="panorama width (default from config)")
    s.add_argument("--iou", type=float, help="match threshold (default from config)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gen", help="write a synthetic dataset")
    s.add_argument("out")
    s.add_argument("--config")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--targets", type=int, default=10)
    s.add_argument("--frames", type=int, default=300)
    s.add_argument("--occlude", type=_parse_occlusion, action="append", metavar="TARGET:START:GAP")
    s.add_argument("--jitter", type=float, default=0.0, help="box jitter sigma in pixels")
    s.add_argument("--emb-noise", type=float, default=0.0)
    s.add_argument("--drop", type=float, default=0.0, help="detection drop probability")
    s.add_argument("--clutter", type=float, default=0.0, help="mean false detections per frame")
    s.add_argument("--background", type=int, default=0, help="background points per frame")
    s.add_argument("--slices", action="store_true",
                   help="emit one copy of each detection per slice that contains it")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("plot", help="draw trajectories over the panorama")
    s.add_argument("tracks")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--config")
    s.add_argument("--width", type=float)
    s.add_argument("--height", type=float)
    s.set_defaults(func=cmd_plot)

    s = sub.add_parser("selftest", help="run the brute-force oracle checks")
    s.set_defaults(func=cmd_selftest)

    s = sub.add_parser("config", help="print the effective config with documented defaults")
    s.add_argument("--config")
    s.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"panotrack: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantError as exc:
        print(f"panotrack: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ValueError, KeyError, OSError) as exc:
        print(f"panotrack: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
