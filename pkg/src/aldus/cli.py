"""Command-line entry point: ``aldus simulate|inject|sweep|bench``.

Exit codes: 0 success, 1 configuration or input error, 2 I/O error,
3 sink or stream error. Diagnostics go to stderr; stdout carries data only
for ``--out -``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .config import ConfigError, load_config
from .formats import CSV_HEADER, FormatError, csv_rows, read_csv, write_pcd
from .inject import InjectError, inject_frames
from .metrics import SWEEP_PARAMS, sweep, sweep_csv
from .sim import SinkError, run_scenario, simulate_frame
from .stream import StreamSink, parse_address

log = logging.getLogger("aldus")

EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_SINK = 3


class CsvSink:
    def __init__(self, fh):
        self.fh = fh
        self.fh.write(CSV_HEADER + "\n")

    def write(self, frame) -> None:
        for row in csv_rows(frame):
            self.fh.write(row + "\n")

    def close(self) -> None:
        self.fh.flush()


class PcdSink:
    """Single frame -> ``path``; several frames -> ``<stem>_<frame>.pcd``."""

    def __init__(self, out: str, frames: int):
        self.out = out
        self.frames = frames

    def write(self, frame) -> None:
        text = write_pcd(frame)
        if self.out == "-":
            sys.stdout.write(text)
            return
        path = Path(self.out)
        if self.frames > 1:
            path = path.with_name(f"{path.stem}_{frame.frame_id:04d}{path.suffix or '.pcd'}")
        path.write_text(text)

    def close(self) -> None:
        pass


class NullSink:
    def write(self, frame) -> None:
        pass

    def close(self) -> None:
        pass


def _open_text(out: str):
    return sys.stdout if out == "-" else open(out, "w", encoding="utf-8", newline="")


def _load(args):
    cfg = load_config(args.config)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "frames", None) is not None:
        if args.frames < 1:
            raise ConfigError("--frames must be >= 1")
        changes["frames"] = args.frames
    return cfg.evolve(**changes) if changes else cfg


def cmd_simulate(args) -> int:
    cfg = _load(args)
    fmt = args.format or cfg.output.format
    out = args.out or cfg.output.path
    if fmt == "csv":
        fh = _open_text(out)
        sink = CsvSink(fh)
    elif fmt == "pcd":
        sink = PcdSink(out, cfg.frames)
    else:
        try:
            parse_address(out)
        except ValueError as exc:
            raise ConfigError(f"--out: {exc}") from None
        log.info("waiting for a stream client on %s", out)
        sink = StreamSink(out)
    try:
        summary = run_scenario(cfg, sink, args.threads)
    finally:
        sink.close()
        if fmt == "csv" and out != "-":
            fh.close()
    if args.figure:
        from .plotting import plot_frame

        plot_frame(simulate_frame(cfg, 0, args.threads), args.figure, cfg.sensor.max_range)
    print(summary, file=sys.stderr)
    return 0


def cmd_inject(args) -> int:
    cfg = _load(args)
    with open(args.inp, encoding="utf-8") as fh:
        points = read_csv(fh.read())
    frames, report = inject_frames(points, cfg.clouds, cfg.sensor, cfg.seed, cfg.pose)
    fh = _open_text(args.out)
    try:
        fh.write(CSV_HEADER + "\n")
        for frame in frames:
            for row in csv_rows(frame):
                fh.write(row + "\n")
    finally:
        if args.out != "-":
            fh.close()
    print(report, file=sys.stderr)
    return 0


def _parse_values(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values must be a comma-separated list of numbers, got {text!r}") from None
    if not values:
        raise ConfigError("--values must not be empty")
    return values


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if args.param not in SWEEP_PARAMS:
        raise ConfigError(f"--param {args.param!r} is not sweepable; choose from {list(SWEEP_PARAMS)}")
    if args.replicates < 1:
        raise ConfigError("--replicates must be >= 1")
    rows = sweep(cfg, args.param, _parse_values(args.values), args.replicates, args.threads)
    fh = _open_text(args.out)
    try:
        fh.write(sweep_csv(rows))
    finally:
        if args.out != "-":
            fh.close()
    if args.figure:
        from .plotting import plot_sweep

        plot_sweep(rows, args.figure, {o.id: o.label or f"object {o.id}" for o in cfg.scene})
    return 0


def cmd_bench(args) -> int:
    cfg = _load(args)
    summary = run_scenario(cfg, NullSink(), args.threads)
    print(f"sensor={cfg.sensor.name} rays/frame={cfg.sensor.beam_count} {summary}", file=sys.stderr)
    print(f"frames_per_s={summary.frames_per_s:.2f}")
    print(f"rays_per_s={summary.rays_per_s:.0f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aldus", description="LIDAR simulation with airborne dust clouds")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, frames=True):
        sp.add_argument("--config", required=True, help="scenario YAML file")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        if frames:
            sp.add_argument("--frames", type=int, help="override the frame count")
        sp.add_argument("--threads", type=int, default=None, help="worker threads, 0 = auto (env ALDUS_THREADS)")

    sp = sub.add_parser("simulate", help="simulate frames to csv, pcd or a stream")
    common(sp)
    sp.add_argument("--format", choices=("csv", "pcd", "stream"))
    sp.add_argument("--out", help="output path, '-' for stdout, or host:port for stream")
    sp.add_argument("--figure", help="also render a bird's-eye view of frame 0 to this image")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("inject", help="inject dust into a recorded CSV point cloud")
    common(sp, frames=False)
    sp.add_argument("--in", dest="inp", required=True, help="recorded CSV")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_inject)

    sp = sub.add_parser("sweep", help="sweep cloud density or distance, write metrics CSV")
    common(sp, frames=False)
    sp.add_argument("--param", required=True)
    sp.add_argument("--values", required=True)
    sp.add_argument("--replicates", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.add_argument("--figure", help="also render the sweep to this image")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("bench", help="time simulation without output")
    common(sp)
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FormatError, InjectError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINK
    except FileNotFoundError as exc:
        # a missing config is a configuration error; other missing files are I/O
        if getattr(args, "config", None) and str(exc.filename) == str(args.config):
            print(f"error: config file not found: {args.config}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO if args.command != "simulate" or (args.format or "") != "stream" else EXIT_SINK


if __name__ == "__main__":
    sys.exit(main())
