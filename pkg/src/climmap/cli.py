"""``climmap`` command line: gen, run, climate-stat, inspect.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
Progress and warnings go to stderr, data summaries to stdout.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .climate_io import ALL_CODES, PERIODS, generate_dataset, parse_climate_file
from .errors import ClimmapError, ConfigError
from .pipeline import load_config, place_stations, run_pipeline

log = logging.getLogger("climmap")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="climmap",
        description="Map building-system performance under past and future climates.")
    parser.add_argument("-q", "--quiet", action="store_true", help="only print warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic three-period climate dataset")
    g.add_argument("--out", required=True, help="output directory (gets past/, near/, far/)")
    g.add_argument("--stations", type=_positive_int, required=True)
    g.add_argument("--years", type=_positive_int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--dt-near", type=float, default=1.0, help="near-future warming, K")
    g.add_argument("--dt-far", type=float, default=3.0, help="far-future warming, K")
    g.add_argument("--grid-europe", action="store_true",
                   help="place stations on a regular lattice instead of a Halton sequence")

    r = sub.add_parser("run", help="simulate every station of the three periods and draw the maps")
    r.add_argument("--config", required=True)
    r.add_argument("--workers", type=_nonneg_int, default=None, help="override config workers (0 = auto)")
    r.add_argument("--skip-bad-stations", action="store_true",
                   help="drop failing stations from all periods instead of aborting")

    c = sub.add_parser("climate-stat", help="map a statistic of one climate variable (no model)")
    c.add_argument("--config", required=True)
    c.add_argument("--variable", default=None, help=f"one of {', '.join(ALL_CODES)}")
    c.add_argument("--statistic", default=None)
    c.add_argument("--workers", type=_nonneg_int, default=None)
    c.add_argument("--skip-bad-stations", action="store_true")

    i = sub.add_parser("inspect", help="summarize one climate file")
    i.add_argument("file")
    return parser


def cmd_gen(args) -> int:
    stations = place_stations(args.stations, args.seed, lattice=args.grid_europe)
    offsets = {"past": 0.0, "near": args.dt_near, "far": args.dt_far}
    datasets = generate_dataset(stations, args.years, offsets, args.seed, args.out)
    print("station,lon,lat")
    for path, (lon, lat) in zip(datasets["past"].stations, stations):
        print(f"{path.stem},{lon:.4f},{lat:.4f}")
    log.info("wrote %d files under %s", len(stations) * len(PERIODS), args.out)
    return 0


def _run(args, *, climate: bool) -> int:
    overrides = {}
    if climate:
        overrides["mode"] = "climate-stat"
        if args.variable is not None:
            overrides["variable"] = args.variable
        if args.statistic is not None:
            overrides["statistic"] = args.statistic
    cfg = load_config(args.config, overrides)
    if not climate and cfg.mode != "simulate":
        log.info("config selects mode %s", cfg.mode)
    if args.workers is not None:
        cfg.workers = args.workers
    manifest = run_pipeline(cfg, skip_bad_stations=args.skip_bad_stations)
    for w in manifest.warnings:
        log.warning("%s", w)
    print(f"stations: {manifest.station_count}")
    print(f"wall time: {manifest.total_wall_time_s:.3f} s")
    for name in manifest.outputs:
        print(cfg.out_dir / name)
    return 0


def cmd_inspect(args) -> int:
    series = parse_climate_file(args.file)
    h = series.header
    print(f"lon {h.longitude:g}  lat {h.latitude:g}  height {h.height:g} m  "
          f"tz {h.time_zone:g} h  step {h.time_step:g} h")
    print(f"n_hours {series.n_hours} ({series.n_hours // 8760} years)")
    print(f"{'code':<6} {'min':>12} {'mean':>12} {'max':>12}")
    for code in ALL_CODES:
        col = series.columns[code]
        print(f"{code:<6} {col.min():12.6g} {np.mean(col):12.6g} {col.max():12.6g}")
    for code, n in sorted(series.clamp_counts.items()):
        print(f"clamped {code}: {n}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "run":
            return _run(args, climate=False)
        if args.command == "climate-stat":
            return _run(args, climate=True)
        return cmd_inspect(args)
    except ConfigError as exc:
        print(f"climmap: config error: {exc}", file=sys.stderr)
        return 2
    except (ClimmapError, OSError) as exc:
        print(f"climmap: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
