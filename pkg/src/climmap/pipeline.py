"""Three-period batch runs: config loading, per-station work, outputs and manifest.

A pipeline config is one JSON document::

    {
      "name": "sc",
      "system": {"builtin": "sc"},
      "periods": [{"key": "past", "dir": "data/past"},
                  {"key": "near", "dir": "data/near"},
                  {"key": "far",  "dir": "data/far"}],
      "grid": {"cell": 0.5},
      "out_dir": "out",
      "workers": 0
    }

``"mode": "climate-stat"`` with ``"variable"`` and ``"statistic"`` replaces the
simulation by a statistic of one climate column. Relative paths are resolved
against the config file's directory.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from scipy.stats import qmc

from .climate_io import ALL_CODES, PERIODS, PeriodDataset, load_periods, parse_climate_file
from .errors import ArgumentError, ClimmapError, ClimmapIOError, ConfigError, SingularError
from .maprender import GridSpec, render_five
from .perf import (
    HOURLY_DT, STATISTICS, MapTable, PerformanceIndicator, StationResult, assemble_map_table, climate_stat,
    run_station, write_period_csv,
)
from .statespace import dc_gain, discretize_zoh
from .systems import SystemSpec, build_from_config

log = logging.getLogger(__name__)

__all__ = [
    "PipelineConfig",
    "RunManifest",
    "StationFailure",
    "load_config",
    "parse_config",
    "run_pipeline",
    "place_stations",
    "default_workers",
    "EUROPE_BOX",
]

EUROPE_BOX = (-12.0, 45.0, 33.0, 72.0)
MODES = ("simulate", "climate-stat")


class StationFailure(ClimmapError):
    """A station failed; the run aborts unless bad stations are skipped."""

    def __init__(self, station: str, period: str, step: str, cause: Exception):
        self.station, self.period, self.step, self.cause = station, period, step, cause
        super().__init__(f"station {station} ({period}) failed during {step}: {cause}")


def default_workers() -> int:
    env = os.environ.get("CLIMMAP_WORKERS", "").strip()
    if env:
        try:
            return max(0, int(env))
        except ValueError:
            log.warning("ignoring non-integer CLIMMAP_WORKERS=%r", env)
    return 0


@dataclass
class PipelineConfig:
    name: str
    periods: dict[str, Path]
    out_dir: Path
    mode: str = "simulate"
    system: SystemSpec | None = None
    variable: str | None = None
    statistic: dict[str, Any] = field(default_factory=lambda: {"statistic": "mean"})
    skip_hours: int = 0
    grid: GridSpec = field(default_factory=GridSpec)
    workers: int = 0
    raw: dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def resolved_workers(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)


def _periods_from(cfg: Any, base: Path) -> dict[str, Path]:
    if isinstance(cfg, Mapping):
        items = [{"key": k, "dir": v} for k, v in cfg.items()]
    elif isinstance(cfg, list):
        items = cfg
    else:
        raise ConfigError("periods", "must be a list of {key, dir}")
    out: dict[str, Path] = {}
    for i, item in enumerate(items):
        if not isinstance(item, Mapping) or "key" not in item or "dir" not in item:
            raise ConfigError(f"periods[{i}]", "need 'key' and 'dir'")
        key = item["key"]
        if key not in PERIODS:
            raise ConfigError(f"periods[{i}].key", f"must be one of {PERIODS}")
        if key in out:
            raise ConfigError(f"periods[{i}].key", f"period {key!r} given twice")
        out[key] = (base / str(item["dir"])).resolve()
    if set(out) != set(PERIODS):
        raise ConfigError("periods", f"need exactly the periods {PERIODS}")
    return out


def parse_config(raw: Mapping[str, Any], base_dir=".") -> PipelineConfig:
    """Validate a pipeline config document. Raises :class:`ConfigError`."""
    if not isinstance(raw, Mapping):
        raise ConfigError("", "config must be a JSON object")
    base = Path(base_dir)
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        raise ConfigError("name", "required non-empty string")
    mode = raw.get("mode", "simulate")
    if mode not in MODES:
        raise ConfigError("mode", f"must be one of {MODES}")
    periods = _periods_from(raw.get("periods"), base)
    out_dir = (base / str(raw.get("out_dir", "out"))).resolve()

    grid_cfg = raw.get("grid", {})
    if not isinstance(grid_cfg, Mapping):
        raise ConfigError("grid", "must be an object")
    known = {f.name for f in fields(GridSpec)}
    for k in grid_cfg:
        if k not in known:
            raise ConfigError(f"grid.{k}", "unknown grid setting")
    try:
        grid = GridSpec(**grid_cfg)
    except (ArgumentError, TypeError) as exc:
        raise ConfigError("grid", str(exc)) from None

    skip = raw.get("skip_hours", 0)
    if isinstance(skip, bool) or not isinstance(skip, int) or skip < 0:
        raise ConfigError("skip_hours", "must be a non-negative integer")
    workers = raw.get("workers")
    if workers is None:
        workers = default_workers()
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 0:
        raise ConfigError("workers", "must be a non-negative integer")

    cfg = PipelineConfig(name=name, periods=periods, out_dir=out_dir, mode=mode,
                         skip_hours=skip, grid=grid, workers=workers, raw=dict(raw))
    if mode == "simulate":
        if "system" not in raw:
            raise ConfigError("system", "required in simulate mode")
        cfg.system = build_from_config(raw["system"], name=name)
        if cfg.system.name != name:
            cfg.system = SystemSpec(name, cfg.system.model, cfg.system.bindings,
                                    cfg.system.x0, cfg.system.indicator, cfg.system.builtin)
    else:
        var = raw.get("variable")
        if var not in ALL_CODES:
            raise ConfigError("variable", f"must be one of {ALL_CODES}")
        stat = raw.get("statistic", "mean")
        if stat not in STATISTICS:
            raise ConfigError("statistic", f"must be one of {STATISTICS}")
        cfg.variable = var
        cfg.statistic = {"statistic": stat, "q": raw.get("q"), "threshold": raw.get("threshold")}
        try:
            PerformanceIndicator((1.0,), 0.0, stat, cfg.statistic["q"], cfg.statistic["threshold"])
        except (ArgumentError, TypeError, ValueError) as exc:
            raise ConfigError("statistic", str(exc)) from None
    return cfg


def load_config(path, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    """Read a JSON config; ``overrides`` replace top-level keys before validation."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON in {path}: {exc}") from None
    if overrides and isinstance(raw, dict):
        raw.update(overrides)
    return parse_config(raw, base_dir=path.parent)


@dataclass
class RunManifest:
    config_digest: str
    name: str
    mode: str
    station_count: int
    workers: int
    period_wall_time_s: dict[str, float] = field(default_factory=dict)
    total_wall_time_s: float = 0.0
    warnings: list[str] = field(default_factory=list)
    clamp_counts: dict[str, dict[str, int]] = field(default_factory=dict)
    masked_fraction: dict[str, float] = field(default_factory=dict)
    dc_gain_te: float | None = None
    skipped_stations: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    # full-precision results of the run; not serialized
    table: MapTable | None = field(default=None, repr=False, compare=False)

    def write(self, path) -> None:
        doc = {k: v for k, v in self.__dict__.items() if k != "table"}
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _te_gain(spec: SystemSpec) -> float | None:
    ch = spec.channel_for("TA")
    if ch is None:
        return None
    try:
        G = dc_gain(spec.model)
    except SingularError:
        return None
    return float(np.dot(spec.indicator.weights, G[:, ch]))


def _station_task(cfg: PipelineConfig, dmodel, period: str, path: Path):
    sid = path.stem
    step = "parse"
    try:
        series = parse_climate_file(path)
        if cfg.mode == "simulate":
            step = "simulate"
            result = run_station(cfg.system, series, sid, skip_hours=cfg.skip_hours, dmodel=dmodel)
        else:
            step = "statistic"
            st = cfg.statistic
            value = climate_stat(series, cfg.variable, st["statistic"], q=st["q"],
                                 threshold=st["threshold"], skip_hours=cfg.skip_hours)
            result = StationResult(sid, series.header.longitude, series.header.latitude, value)
        if not math.isfinite(result.value):
            raise ArgumentError(f"non-finite performance value {result.value}")
    except (ClimmapError, ValueError) as exc:
        raise StationFailure(sid, period, step, exc) from exc
    return result, dict(series.clamp_counts)


def run_pipeline(cfg: PipelineConfig, *, skip_bad_stations: bool = False) -> RunManifest:
    """Run all stations of all three periods, then write tables, maps and manifest.

    Results are joined by station id, so outputs do not depend on the number of
    workers. The manifest is written last.
    """
    t_start = time.perf_counter()
    try:
        datasets: dict[str, PeriodDataset] = load_periods(cfg.periods)
    except (ArgumentError, ClimmapIOError) as exc:
        raise ConfigError("periods", str(exc)) from None
    ids = datasets["past"].station_ids
    if not ids:
        raise ConfigError("periods", "no .clim files found in the period directories")
    workers = cfg.resolved_workers()
    manifest = RunManifest(cfg.digest, cfg.name, cfg.mode, len(ids), workers)

    dmodel = None
    if cfg.mode == "simulate":
        dmodel = discretize_zoh(cfg.system.model, HOURLY_DT)
        manifest.dc_gain_te = _te_gain(cfg.system)
        if manifest.dc_gain_te is not None:
            log.info("steady-state gain of the indicator w.r.t. outdoor temperature: %.6g per K",
                     manifest.dc_gain_te)

    results: dict[str, list[StationResult]] = {}
    bad: set[str] = set()
    total = len(ids) * len(PERIODS)
    done = 0
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for period in PERIODS:
            t0 = time.perf_counter()
            futures = [pool.submit(_station_task, cfg, dmodel, period, p)
                       for p in datasets[period].stations]
            results[period] = []
            clamps: dict[str, int] = {}
            for fut in futures:
                try:
                    res, counts = fut.result()
                except StationFailure as exc:
                    if not skip_bad_stations:
                        for f in futures:
                            f.cancel()
                        raise
                    log.warning("skipping station: %s", exc)
                    manifest.warnings.append(f"skipped: {exc}")
                    bad.add(exc.station)
                    continue
                results[period].append(res)
                for k, v in counts.items():
                    clamps[k] = clamps.get(k, 0) + v
                done += 1
                log.info("[%d/%d] %s %s = %.6g", done, total, period, res.station_id, res.value)
            manifest.period_wall_time_s[period] = round(time.perf_counter() - t0, 3)
            if clamps:
                manifest.clamp_counts[period] = dict(sorted(clamps.items()))
                manifest.warnings.append(
                    f"{period}: clamped values " + ", ".join(f"{k}={v}" for k, v in sorted(clamps.items())))

    if bad:
        manifest.skipped_stations = sorted(bad)
        for period in PERIODS:
            results[period] = [r for r in results[period] if r.station_id not in bad]
        if not results["past"]:
            raise ClimmapError("every station failed")

    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for period in PERIODS:
        p = out / f"{cfg.name}_{period}.csv"
        write_period_csv(results[period], p)
        written.append(p)
    table = assemble_map_table(results["past"], results["near"], results["far"])
    p = out / f"{cfg.name}_mapvar.csv"
    table.to_csv(p)
    written.append(p)
    manifest.table = table
    for m in render_five(table, cfg.grid, cfg.name, out):
        written += [m.png, m.grid_csv]
        manifest.masked_fraction[m.column] = round(m.grid.masked_fraction, 6)
    frac = max(manifest.masked_fraction.values())
    if frac > 0:
        manifest.warnings.append(f"masked cell fraction {frac:.3f}")
    if cfg.mode == "simulate" and manifest.dc_gain_te is not None:
        neg = [r.station_id for r in table.rows if manifest.dc_gain_te > 0 and r.diff_near <= 0]
        if neg:
            manifest.warnings.append(
                f"{len(neg)} stations have non-positive near-future difference despite positive gain")

    manifest_path = out / f"{cfg.name}_manifest.json"
    manifest.outputs = [p.name for p in written] + [manifest_path.name]
    manifest.total_wall_time_s = round(time.perf_counter() - t_start, 3)
    manifest.write(manifest_path)
    return manifest


def place_stations(n: int, seed: int, *, lattice: bool = False,
                   box: tuple[float, float, float, float] = EUROPE_BOX) -> list[tuple[float, float]]:
    """Station coordinates over ``box`` = (lon_min, lon_max, lat_min, lat_max).

    Default is a seeded scrambled Halton sequence; ``lattice`` gives a regular
    grid of cell centres instead. Coordinates are rounded to 4 decimals.
    """
    if n < 1:
        raise ArgumentError("need at least one station")
    lon0, lon1, lat0, lat1 = box
    if lattice:
        aspect = (lon1 - lon0) / (lat1 - lat0)
        cols = max(1, math.ceil(math.sqrt(n * aspect)))
        rows = math.ceil(n / cols)
        pts = [((j + 0.5) / cols, 1.0 - (i + 0.5) / rows) for i in range(rows) for j in range(cols)][:n]
        unit = np.array(pts)
    else:
        unit = qmc.Halton(d=2, scramble=True, seed=np.random.default_rng(seed)).random(n)
    lons = np.round(lon0 + unit[:, 0] * (lon1 - lon0), 4)
    lats = np.round(lat0 + unit[:, 1] * (lat1 - lat0), 4)
    return [(float(a), float(b)) for a, b in zip(lons, lats)]
