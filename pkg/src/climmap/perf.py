"""Performance indicators: reduce an hourly output stream to one value per station,
and join the three periods into the per-station map table.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Mapping, Sequence

import numpy as np

from .climate_io import ALL_CODES, ClimateSeries
from .errors import ArgumentError, ClimmapIOError, ConfigError, DivergenceError, EmptyError, JoinError
from .statespace import DiscreteModel, discretize_zoh, simulate

if TYPE_CHECKING:
    from .systems import SystemSpec

__all__ = [
    "STATISTICS",
    "PerformanceIndicator",
    "IndicatorReducer",
    "reduce_stream",
    "climate_stat",
    "StationResult",
    "MapRow",
    "MapTable",
    "assemble_map_table",
    "run_station",
    "indicator_from_config",
    "indicator_to_config",
    "write_period_csv",
]

STATISTICS = ("mean", "min", "max", "percentile", "fraction_above")
HOURLY_DT = 3600.0


@dataclass(frozen=True)
class PerformanceIndicator:
    """Scalar ``weights . y_k + offset`` per step, reduced by ``statistic``.

    ``q`` (0..100) is required for ``"percentile"`` and ``threshold`` for
    ``"fraction_above"``.
    """

    weights: tuple[float, ...]
    offset: float = 0.0
    statistic: str = "mean"
    q: float | None = None
    threshold: float | None = None

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if not w or not all(math.isfinite(v) for v in w):
            raise ArgumentError("indicator weights must be a non-empty list of finite numbers")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "offset", float(self.offset))
        if self.statistic not in STATISTICS:
            raise ArgumentError(f"unknown statistic {self.statistic!r}; expected one of {STATISTICS}")
        if self.statistic == "percentile":
            if self.q is None or not 0.0 <= float(self.q) <= 100.0:
                raise ArgumentError("percentile needs q in [0, 100]")
            object.__setattr__(self, "q", float(self.q))
        if self.statistic == "fraction_above":
            if self.threshold is None or not math.isfinite(float(self.threshold)):
                raise ArgumentError("fraction_above needs a finite threshold")
            object.__setattr__(self, "threshold", float(self.threshold))

    def scaled(self, factor: float) -> "PerformanceIndicator":
        return PerformanceIndicator(tuple(factor * w for w in self.weights), factor * self.offset,
                                    self.statistic, self.q, self.threshold)


def indicator_from_config(cfg: Any, path: str = "indicator") -> PerformanceIndicator:
    if not isinstance(cfg, Mapping):
        raise ConfigError(path, "indicator must be an object")
    if "weights" not in cfg or not isinstance(cfg["weights"], list):
        raise ConfigError(f"{path}.weights", "required list of numbers")
    try:
        return PerformanceIndicator(
            tuple(cfg["weights"]), cfg.get("offset", 0.0), cfg.get("statistic", "mean"),
            cfg.get("q"), cfg.get("threshold"))
    except (ArgumentError, TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


def indicator_to_config(ind: PerformanceIndicator) -> dict[str, Any]:
    out: dict[str, Any] = {"weights": list(ind.weights), "offset": ind.offset,
                           "statistic": ind.statistic}
    if ind.q is not None:
        out["q"] = ind.q
    if ind.threshold is not None:
        out["threshold"] = ind.threshold
    return out


class IndicatorReducer:
    """Streaming sink for :func:`climmap.statespace.simulate`.

    Mean, min, max and fraction-above run in one pass; the mean adds block
    sums with Neumaier compensation. Percentile keeps the scalars.
    """

    def __init__(self, indicator: PerformanceIndicator, skip_hours: int = 0):
        if skip_hours < 0:
            raise ArgumentError("skip_hours must be >= 0")
        self.indicator = indicator
        self.skip_hours = int(skip_hours)
        self._w = np.asarray(indicator.weights)
        self.count = 0
        self._sum = 0.0
        self._comp = 0.0
        self._min = math.inf
        self._max = -math.inf
        self._above = 0
        self._kept: list[np.ndarray] = []

    def __call__(self, k0: int, Y: np.ndarray) -> None:
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y.reshape(-1, self._w.size)
        if Y.shape[1] != self._w.size:
            raise ArgumentError(f"outputs have {Y.shape[1]} columns, indicator expects {self._w.size}")
        if k0 < self.skip_hours:
            Y = Y[self.skip_hours - k0:]
        if Y.shape[0] == 0:
            return
        s = Y @ self._w + self.indicator.offset
        self.add_scalars(s)

    def add_scalars(self, s: np.ndarray) -> None:
        stat = self.indicator.statistic
        self.count += s.size
        if stat == "mean":
            x = float(np.sum(s))
            t = self._sum + x
            if abs(self._sum) >= abs(x):
                self._comp += (self._sum - t) + x
            else:
                self._comp += (x - t) + self._sum
            self._sum = t
        elif stat == "min":
            self._min = min(self._min, float(s.min()))
        elif stat == "max":
            self._max = max(self._max, float(s.max()))
        elif stat == "fraction_above":
            self._above += int(np.count_nonzero(s > self.indicator.threshold))
        else:
            self._kept.append(np.array(s))

    def result(self) -> float:
        if self.count == 0:
            raise EmptyError("no samples to reduce")
        stat = self.indicator.statistic
        if stat == "mean":
            return (self._sum + self._comp) / self.count
        if stat == "min":
            return self._min
        if stat == "max":
            return self._max
        if stat == "fraction_above":
            return self._above / self.count
        return float(np.percentile(np.concatenate(self._kept), self.indicator.q))


def reduce_stream(indicator: PerformanceIndicator, y_stream, *, skip_hours: int = 0) -> float:
    """Reduce output vectors (an ``(N, p)`` array-like, or an iterable of
    ``(rows, p)`` blocks) to one performance value."""
    red = IndicatorReducer(indicator, skip_hours)
    if isinstance(y_stream, (np.ndarray, list, tuple)):
        Y = np.asarray(y_stream, dtype=float)
        if Y.size:
            red(0, Y.reshape(len(Y), -1))
    else:
        k0 = 0
        for block in y_stream:
            block = np.atleast_2d(np.asarray(block, dtype=float))
            red(k0, block)
            k0 += block.shape[0]
    return red.result()


def climate_stat(series: ClimateSeries, code: str, statistic: str = "mean", *,
                 q: float | None = None, threshold: float | None = None,
                 skip_hours: int = 0) -> float:
    """Statistic of one climate column, no model involved."""
    if code not in ALL_CODES or code not in series.columns:
        raise ConfigError("variable", f"unknown climate variable {code!r}")
    ind = PerformanceIndicator((1.0,), 0.0, statistic, q, threshold)
    red = IndicatorReducer(ind, skip_hours)
    red(0, series.columns[code].reshape(-1, 1))
    return red.result()


# ---------------------------------------------------------------------------
# Per-station results and the map table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StationResult:
    station_id: str
    lon: float
    lat: float
    value: float


@dataclass(frozen=True)
class MapRow:
    station_id: str
    lon: float
    lat: float
    past: float
    near: float
    far: float
    diff_near: float
    diff_far: float


MAP_COLUMNS = ("past", "near", "far", "diff_near", "diff_far")


@dataclass(frozen=True)
class MapTable:
    """Per-station values of the three periods plus future-minus-past differences."""

    rows: tuple[MapRow, ...]

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    @property
    def station_ids(self) -> list[str]:
        return [r.station_id for r in self.rows]

    def to_csv(self, path) -> None:
        try:
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["station", "lon", "lat", *MAP_COLUMNS])
                for r in self.rows:
                    w.writerow([r.station_id] + [f"{v:.9g}" for v in
                                (r.lon, r.lat, r.past, r.near, r.far, r.diff_near, r.diff_far)])
        except OSError as exc:
            raise ClimmapIOError(f"cannot write {path}: {exc}") from exc

    @classmethod
    def from_csv(cls, path) -> "MapTable":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            rows = [MapRow(d["station"], float(d["lon"]), float(d["lat"]),
                           *(float(d[c]) for c in MAP_COLUMNS)) for d in reader]
        return cls(tuple(rows))


def write_period_csv(results: Sequence[StationResult], path) -> None:
    """Per-period ``station,lon,lat,value`` file, rows sorted by station id."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["station", "lon", "lat", "value"])
            for r in sorted(results, key=lambda r: r.station_id):
                w.writerow([r.station_id, f"{r.lon:.9g}", f"{r.lat:.9g}", f"{r.value:.9g}"])
    except OSError as exc:
        raise ClimmapIOError(f"cannot write {path}: {exc}") from exc


def assemble_map_table(past: Sequence[StationResult], near: Sequence[StationResult],
                       far: Sequence[StationResult]) -> MapTable:
    """Join three periods by station id; rows come out sorted by id.

    Raises
    ------
    JoinError
        Naming a station that is missing from, or duplicated in, one period.
    """
    by_period = []
    for label, results in (("past", past), ("near", near), ("far", far)):
        d = {}
        for r in results:
            if r.station_id in d:
                raise JoinError(r.station_id, f"duplicate station in period '{label}'")
            d[r.station_id] = r
        by_period.append(d)
    p, n, f = by_period
    for label, other in (("near", n), ("far", f)):
        odd = sorted(set(p).symmetric_difference(other))
        if odd:
            raise JoinError(odd[0], f"station set of period '{label}' differs from 'past'")
    rows = []
    for sid in sorted(p):
        a, b, c = p[sid].value, n[sid].value, f[sid].value
        rows.append(MapRow(sid, p[sid].lon, p[sid].lat, a, b, c, b - a, c - a))
    return MapTable(tuple(rows))


def run_station(spec: "SystemSpec", series: ClimateSeries, station_id: str = "", *,
                skip_hours: int = 0, dmodel: DiscreteModel | None = None) -> StationResult:
    """Simulate one station hour by hour and reduce to its performance value."""
    if dmodel is None:
        dmodel = discretize_zoh(spec.model, HOURLY_DT)
    red = IndicatorReducer(spec.indicator, skip_hours)
    try:
        simulate(dmodel, spec.input_blocks(series), spec.initial_state(series), red)
    except DivergenceError as exc:
        raise DivergenceError(exc.step, station_id or None) from None
    return StationResult(station_id, series.header.longitude, series.header.latitude, red.result())
